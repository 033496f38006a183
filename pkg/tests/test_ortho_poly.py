import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import eval_hermitenorm, eval_legendre

from lrasobol.errors import DegreeExceeded, DomainError, SizeOverflow
from lrasobol.ortho_poly import (
    BasisSpec,
    design_matrix,
    hermite_orthonormal,
    hermite_table,
    legendre_orthonormal,
    legendre_table,
    q_norm,
    tensor_basis_eval,
    truncation_set,
    truncation_size,
)


def test_legendre_values():
    assert legendre_orthonormal(0, 0.3) == 1.0
    assert legendre_orthonormal(1, 1.0) == pytest.approx(math.sqrt(3))
    u = np.linspace(-1, 1, 21)
    for k in range(8):
        assert np.allclose(legendre_orthonormal(k, u), math.sqrt(2 * k + 1) * eval_legendre(k, u), atol=1e-13)


def test_legendre_quadrature_orthogonality():
    x, w = np.polynomial.legendre.leggauss(32)
    tab = legendre_table(x, 6)
    gram = (tab * w[:, None]).T @ tab / 2
    assert abs(gram[2, 3]) < 1e-14
    assert np.allclose(gram, np.eye(7), atol=1e-13)


def test_legendre_domain():
    with pytest.raises(DomainError):
        legendre_table(np.array([1.01]), 2)
    legendre_table(np.array([1 + 1e-13]), 2)


def test_hermite_values():
    assert hermite_orthonormal(2, 0.0) == pytest.approx(-1 / math.sqrt(2))
    assert hermite_orthonormal(1, 0.7) == pytest.approx(0.7)
    u = np.linspace(-4, 4, 17)
    for k in range(10):
        assert np.allclose(hermite_orthonormal(k, u), eval_hermitenorm(k, u) / math.sqrt(math.factorial(k)),
                           rtol=1e-12, atol=1e-12)


def test_hermite_quadrature():
    x, w = np.polynomial.hermite_e.hermegauss(40)
    w = w / math.sqrt(2 * math.pi)
    tab = hermite_table(x, 8)
    gram = (tab * w[:, None]).T @ tab
    assert gram[3, 3] == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(gram, np.eye(9), atol=1e-12)


def test_recurrence_stable_to_degree_30():
    assert np.all(np.isfinite(legendre_table(np.linspace(-1, 1, 101), 30)))
    assert np.all(np.isfinite(hermite_table(np.linspace(-8, 8, 101), 30)))


def test_tensor_basis():
    spec = BasisSpec(("legendre", "legendre"), (2, 2))
    assert tensor_basis_eval((0, 0), np.array([0.3, -0.2]), spec) == 1.0
    assert tensor_basis_eval((1, 1), np.array([1.0, 1.0]), spec) == pytest.approx(3.0)
    with pytest.raises(DegreeExceeded):
        tensor_basis_eval((3, 0), np.array([0.0, 0.0]), spec)


def test_tensor_basis_mc_orthonormality():
    rng = np.random.default_rng(0)
    n = 10**6
    u = np.column_stack([rng.uniform(-1, 1, n), rng.standard_normal(n)])
    idx = np.array([[0, 0], [1, 0], [0, 1], [1, 1], [2, 1], [0, 2]])
    psi = design_matrix(idx, u, ("legendre", "hermite"))
    gram = psi.T @ psi / n
    assert np.max(np.abs(gram - np.eye(len(idx)))) < 0.01
    spec = BasisSpec(("legendre", "hermite"), (2, 2))
    assert np.allclose(psi[:100, 4], tensor_basis_eval((2, 1), u[:100], spec))


def test_truncation_examples():
    assert len(truncation_set(2, 2, 1.0)) == 6
    assert len(truncation_set(20, 3, 1.0)) == 1771
    s = {tuple(a) for a in truncation_set(2, 2, 0.5)}
    assert s == {(0, 0), (1, 0), (0, 1), (2, 0), (0, 2)}
    first = truncation_set(4, 3)[0]
    assert not first.any()


@given(st.integers(1, 6), st.integers(0, 6))
def test_truncation_cardinality(dim, p):
    assert len(truncation_set(dim, p)) == math.comb(dim + p, p) == truncation_size(dim, p)


@given(st.integers(1, 5), st.integers(0, 7), st.sampled_from([0.25, 0.5, 0.75, 1.0]),
       st.sampled_from([0.25, 0.5, 0.75, 1.0]))
def test_truncation_nested(dim, p, q1, q2):
    q1, q2 = min(q1, q2), max(q1, q2)
    a = {tuple(x) for x in truncation_set(dim, p, q1)}
    b = {tuple(x) for x in truncation_set(dim, p, q2)}
    assert a <= b
    assert all(q_norm(x, q1) <= p * (1 + 1e-9) for x in a)


def test_truncation_size_cap():
    with pytest.raises(SizeOverflow):
        truncation_set(10, 6, 1.0, cap=1000)
