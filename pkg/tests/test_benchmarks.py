import itertools
import math
import sys

import numpy as np
import pytest

from lrasobol.benchmarks import (
    SOBOL_G_C,
    ExternalModel,
    GridSpec,
    all_subsets,
    beam_deflection,
    beam_exact_moments,
    beam_input_model,
    conductivity,
    conductivity_params,
    eole_basis,
    eole_field_eval,
    get_benchmark,
    sobol_function,
    sobol_function_closed_index,
    sobol_function_exact_indices,
    sobol_function_partial_variances,
    truss_deflection,
    truss_geometry,
    truss_input_model,
    truss_stiffness,
)
from lrasobol.errors import ExternalModelError, InvalidParameter, OutOfSupport
from lrasobol.input_model import InputModel, Marginal
from lrasobol.sobol import mc_moments


def test_sobol_function_values():
    assert sobol_function(np.full(20, 0.5)) == pytest.approx(np.prod(np.array(SOBOL_G_C) / (1 + np.array(SOBOL_G_C))))
    assert sobol_function([0.0, 0.0], (1, 2)) == pytest.approx(2.0)
    with pytest.raises(OutOfSupport):
        sobol_function([1.2, 0.0], (1, 2))
    with pytest.raises(InvalidParameter):
        sobol_function([0.2], (1, 2))


def test_sobol_function_mc_mean():
    x = np.random.default_rng(0).random((10**6, 20))
    assert np.mean(sobol_function(x)) == pytest.approx(1.0, abs=0.002)


def test_sobol_function_exact_indices():
    d, _ = sobol_function_partial_variances((1.0,))
    assert d[0] == pytest.approx(1 / 12)
    ex = sobol_function_exact_indices()
    assert ex["first_order"][0] == pytest.approx(0.6037, abs=5e-5)
    assert ex["total"][0] == pytest.approx(0.6342, abs=5e-5)
    assert ex["std"] == pytest.approx(0.3715, abs=5e-5)


@pytest.mark.parametrize("dim", range(1, 7))
def test_sobol_function_indices_sum_to_one(dim):
    c = np.random.default_rng(dim).uniform(0, 5, dim)
    total = sum(sobol_function_exact_indices(c, u) for u in all_subsets(dim))
    assert total == pytest.approx(1.0, abs=1e-12)
    ex = sobol_function_exact_indices(c)
    for i in range(dim):
        # total index = sum of interaction indices containing i
        st = sum(sobol_function_exact_indices(c, u) for u in all_subsets(dim) if i in u)
        assert ex["total"][i] == pytest.approx(st, abs=1e-12)
        assert sobol_function_closed_index(c, [i]) == pytest.approx(ex["first_order"][i], abs=1e-14)


def test_sobol_function_indices_match_quadrature():
    # independent oracle: variance of the conditional expectation by Gauss-Legendre on each half
    c = np.array([1.0, 2.0, 5.0])
    g, w = np.polynomial.legendre.leggauss(20)
    nodes = np.concatenate([(g + 1) / 4, (g + 3) / 4])
    wts = np.concatenate([w, w]) / 4
    f = [(np.abs(4 * nodes - 2) + ci) / (1 + ci) for ci in c]
    var = np.prod([np.sum(wts * fi**2) for fi in f]) - 1
    d0 = np.sum(wts * f[0] ** 2) - 1
    assert sobol_function_exact_indices(c)["first_order"][0] == pytest.approx(d0 / var, rel=1e-12)


def test_beam_deflection():
    assert beam_deflection(0.15, 0.3, 5.0, 3e10, 1e4) == pytest.approx(1e4 * 125 / (4 * 3e10 * 0.15 * 0.027))
    assert beam_deflection(0.15, 0.3, 5.0, 3e10, 1e4) == pytest.approx(2.572e-3, rel=1e-3)
    base = beam_deflection(0.15, 0.3, 5.0, 3e10, 1e4)
    assert beam_deflection(0.15, 0.3, 5.0, 3e10, 2e4) == pytest.approx(2 * base)
    assert beam_deflection(0.15, 0.6, 5.0, 3e10, 1e4) == pytest.approx(base / 8)
    with pytest.raises(InvalidParameter):
        beam_deflection(0.0, 0.3, 5.0, 3e10, 1e4)


def test_beam_exact_moments():
    mean, std = beam_exact_moments()
    assert mean * 1e3 == pytest.approx(2.677, abs=5e-4)
    assert std * 1e3 == pytest.approx(0.8088, abs=5e-4)
    tiny = InputModel([Marginal.lognormal(m, 1e-9) for m in (0.15, 0.3, 5.0, 3e10, 1e4)])
    mean, std = beam_exact_moments(tiny)
    assert mean == pytest.approx(beam_deflection(0.15, 0.3, 5.0, 3e10, 1e4), rel=1e-12)
    assert std < 1e-10


def test_beam_moments_match_mc():
    bm = get_benchmark("beam")
    mean, var, se = mc_moments(bm, bm.input_model, 10**6, seed=3)
    assert abs(mean - bm.reference["mean"]) < 3 * se
    assert mean == pytest.approx(2.677, rel=0.003)


def test_truss_geometry_counts():
    nodes, bars = truss_geometry()
    assert len(nodes) == 13 and len(bars) == 23
    assert sum(g == 1 for _, _, g in bars) == 11


def truss_means():
    return [m.mean for m in truss_input_model()]


def test_truss_linearity_and_scaling():
    p = np.array(truss_means())
    base = truss_deflection(*p)
    loads = p.copy()
    loads[4:] *= 2.5
    assert truss_deflection(*loads) == pytest.approx(2.5 * base, rel=1e-10)
    stiff = p.copy()
    stiff[:4] *= 3.0
    assert truss_deflection(*stiff) == pytest.approx(base / 9.0, rel=1e-10)
    only_a = p.copy()
    only_a[[0, 1]] *= 2.0
    assert truss_deflection(*only_a) == pytest.approx(base / 2.0, rel=1e-10)


def test_truss_mean_parameter_value():
    assert 100 * truss_deflection(*truss_means()) == pytest.approx(7.941, rel=0.02)


def test_truss_symmetric_loads():
    p = np.array(truss_means())
    left, right = p.copy(), p.copy()
    left[4] *= 2
    right[9] *= 2
    assert truss_deflection(*left) == pytest.approx(truss_deflection(*right), rel=1e-10)


def test_truss_stiffness_spd_in_box():
    im = truss_input_model()
    rng = np.random.default_rng(4)
    u = rng.choice([-6.0, 6.0], size=(64, 4))
    u = np.vstack([u, rng.uniform(-6, 6, (64, 4))])
    cols = [im[i].from_standard(u[:, i]) for i in range(4)]
    K = truss_stiffness(*cols)
    assert np.allclose(K, np.swapaxes(K, 1, 2), rtol=1e-12, atol=0)
    assert np.all(np.linalg.eigvalsh(K) > 0)


def test_eole_basis_properties():
    basis = eole_basis()
    assert basis.grid.shape == (121, 2)
    assert np.sum(basis.all_eigenvalues) == pytest.approx(121, rel=1e-10)
    assert np.all(basis.all_eigenvalues >= 0)
    assert basis.size == 53
    big = eole_basis(length=1e3)
    assert big.size == 1
    assert big.eigenvalues[0] == pytest.approx(121, rel=1e-4)
    with pytest.raises(InvalidParameter):
        eole_basis(length=0)
    with pytest.raises(InvalidParameter):
        eole_basis(threshold=1.0)


def test_eole_field_zero_and_variance():
    basis = eole_basis()
    centre = basis.grid[60]
    assert np.allclose(centre, [0.0, 0.0])
    assert eole_field_eval(basis, np.zeros(basis.size), centre) == 0.0
    a, _ = conductivity_params()
    assert conductivity(basis, np.zeros(basis.size), centre) == pytest.approx(math.exp(a))
    # exact truncated pointwise variance at the centre node
    modes = basis.eigenvectors[60] * np.sqrt(basis.eigenvalues)
    exact = float(np.sum(modes**2))
    assert 0.99 <= exact <= 1.0
    xi = np.random.default_rng(5).normal(size=(10**5, basis.size))
    g = eole_field_eval(basis, xi, centre)
    se = exact * math.sqrt(2 / 1e5)
    assert abs(np.var(g) - exact) < 4 * se
    kappa = conductivity(basis, xi, centre)
    assert np.mean(kappa) == pytest.approx(1.0, abs=0.01)


def test_grid_spec():
    pts = GridSpec(0.0, 1.0, 3).points()
    assert pts.shape == (9, 2)
    assert pts.min() == 0 and pts.max() == 1


def test_registry():
    for name in ("sobol-g", "beam", "truss", "eole-field"):
        bm = get_benchmark(name)
        assert bm.name == name
    assert get_benchmark("eole-field").input_model.dim == 53
    with pytest.raises(InvalidParameter):
        get_benchmark("nope")
    with pytest.raises(ExternalModelError):
        get_benchmark("eole-field")(np.zeros((1, 53)))


def test_external_model_round_trip():
    script = "import sys,csv; r=list(csv.reader(sys.stdin))[1:]; [print(sum(map(float,x))) for x in r]"
    ext = ExternalModel([sys.executable, "-c", script], timeout=30)
    x = np.array([[0.5, 1.5], [2.0, -1.0]])
    assert np.allclose(ext(x), [2.0, 1.0])


def test_external_model_failures():
    with pytest.raises(ExternalModelError) as info:
        ExternalModel([sys.executable, "-c", "import sys; sys.exit(3)"])(np.zeros((2, 1)))
    assert info.value.stage == "model.external"
    with pytest.raises(ExternalModelError):
        ExternalModel([sys.executable, "-c", "print(1)"])(np.zeros((2, 1)))
    with pytest.raises(ExternalModelError):
        ExternalModel(["/nonexistent/binary"])(np.zeros((1, 1)))
    with pytest.raises(InvalidParameter):
        ExternalModel("")
