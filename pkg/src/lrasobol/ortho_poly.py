"""Orthonormal Legendre / Hermite polynomials and multi-index truncation sets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegreeExceeded, DomainError, InvalidParameter, SizeOverflow

DEFAULT_SIZE_CAP = 10_000_000
Q_GRID = (0.25, 0.5, 0.75, 1.0)

_DOMAIN_TOL = 1e-12


def legendre_table(u, degree):
    """Orthonormal Legendre values ``sqrt(2k+1) L_k(u)`` for k = 0..degree.

    Returns an array of shape ``u.shape + (degree + 1,)``.
    """
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) > 1.0 + _DOMAIN_TOL):
        raise DomainError("Legendre polynomials are evaluated on [-1, 1]")
    out = np.empty(u.shape + (degree + 1,))
    out[..., 0] = 1.0
    if degree >= 1:
        out[..., 1] = u
    for k in range(1, degree):
        out[..., k + 1] = ((2 * k + 1) * u * out[..., k] - k * out[..., k - 1]) / (k + 1)
    out *= np.sqrt(2 * np.arange(degree + 1) + 1.0)
    return out


def hermite_table(u, degree):
    """Orthonormal probabilists' Hermite values ``He_k(u) / sqrt(k!)``."""
    u = np.asarray(u, dtype=float)
    out = np.empty(u.shape + (degree + 1,))
    out[..., 0] = 1.0
    if degree >= 1:
        out[..., 1] = u
    # normalized recurrence avoids factorial overflow at high degree
    for k in range(1, degree):
        out[..., k + 1] = (u * out[..., k] - math.sqrt(k) * out[..., k - 1]) / math.sqrt(k + 1)
    return out


def legendre_orthonormal(k, u):
    return legendre_table(u, k)[..., k]


def hermite_orthonormal(k, u):
    return hermite_table(u, k)[..., k]


def univariate_table(family, u, degree):
    if family == "legendre":
        return legendre_table(u, degree)
    if family == "hermite":
        return hermite_table(u, degree)
    raise InvalidParameter(f"unknown polynomial family {family!r}")


@dataclass(frozen=True)
class BasisSpec:
    """Per-dimension polynomial family and maximal degree."""

    families: tuple
    degrees: tuple

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(self, "degrees", tuple(int(d) for d in self.degrees))
        if len(self.families) != len(self.degrees):
            raise InvalidParameter("families and degrees must have equal length")
        if any(d < 0 for d in self.degrees):
            raise InvalidParameter("degrees must be >= 0")

    @classmethod
    def uniform_degree(cls, families: Sequence[str], degree):
        return cls(tuple(families), (degree,) * len(families))

    @property
    def dim(self):
        return len(self.families)

    def tables(self, u):
        """List of per-dimension value tables, each of shape (N, p_i + 1)."""
        u = np.atleast_2d(u)
        return [univariate_table(f, u[:, i], d) for i, (f, d) in enumerate(zip(self.families, self.degrees))]


def tensor_basis_eval(alpha, u, spec: BasisSpec):
    """Evaluate ``Psi_alpha(u) = prod_i P_{alpha_i}(u_i)``."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != spec.dim:
        raise InvalidParameter("multi-index length does not match basis dimension")
    for a, p in zip(alpha, spec.degrees):
        if a > p:
            raise DegreeExceeded(f"multi-index {alpha} exceeds degrees {spec.degrees}")
    u = np.asarray(u, dtype=float)
    val = np.ones(u.shape[:-1])
    for i, (fam, a) in enumerate(zip(spec.families, alpha)):
        if a:
            val = val * univariate_table(fam, u[..., i], a)[..., a]
    return val


def design_matrix(indices, u, families, tables=None):
    """Matrix ``Psi[n, j] = Psi_{alpha_j}(u_n)`` for an (P, M) integer index array."""
    indices = np.asarray(indices, dtype=int)
    u = np.atleast_2d(u)
    if tables is None:
        max_deg = indices.max(axis=0) if len(indices) else np.zeros(u.shape[1], int)
        tables = [univariate_table(f, u[:, i], int(max_deg[i])) for i, f in enumerate(families)]
    psi = np.ones((u.shape[0], indices.shape[0]))
    for i, tab in enumerate(tables):
        col = indices[:, i]
        nz = col > 0
        if np.any(nz):
            psi[:, nz] *= tab[:, col[nz]]
    return psi


def q_norm(alpha, q):
    alpha = np.asarray(alpha, dtype=float)
    return float(np.sum(alpha**q) ** (1.0 / q))


def truncation_set(dim, total_degree, q=1.0, cap=DEFAULT_SIZE_CAP):
    """Multi-indices with hyperbolic norm ``||alpha||_q <= total_degree``.

    Enumerated depth-first with pruning on the partial q-norm. Returns an int
    array of shape (P, dim), sorted by total degree then reverse-lexicographically
    so that the zero index comes first.
    """
    if total_degree < 0:
        raise InvalidParameter("total degree must be >= 0")
    if not (0 < q <= 1):
        raise InvalidParameter("q must lie in (0, 1]")
    budget = float(total_degree) ** q * (1 + 1e-12)
    powers = np.arange(total_degree + 1, dtype=float) ** q
    out = []
    alpha = [0] * dim

    def rec(pos, used):
        if pos == dim:
            out.append(tuple(alpha))
            if len(out) > cap:
                raise SizeOverflow(f"truncation set exceeds cap of {cap} indices")
            return
        for a in range(total_degree + 1):
            cost = used + powers[a]
            if cost > budget:
                break
            alpha[pos] = a
            rec(pos + 1, cost)
        alpha[pos] = 0

    rec(0, 0.0)
    arr = np.array(out, dtype=int).reshape(-1, dim)
    order = np.lexsort(tuple(-arr[:, i] for i in reversed(range(dim))) + (arr.sum(axis=1),))
    return arr[order]


def truncation_size(dim, total_degree, q=1.0, cap=DEFAULT_SIZE_CAP):
    """Cardinality of :func:`truncation_set` without materializing it past ``cap``."""
    if q == 1.0:
        return math.comb(dim + total_degree, total_degree)
    return len(truncation_set(dim, total_degree, q, cap))
