"""Benchmark models with exact or Monte Carlo reference results.

``sobol-g``     Sobol' g-function, M = 20, exact moments and indices.
``beam``        Midspan deflection of a simply supported beam, M = 5, lognormal inputs.
``truss``       Midspan deflection of a 23-bar planar truss (direct stiffness), M = 10.
``eole-field``  EOLE discretization of a lognormal conductivity field, M = 53; the
                thermal response itself must be supplied as an external model.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import shlex
import subprocess
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    EigenFailure,
    ExternalModelError,
    InvalidParameter,
    OutOfSupport,
    SingularStiffness,
)
from .input_model import InputModel, Marginal, lognormal_params

# ---------------------------------------------------------------------------
# Sobol' g-function
# ---------------------------------------------------------------------------

SOBOL_G_C = (1, 2, 5, 10, 20, 50, 100) + (500,) * 13


def sobol_function(x, c=SOBOL_G_C):
    """``prod_i (|4 x_i - 2| + c_i) / (1 + c_i)`` on the unit hypercube."""
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)
    if x.shape[-1] != c.shape[0]:
        raise InvalidParameter(f"expected {c.shape[0]} inputs, got {x.shape[-1]}")
    if np.any(x < 0) or np.any(x > 1):
        raise OutOfSupport("Sobol function inputs must lie in [0, 1]")
    return np.prod((np.abs(4.0 * x - 2.0) + c) / (1.0 + c), axis=-1)


def sobol_function_partial_variances(c=SOBOL_G_C):
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise InvalidParameter("Sobol function constants must be >= 0")
    d = 1.0 / (3.0 * (1.0 + c) ** 2)
    return d, float(np.prod(d + 1.0) - 1.0)


def sobol_function_exact_indices(c=SOBOL_G_C, u: Sequence[int] | None = None):
    """Exact indices of the g-function.

    With ``u`` (0-based subset) returns the interaction index ``S_u``.
    Without it returns a dict with ``mean``, ``variance``, ``std`` and the
    per-variable ``first_order`` and ``total`` arrays.
    """
    d, D = sobol_function_partial_variances(c)
    if u is not None:
        u = sorted(set(int(i) for i in u))
        return float(np.prod(d[u]) / D)
    first = d / D
    # total: 1 - closed index of the complement = (D_i prod_{j != i}(1 + D_j)) / D
    total = d * np.prod(1.0 + d) / (1.0 + d) / D
    return {"mean": 1.0, "variance": D, "std": math.sqrt(D), "first_order": first, "total": total}


def sobol_function_closed_index(c, u):
    """Closed first-order index of subset ``u``: ``(prod_{i in u}(1 + D_i) - 1) / D``."""
    d, D = sobol_function_partial_variances(c)
    u = sorted(set(int(i) for i in u))
    return float((np.prod(1.0 + d[u]) - 1.0) / D)


# ---------------------------------------------------------------------------
# beam
# ---------------------------------------------------------------------------

def beam_deflection(b, h, L, E, P):
    """Midspan deflection ``P L^3 / (4 E b h^3)`` (SI units in, metres out)."""
    args = [np.asarray(a, dtype=float) for a in (b, h, L, E, P)]
    if any(np.any(a <= 0) for a in args):
        raise InvalidParameter("beam parameters must be > 0")
    b, h, L, E, P = args
    return P * L**3 / (4.0 * E * b * h**3)


def beam_input_model():
    return InputModel([
        Marginal.lognormal(0.15, 0.05, "b"),
        Marginal.lognormal(0.3, 0.05, "h"),
        Marginal.lognormal(5.0, 0.01, "L"),
        Marginal.lognormal(3.0e10, 0.15, "E"),
        Marginal.lognormal(1.0e4, 0.20, "P"),
    ])


def beam_exact_moments(input_model: InputModel | None = None):
    """Exact (mean, std) of the deflection in metres; the response is lognormal."""
    im = input_model or beam_input_model()
    if im.dim != 5 or any(m.family != "lognormal" for m in im):
        raise InvalidParameter("beam moments need five lognormal marginals (b, h, L, E, P)")
    (lb, zb), (lh, zh), (lL, zL), (lE, zE), (lP, zP) = (m.params for m in im)
    lam = lP + 3 * lL - lE - lb - 3 * lh - math.log(4.0)
    zeta2 = zP**2 + 9 * zL**2 + zE**2 + zb**2 + 9 * zh**2
    mean = math.exp(lam + zeta2 / 2)
    return mean, mean * math.sqrt(math.expm1(zeta2))


# ---------------------------------------------------------------------------
# 23-bar truss
# ---------------------------------------------------------------------------

TRUSS_BAY = 4.0
TRUSS_HEIGHT = 2.0


def truss_geometry(bay=TRUSS_BAY, height=TRUSS_HEIGHT):
    """Warren truss: 7 bottom-chord nodes, 6 top-chord nodes above bay midpoints.

    Returns ``(nodes, bars)`` where each bar is ``(node_a, node_b, group)``,
    group 1 for chord (horizontal) bars and 2 for diagonals.
    """
    bottom = [(k * bay, 0.0) for k in range(7)]
    top = [((k + 0.5) * bay, height) for k in range(6)]
    nodes = np.array(bottom + top)
    bars = [(k, k + 1, 1) for k in range(6)]
    bars += [(7 + k, 8 + k, 1) for k in range(5)]
    for k in range(6):
        bars += [(k, 7 + k, 2), (k + 1, 7 + k, 2)]
    return nodes, bars


@dataclass(frozen=True)
class _TrussOperators:
    K1: np.ndarray
    K2: np.ndarray
    free: np.ndarray
    load_dofs: np.ndarray
    out_dof: int


def _truss_operators():
    nodes, bars = truss_geometry()
    ndof = 2 * len(nodes)
    K = {1: np.zeros((ndof, ndof)), 2: np.zeros((ndof, ndof))}
    for a, b, g in bars:
        d = nodes[b] - nodes[a]
        length = float(np.hypot(*d))
        c, s = d / length
        e = np.array([-c, -s, c, s])
        dofs = [2 * a, 2 * a + 1, 2 * b, 2 * b + 1]
        K[g][np.ix_(dofs, dofs)] += np.outer(e, e) / length
    # pin at the left support, roller at the right support
    fixed = {0, 1, 2 * 6 + 1}
    free = np.array([i for i in range(ndof) if i not in fixed])
    load_dofs = np.array([2 * (7 + k) + 1 for k in range(6)])
    out_dof = 2 * 3 + 1
    return _TrussOperators(K[1], K[2], free, load_dofs, out_dof)


_TRUSS = _truss_operators()


def truss_stiffness(A1, A2, E1, E2):
    """Reduced stiffness matrices, shape (n, F, F)."""
    ea1 = np.atleast_1d(np.asarray(A1, float) * np.asarray(E1, float))
    ea2 = np.atleast_1d(np.asarray(A2, float) * np.asarray(E2, float))
    f = _TRUSS.free
    K1 = _TRUSS.K1[np.ix_(f, f)]
    K2 = _TRUSS.K2[np.ix_(f, f)]
    return ea1[:, None, None] * K1 + ea2[:, None, None] * K2


def truss_deflection(A1, A2, E1, E2, P1, P2, P3, P4, P5, P6, chunk=20_000):
    """Downward midspan deflection (metres) of the bottom chord; vectorized."""
    params = np.broadcast_arrays(*[np.atleast_1d(np.asarray(a, float)) for a in
                                   (A1, A2, E1, E2, P1, P2, P3, P4, P5, P6)])
    A1, A2, E1, E2 = params[:4]
    loads = np.column_stack(params[4:])
    if np.any(A1 <= 0) or np.any(A2 <= 0) or np.any(E1 <= 0) or np.any(E2 <= 0):
        raise SingularStiffness("bar areas and moduli must be > 0")
    n = A1.shape[0]
    f = _TRUSS.free
    pos = {d: i for i, d in enumerate(f)}
    load_rows = np.array([pos[d] for d in _TRUSS.load_dofs])
    out_row = pos[_TRUSS.out_dof]
    out = np.empty(n)
    for s in range(0, n, chunk):
        sl = slice(s, min(n, s + chunk))
        K = truss_stiffness(A1[sl], A2[sl], E1[sl], E2[sl])
        F = np.zeros((K.shape[0], len(f)))
        F[:, load_rows] = -loads[sl]
        try:
            u = np.linalg.solve(K, F[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise SingularStiffness(str(exc)) from exc
        out[sl] = -u[:, out_row]
    return out


def truss_input_model():
    marg = [
        Marginal.lognormal(2.0e-3, 0.10, "A1"),
        Marginal.lognormal(1.0e-3, 0.10, "A2"),
        Marginal.lognormal(2.1e11, 0.10, "E1"),
        Marginal.lognormal(2.1e11, 0.10, "E2"),
    ]
    marg += [Marginal.gumbel(5.0e4, 0.15, f"P{k}") for k in range(1, 7)]
    return InputModel(marg)


# ---------------------------------------------------------------------------
# EOLE random field
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    lower: float = -0.5
    upper: float = 0.5
    n_side: int = 11

    def points(self):
        g = np.linspace(self.lower, self.upper, self.n_side)
        xx, yy = np.meshgrid(g, g)
        return np.column_stack([xx.ravel(), yy.ravel()])


@dataclass(frozen=True)
class EOLEBasis:
    grid: np.ndarray  # (n, 2)
    length: float
    eigenvalues: np.ndarray  # retained, descending
    eigenvectors: np.ndarray  # (n, M)
    all_eigenvalues: np.ndarray

    @property
    def size(self):
        return self.eigenvalues.shape[0]


def gaussian_correlation(z1, z2, length):
    d2 = np.sum((np.asarray(z1)[:, None, :] - np.asarray(z2)[None, :, :]) ** 2, axis=-1)
    return np.exp(-d2 / length**2)


def eole_basis(grid=None, length=0.2, threshold=0.99):
    """Eigen-decomposition of the grid correlation matrix, truncated by explained variance."""
    pts = (grid or GridSpec()).points() if not isinstance(grid, np.ndarray) else grid
    if not length > 0:
        raise InvalidParameter("correlation length must be > 0")
    if not 0 < threshold < 1:
        raise InvalidParameter("threshold must lie in (0, 1)")
    if len(np.unique(pts, axis=0)) != len(pts):
        raise InvalidParameter("grid points must be distinct")
    C = gaussian_correlation(pts, pts, length)
    try:
        vals, vecs = np.linalg.eigh(C)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    vals, vecs = vals[::-1], vecs[:, ::-1]
    vals = np.where(vals > -1e-10, np.maximum(vals, 0.0), vals)
    if np.any(vals < 0):
        raise EigenFailure("correlation matrix has clearly negative eigenvalues")
    ratio = np.cumsum(vals) / np.sum(vals)
    m = int(np.searchsorted(ratio, threshold * (1 - 1e-15))) + 1
    return EOLEBasis(pts, length, vals[:m], vecs[:, :m], vals)


def eole_modes(basis: EOLEBasis, z):
    """Basis functions ``phi_i^T C_z / sqrt(l_i)`` at locations z, shape (n_z, M)."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    Cz = gaussian_correlation(z, basis.grid, basis.length)
    return Cz @ basis.eigenvectors / np.sqrt(basis.eigenvalues)


def eole_field_eval(basis: EOLEBasis, xi, z):
    """Gaussian field ``g_hat(z) = sum_i xi_i / sqrt(l_i) phi_i^T C_z``.

    ``xi`` may be (M,) or (n_draws, M); ``z`` (2,) or (n_z, 2).
    """
    xi = np.asarray(xi, dtype=float)
    modes = eole_modes(basis, z)
    out = np.atleast_2d(xi) @ modes.T
    if xi.ndim == 1:
        out = out[0]
    if np.asarray(z).ndim == 1:
        out = out[..., 0]
    return out


def conductivity_params(mean=1.0, std=0.3):
    """``(a, b)`` so that ``exp(a + b g)`` has the given mean and std for standard normal g."""
    return lognormal_params(mean, std / mean)


def conductivity(basis: EOLEBasis, xi, z, mean=1.0, std=0.3):
    a, b = conductivity_params(mean, std)
    return np.exp(a + b * eole_field_eval(basis, xi, z))


def eole_input_model(m=53):
    return InputModel([Marginal.gaussian(0.0, 1.0, f"xi{i + 1}") for i in range(m)])


# ---------------------------------------------------------------------------
# external models
# ---------------------------------------------------------------------------

class ExternalModel:
    """Black-box model run as a subprocess.

    Design points are written as CSV to the child's stdin (header ``x1..xM``);
    the child prints one response per line on stdout.
    """

    def __init__(self, command: str | Sequence[str], timeout: float | None = None):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.command:
            raise InvalidParameter("external model command is empty")
        self.timeout = timeout

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(x.shape[1])])
        for row in x:
            w.writerow([repr(float(v)) for v in row])
        try:
            proc = subprocess.run(self.command, input=buf.getvalue(), capture_output=True,
                                  text=True, timeout=self.timeout)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise ExternalModelError(f"cannot run {self.command[0]!r}: {exc}", stage="model.external") from exc
        if proc.returncode != 0:
            raise ExternalModelError(
                f"external model exited with {proc.returncode}: {proc.stderr.strip()[:500]}",
                stage="model.external",
            )
        lines = [ln for ln in proc.stdout.splitlines() if ln.strip()]
        if len(lines) != x.shape[0]:
            raise ExternalModelError(
                f"external model returned {len(lines)} responses for {x.shape[0]} points",
                stage="model.external",
            )
        try:
            return np.array([float(ln) for ln in lines])
        except ValueError as exc:
            raise ExternalModelError(f"unparseable response: {exc}", stage="model.external") from exc


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

@dataclass
class BenchmarkModel:
    name: str
    input_model: InputModel
    evaluator: Callable | None
    unit: str = ""
    description: str = ""
    reference: dict = field(default_factory=dict)

    def __call__(self, x):
        if self.evaluator is None:
            raise ExternalModelError(
                f"benchmark {self.name!r} has no built-in response; attach an external model",
                stage="model.benchmark",
            )
        return self.evaluator(np.atleast_2d(np.asarray(x, dtype=float)))


def _sobol_g():
    exact = sobol_function_exact_indices(SOBOL_G_C)
    im = InputModel([Marginal.uniform(0.0, 1.0, f"X{i + 1}") for i in range(len(SOBOL_G_C))])
    ref = {"kind": "exact", "mean": exact["mean"], "std": exact["std"],
           "first_order": exact["first_order"], "total": exact["total"]}
    return BenchmarkModel("sobol-g", im, lambda x: sobol_function(x, SOBOL_G_C), "",
                          "Sobol' g-function, M=20", ref)


def _beam():
    im = beam_input_model()
    mean, std = beam_exact_moments(im)
    ref = {
        "kind": "exact moments; MC reference indices (n=1e6)",
        "mean": mean * 1e3,
        "std": std * 1e3,
        "first_order": np.array([0.0282, 0.2499, 0.0105, 0.2479, 0.4383]),
        "total": np.array([0.0299, 0.2661, 0.0107, 0.2633, 0.4589]),
    }
    return BenchmarkModel("beam", im, lambda x: 1e3 * beam_deflection(*x.T), "mm",
                          "simply supported beam, midspan deflection", ref)


def _truss():
    im = truss_input_model()
    # A1 A2 E1 E2 P1..P6
    ref = {
        "kind": "MC reference (n=1e6)",
        "mean": 7.941,
        "std": 1.110,
        "first_order": np.array([0.3664, 0.0138, 0.3662, 0.0137, 0.0060, 0.0383, 0.0777, 0.0770, 0.0380, 0.0059]),
        "total": np.array([0.3712, 0.0126, 0.3696, 0.0126, 0.0047, 0.0374, 0.0776, 0.0773, 0.0374, 0.0048]),
    }
    return BenchmarkModel("truss", im, lambda x: 1e2 * truss_deflection(*x.T), "cm",
                          "23-bar Warren truss, midspan deflection", ref)


def _eole_field():
    basis = eole_basis()
    im = eole_input_model(basis.size)
    ref = {"kind": "EOLE truncation", "retained_terms": basis.size}
    return BenchmarkModel("eole-field", im, None, "",
                          "EOLE conductivity field (attach the thermal solver externally)", ref)


REGISTRY = {"sobol-g": _sobol_g, "beam": _beam, "truss": _truss, "eole-field": _eole_field}


def get_benchmark(name: str) -> BenchmarkModel:
    try:
        return REGISTRY[name]()
    except KeyError:
        raise InvalidParameter(f"unknown benchmark {name!r}; available: {', '.join(REGISTRY)}") from None


def all_subsets(dim):
    """Every non-empty subset of ``range(dim)``."""
    for k in range(1, dim + 1):
        yield from itertools.combinations(range(dim), k)
