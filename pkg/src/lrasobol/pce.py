"""Sparse polynomial chaos expansions by hybrid LAR, and their Sobol' indices."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InvalidParameter, NoFeasibleModel, SizeOverflow, ZeroVariance
from .input_model import InputModel
from .ortho_poly import Q_GRID, BasisSpec, design_matrix, truncation_set, univariate_table
from .regression import ErrorReport, empirical_variance, lar_path
from .sampling import ExperimentalDesign

log = logging.getLogger(__name__)

DEFAULT_PT_RANGE = tuple(range(1, 21))
DEFAULT_MAX_CANDIDATES = 10_000


@dataclass(frozen=True)
class PCEModel:
    input_model: InputModel
    families: tuple
    indices: np.ndarray  # (P, M) multi-indices, zero index first
    coefficients: np.ndarray  # (P,)
    errors: ErrorReport = field(default_factory=ErrorReport)
    total_degree: int | None = None
    q: float | None = None
    trace: list = field(default_factory=list)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int).reshape(len(self.coefficients), -1)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "coefficients", np.asarray(self.coefficients, dtype=float))
        if not np.all(np.isfinite(self.coefficients)):
            raise InvalidParameter("PCE coefficients must be finite")
        if idx.shape[1] != len(self.families):
            raise InvalidParameter("multi-index width does not match the number of families")

    @property
    def dim(self):
        return self.indices.shape[1]

    @property
    def basis_spec(self):
        return BasisSpec(self.families, tuple(self.indices.max(axis=0)))

    def scaled(self, factor):
        return replace(self, coefficients=self.coefficients * factor)

    def eval_standard(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return design_matrix(self.indices, u, self.families) @ self.coefficients

    def __call__(self, x):
        return pce_eval(self, x)


def pce_eval(model: PCEModel, x):
    """Evaluate at physical points, shape (M,) or (N, M)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    out = model.eval_standard(model.input_model.to_standard(np.atleast_2d(x)))
    return float(out[0]) if single else out


def pce_mean(model: PCEModel):
    zero = ~model.indices.any(axis=1)
    return float(model.coefficients[zero].sum())


def pce_variance(model: PCEModel):
    nonzero = model.indices.any(axis=1)
    return float(np.sum(model.coefficients[nonzero] ** 2))


def _subset_mask(u, dim):
    u = sorted(set(int(i) for i in u))
    if not u:
        raise InvalidParameter("index subset must be non-empty")
    if u[0] < 0 or u[-1] >= dim:
        raise InvalidParameter(f"index subset {u} out of range for M={dim}")
    mask = np.zeros(dim, dtype=bool)
    mask[u] = True
    return mask


def pce_sobol_first(model: PCEModel, u):
    """First-order (closed) index of the 0-based variable subset ``u``."""
    mask = _subset_mask(u, model.dim)
    var = pce_variance(model)
    if not var > 0:
        raise ZeroVariance("PCE has zero variance")
    nz = model.indices.any(axis=1)
    inside = ~model.indices[:, ~mask].any(axis=1)
    return float(np.sum(model.coefficients[nz & inside] ** 2) / var)


def pce_sobol_total(model: PCEModel, u):
    """Total index of the 0-based variable subset ``u``."""
    mask = _subset_mask(u, model.dim)
    var = pce_variance(model)
    if not var > 0:
        raise ZeroVariance("PCE has zero variance")
    touches = model.indices[:, mask].any(axis=1)
    return float(np.sum(model.coefficients[touches] ** 2) / var)


def pce_sobol_interaction(model: PCEModel, u):
    """Pure interaction index: terms whose active variables are exactly ``u``."""
    mask = _subset_mask(u, model.dim)
    var = pce_variance(model)
    if not var > 0:
        raise ZeroVariance("PCE has zero variance")
    sel = np.all((model.indices > 0) == mask, axis=1)
    return float(np.sum(model.coefficients[sel] ** 2) / var)


@dataclass
class _Candidate:
    score: float
    n_terms: int
    total_degree: int
    q: float
    indices: np.ndarray
    coefficients: np.ndarray
    errors: ErrorReport

    def key(self):
        return (self.score, self.n_terms, self.total_degree, -self.q)


def hybrid_lar_fit(psi, y, trace_scaling="unscaled"):
    """Hybrid LAR on a candidate matrix whose column 0 is the constant term.

    LAR orders the non-constant columns; each nested set (always including the
    constant) is refit by OLS and scored by the corrected LOO error. All nested
    fits share one QR factorization of the columns in LAR order.

    Returns ``(selected_columns, coefficients, ErrorReport)``.
    """
    n, p = psi.shape
    var = empirical_variance(y)
    max_steps = min(n - 2, p - 1)
    order = [0]
    if max_steps > 0:
        path = lar_path(psi[:, 1:], y, max_steps, on_breakdown="truncate")
        if path:
            order += [j + 1 for j in path[-1]]
    cols = np.asarray(order)
    q, r = np.linalg.qr(psi[:, cols])
    diag = np.abs(np.diag(r))
    ok = diag > 1e-10 * diag[0] * np.sqrt(n)
    kmax = int(np.argmin(ok)) if not ok.all() else len(cols)
    q, r, cols = q[:, :kmax], r[:kmax, :kmax], cols[:kmax]
    qy = q.T @ y
    fitted = np.cumsum(q * qy, axis=1)
    resid = y[:, None] - fitted
    lev = np.cumsum(q * q, axis=1)
    rinv = solve_triangular(r, np.eye(kmax))
    trace = np.cumsum(np.sum(rinv**2, axis=0))
    if trace_scaling == "normalized":
        trace = trace * n
    k = np.arange(1, kmax + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        loo = np.mean((resid / (1.0 - lev)) ** 2, axis=0) / var
        loo = np.where(np.all(lev < 1.0 - 1e-12, axis=0) & (k < n), loo, np.inf)
        corrected = loo / (1.0 - k / n) * (1.0 + trace)
    corrected = np.where(np.isfinite(corrected), corrected, np.inf)
    best = int(np.argmin(corrected))
    if not np.isfinite(corrected[best]):
        raise NoFeasibleModel("no nested LAR set gives a finite corrected LOO error")
    coef = solve_triangular(r[: best + 1, : best + 1], qy[: best + 1])
    report = ErrorReport(
        err_empirical_rel=float(np.mean(resid[:, best] ** 2) / var),
        err_loo_rel=float(loo[best]),
        err_loo_corrected_rel=float(corrected[best]),
    )
    return cols[: best + 1], coef, report


def build_pce(
    ed: ExperimentalDesign,
    input_model: InputModel,
    pt_range=DEFAULT_PT_RANGE,
    q_set=Q_GRID,
    max_candidates=DEFAULT_MAX_CANDIDATES,
    patience=2,
    trace_scaling="unscaled",
):
    """Sparse PCE with (total degree, q) chosen by the corrected LOO error.

    For each q the total degree increases through ``pt_range`` until the
    candidate basis would exceed ``max_candidates`` terms or the error has
    worsened ``patience`` times in a row.
    """
    if ed.responses is None:
        raise InvalidParameter("experimental design has no responses", stage="pce.build")
    pt_range = list(pt_range)
    if not pt_range:
        raise InvalidParameter("p_t range must be non-empty", stage="pce.build")
    y = ed.responses
    u = ed.points_standard
    families = tuple(input_model.standard_families)
    n, dim = u.shape
    try:
        var = empirical_variance(y)
    except ZeroVariance:
        var = 0.0
    if var == 0.0:
        coef = np.array([float(np.mean(y))])
        return PCEModel(input_model, families, np.zeros((1, dim), int), coef,
                        ErrorReport(0.0, 0.0, 0.0), 0, 1.0, [])
    max_deg = max(pt_range)
    tables = [univariate_table(f, u[:, i], max_deg) for i, f in enumerate(families)]
    best = None
    trace = []
    for q in q_set:
        worse = 0
        prev = np.inf
        for pt in pt_range:
            try:
                idx = truncation_set(dim, pt, q, cap=max_candidates)
            except SizeOverflow:
                break
            if len(idx) > max_candidates:
                break
            psi = design_matrix(idx, u, families, tables)
            try:
                cols, coef, report = hybrid_lar_fit(psi, y, trace_scaling)
            except NoFeasibleModel:
                continue
            cand = _Candidate(report.err_loo_corrected_rel, len(cols), pt, q, idx[cols], coef, report)
            trace.append({"q": q, "total_degree": pt, "n_candidates": len(idx),
                          "n_terms": len(cols), "err_loo_corrected_rel": cand.score})
            log.debug("pce q=%.2f pt=%d P=%d |A|=%d err*=%.3e", q, pt, len(idx), len(cols), cand.score)
            if best is None or cand.key() < best.key():
                best = cand
            if cand.score >= prev:
                worse += 1
                if worse >= patience:
                    break
            else:
                worse = 0
            prev = min(prev, cand.score)
    if best is None:
        raise NoFeasibleModel("every (p_t, q) candidate failed", stage="pce.build")
    return PCEModel(input_model, families, best.indices, best.coefficients, best.errors,
                    best.total_degree, best.q, trace)
