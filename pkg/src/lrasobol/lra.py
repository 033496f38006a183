"""Canonical low-rank approximations with polynomial bases.

The model is ``sum_l b_l prod_i v_l^(i)(u_i)`` where each univariate factor
``v_l^(i) = sum_k z[l, i, k] P_k^(i)`` is expanded on an orthonormal family.
Construction is greedy: a correction step fits a new rank-one term to the
current residual by alternated least squares (one dimension at a time, the
others frozen), then an updating step refits all weights ``b``. The rank is
picked by 3-fold cross-validation, the common degree by :func:`select_degree`.

Moments and Sobol' indices follow in closed form from orthonormality:
``E[v_l] = z[l, i, 0]`` and ``E[v_l v_l'] = <z[l, i], z[l', i]>``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    AllRanksFailed,
    CollinearRankOneTerms,
    InvalidParameter,
    LraSobolError,
    NegativeVariance,
    NonDecreasingGuard,
    RankDeficient,
    SubsetTooLarge,
    UnderDetermined,
    ZeroVariance,
)
from .input_model import InputModel
from .ortho_poly import BasisSpec, univariate_table
from .regression import ErrorReport, empirical_variance, kfold_partition, ols_solve
from .sampling import ExperimentalDesign

log = logging.getLogger(__name__)

I_MAX = 50
DELTA_ERR_MIN = 1e-6
R_MAX = 10
CV_FOLDS = 3
DEGREE_GRID = tuple(range(1, 16))
# errors below this are numerically indistinguishable when selecting rank/degree
SELECTION_FLOOR = 1e-12
_DEGENERATE = 1e-14
_MAX_SUBSET = 12


@dataclass(frozen=True)
class LRAModel:
    input_model: InputModel
    families: tuple
    degree: int
    b: np.ndarray  # (R,)
    z: np.ndarray  # (R, M, p + 1)
    errors: ErrorReport = field(default_factory=ErrorReport)
    rank_trace: list = field(default_factory=list)
    degree_trace: list = field(default_factory=list)

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float).reshape(-1)
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 3 or z.shape[0] != b.shape[0]:
            raise InvalidParameter("z must have shape (R, M, p + 1) matching len(b)")
        if z.shape[1] != len(self.families) or z.shape[2] != self.degree + 1:
            raise InvalidParameter("z shape does not match families / degree")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(z))):
            raise InvalidParameter("LRA coefficients must be finite")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "families", tuple(self.families))

    @property
    def rank(self):
        return self.b.shape[0]

    @property
    def dim(self):
        return self.z.shape[1]

    @property
    def basis_spec(self):
        return BasisSpec.uniform_degree(self.families, self.degree)

    def truncate(self, rank):
        return replace(self, b=self.b[:rank], z=self.z[:rank])

    def eval_standard(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        tables = self.basis_spec.tables(u)
        return rank_one_values(self.z, tables) @ self.b

    def __call__(self, x):
        return lra_eval(self, x)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def rank_one_values(z, tables):
    """Values of rank-one terms at the ED, shape (N, R) for z of shape (R, M, p+1)."""
    z = np.asarray(z, dtype=float)
    if z.ndim == 2:
        z = z[None]
    out = np.ones((tables[0].shape[0], z.shape[0]))
    for i, tab in enumerate(tables):
        out *= tab @ z[:, i, :].T
    return out


def rank_one_eval(z_l, u, families):
    """``prod_i sum_k z_l[i, k] P_k^(i)(u_i)`` at standardized point(s) ``u``."""
    z_l = np.asarray(z_l, dtype=float)
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    spec = BasisSpec.uniform_degree(families, z_l.shape[1] - 1)
    val = rank_one_values(z_l, spec.tables(np.atleast_2d(u)))[:, 0]
    return float(val[0]) if single else val


def lra_eval(model: LRAModel, x):
    """Evaluate at physical point(s)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    out = model.eval_standard(model.input_model.to_standard(np.atleast_2d(x)))
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def basis_tables(u, families, degree):
    u = np.atleast_2d(u)
    return [univariate_table(f, u[:, i], degree) for i, f in enumerate(families)]


def correction_step(residual, tables, i_max=I_MAX, delta_err_min=DELTA_ERR_MIN, var_y=None):
    """Fit one rank-one term to ``residual`` by alternated least squares.

    ``tables[i]`` holds the (N, p_i + 1) polynomial values of dimension i at
    the ED. Every factor starts at the constant 1 and dimensions are updated in
    ascending order each sweep. Stops after ``i_max`` sweeps or once the
    relative empirical error ``||residual - w||^2 / var_y`` decreases by less
    than ``delta_err_min`` between sweeps.

    Returns ``(z, iterations, err)`` with ``z`` a list of per-dimension
    coefficient vectors; ``z`` is all zeros if the term degenerates.
    """
    residual = np.asarray(residual, dtype=float)
    n = residual.shape[0]
    dim = len(tables)
    for i, tab in enumerate(tables):
        if n <= tab.shape[1]:
            raise UnderDetermined(
                f"{n} design points for {tab.shape[1]} coefficients in dimension {i + 1}",
                stage="lra.correction_step",
            )
    if var_y is None:
        var_y = empirical_variance(residual)
    z = []
    v = np.ones((dim, n))
    for tab in tables:
        e0 = np.zeros(tab.shape[1])
        e0[0] = 1.0
        z.append(e0)
    err = np.inf
    iters = 0
    while iters < i_max:
        iters += 1
        for j in range(dim):
            w = np.prod(np.delete(v, j, axis=0), axis=0) if dim > 1 else np.ones(n)
            if not np.any(w):
                return [np.zeros_like(zz) for zz in z], iters, float(np.mean(residual**2) / var_y)
            try:
                z[j] = ols_solve(tables[j] * w[:, None], residual)
            except RankDeficient as exc:
                raise RankDeficient(f"dimension {j + 1}: {exc}", stage="lra.correction_step") from exc
            v[j] = tables[j] @ z[j]
        new_err = float(np.mean((residual - np.prod(v, axis=0)) ** 2) / var_y)
        if new_err > 1.1 * err + 1e-12:
            raise NonDecreasingGuard(
                f"ALS error rose from {err:.3e} to {new_err:.3e} at sweep {iters}",
                stage="lra.correction_step",
            )
        delta = err - new_err
        err = new_err
        if dim == 1 or delta < delta_err_min:
            break
    return z, iters, err


def updating_step(w_values, y):
    """Least-squares weights ``b`` of the responses on the rank-one term values."""
    try:
        return ols_solve(np.asarray(w_values, dtype=float), y)
    except RankDeficient as exc:
        raise CollinearRankOneTerms(str(exc), stage="lra.updating_step") from exc


def _normalize(z):
    z = np.array(z, dtype=float)
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    return z / np.where(norms > 0, norms, 1.0)


def greedy_construction(tables, y, r_max, i_max=I_MAX, delta_err_min=DELTA_ERR_MIN):
    """Run correction/updating pairs for r = 1..r_max.

    Returns ``(Z, bs)``: ``Z`` of shape (r_built, M, p+1) and ``bs[r-1]`` the
    weights of the rank-r approximation. Construction stops early when a new
    term is numerically zero or collinear with the previous ones.
    """
    y = np.asarray(y, dtype=float)
    var_y = empirical_variance(y)
    scale = np.sqrt(np.mean(y**2))
    residual = y.copy()
    Z = []
    bs = []
    W = np.empty((y.shape[0], 0))
    for r in range(1, r_max + 1):
        try:
            z, iters, err = correction_step(residual, tables, i_max, delta_err_min, var_y)
        except LraSobolError as exc:
            if r == 1:
                raise
            log.debug("rank %d correction failed (%s); stopping at rank %d", r, exc, r - 1)
            break
        z = np.array(z)
        w = rank_one_values(z, tables)[:, 0]
        if np.sqrt(np.mean(w**2)) < _DEGENERATE * scale:
            if r == 1:
                raise AllRanksFailed("first rank-one term is numerically zero", stage="lra.correction_step")
            log.debug("rank %d term is numerically zero; stopping", r)
            break
        z = _normalize(z)
        w = rank_one_values(z, tables)[:, 0]
        W_new = np.column_stack([W, w])
        try:
            b = updating_step(W_new, y)
        except CollinearRankOneTerms:
            if r == 1:
                raise
            log.debug("rank %d term collinear with previous ones; stopping", r)
            break
        W = W_new
        Z.append(z)
        bs.append(b)
        residual = y - W @ b
        log.debug("rank %d: %d sweeps, err_r=%.3e", r, iters, err)
    return np.array(Z), bs


def _cv_rank_errors(tables, y, r_max, folds, i_max, delta_err_min):
    n = y.shape[0]
    var = empirical_variance(y)
    errs = np.full((len(folds), r_max), np.inf)
    for f, test in enumerate(folds):
        train = np.setdiff1d(np.arange(n), test)
        tr_tables = [t[train] for t in tables]
        te_tables = [t[test] for t in tables]
        try:
            Z, bs = greedy_construction(tr_tables, y[train], r_max, i_max, delta_err_min)
        except LraSobolError as exc:
            exc.stage = exc.stage or "lra.cross_validation"
            raise type(exc)(f"fold {f}: {exc.args[0] if exc.args else exc}", stage=exc.stage) from exc
        W = rank_one_values(Z, te_tables)
        for r, b in enumerate(bs, start=1):
            errs[f, r - 1] = np.mean((y[test] - W[:, :r] @ b) ** 2) / var
    return errs.mean(axis=0)


def _argmin_floor(values):
    vals = np.maximum(np.asarray(values, dtype=float), SELECTION_FLOOR)
    return int(np.argmin(vals))


def build_lra(
    ed: ExperimentalDesign,
    input_model: InputModel,
    degree,
    r_max=R_MAX,
    i_max=I_MAX,
    delta_err_min=DELTA_ERR_MIN,
    cv_seed=0,
    n_folds=CV_FOLDS,
):
    """LRA of common polynomial degree with rank chosen by k-fold CV.

    Each fold reruns the greedy construction on its training part and scores
    every candidate rank on the held-out part; the selected rank (smallest on
    ties) is then refit on the full ED.
    """
    if ed.responses is None:
        raise InvalidParameter("experimental design has no responses", stage="lra.build")
    if r_max < 1:
        raise InvalidParameter("r_max must be >= 1", stage="lra.build")
    y = np.asarray(ed.responses, dtype=float)
    n = y.shape[0]
    if n <= degree + 1:
        raise UnderDetermined(f"{n} design points for degree {degree}", stage="lra.correction_step")
    families = tuple(input_model.standard_families)
    try:
        var = empirical_variance(y)
    except ZeroVariance:
        var = 0.0
    if var == 0.0:
        z = np.zeros((1, len(families), degree + 1))
        z[0, :, 0] = 1.0
        return LRAModel(input_model, families, degree, [float(np.mean(y))], z,
                        ErrorReport(err_empirical_rel=0.0, err_cv_k_rel=0.0), [0.0])
    tables = basis_tables(ed.points_standard, families, degree)
    folds = kfold_partition(n, n_folds, cv_seed)
    cv = _cv_rank_errors(tables, y, r_max, folds, i_max, delta_err_min)
    if not np.any(np.isfinite(cv)):
        raise AllRanksFailed("no candidate rank could be cross-validated", stage="lra.build")
    rank = _argmin_floor(cv) + 1
    Z, bs = greedy_construction(tables, y, rank, i_max, delta_err_min)
    rank = len(bs)
    b = bs[-1]
    pred = rank_one_values(Z, tables) @ b
    report = ErrorReport(
        err_empirical_rel=float(np.mean((y - pred) ** 2) / var),
        err_cv_k_rel=float(cv[rank - 1]),
    )
    return LRAModel(input_model, families, degree, b, Z, report, [float(e) for e in cv])


def select_degree(
    ed: ExperimentalDesign,
    input_model: InputModel,
    degree_grid=DEGREE_GRID,
    r_max=R_MAX,
    cv_seed=0,
    **kwargs,
):
    """Build one LRA per common degree and keep the one with the lowest CV error."""
    degree_grid = list(degree_grid)
    if not degree_grid:
        raise InvalidParameter("degree grid must be non-empty", stage="lra.select_degree")
    n = ed.size
    models = []
    for p in degree_grid:
        if n <= p + 1 and models:
            break
        m = build_lra(ed, input_model, p, r_max, cv_seed=cv_seed, **kwargs)
        log.info("lra p=%d R=%d err_cv=%.3e", p, m.rank, m.errors.err_cv_k_rel)
        models.append(m)
    scores = [m.errors.err_cv_k_rel for m in models]
    best = models[_argmin_floor(scores)]
    trace = [{"degree": m.degree, "rank": m.rank, "err_cv_k_rel": m.errors.err_cv_k_rel} for m in models]
    return best.degree, replace(best, degree_trace=trace)


# ---------------------------------------------------------------------------
# closed-form moments and indices
# ---------------------------------------------------------------------------

def _gram(model: LRAModel):
    """Per-dimension R x R matrices of E[v_l v_l'] and E[v_l] E[v_l']."""
    z = model.z
    G = np.einsum("lik,mik->ilm", z, z)
    z0 = z[:, :, 0]
    Z0 = np.einsum("li,mi->ilm", z0, z0)
    return G, Z0


def _mixed_second_moment(model: LRAModel, inside):
    """``sum_ll' b_l b_l' prod_{i in inside} E[v v'] prod_{j not inside} E[v] E[v']``."""
    G, Z0 = _gram(model)
    inside = np.asarray(inside, dtype=bool)
    prod = np.prod(np.where(inside[:, None, None], G, Z0), axis=0)
    return float(model.b @ prod @ model.b)


def lra_mean(model: LRAModel):
    return float(model.b @ np.prod(model.z[:, :, 0], axis=1))


def lra_variance(model: LRAModel):
    G, Z0 = _gram(model)
    var = float(model.b @ (np.prod(G, axis=0) - np.prod(Z0, axis=0)) @ model.b)
    mean = lra_mean(model)
    if var < -1e-10 * (mean**2 + 1.0):
        raise NegativeVariance(f"LRA variance is {var:.3e}")
    return max(var, 0.0)


def _mask(u, dim):
    u = sorted(set(int(i) for i in u))
    if not u:
        raise InvalidParameter("index subset must be non-empty")
    if u[0] < 0 or u[-1] >= dim:
        raise InvalidParameter(f"index subset {u} out of range for M={dim}")
    mask = np.zeros(dim, dtype=bool)
    mask[u] = True
    return mask


def lra_sobol_first(model: LRAModel, u):
    """Closed first-order index of the 0-based subset ``u``."""
    mask = _mask(u, model.dim)
    var = lra_variance(model)
    if not var > 0:
        raise ZeroVariance("LRA has zero variance")
    mean = lra_mean(model)
    return (_mixed_second_moment(model, mask) - mean**2) / var


def lra_sobol_total(model: LRAModel, u):
    """Total index of ``u`` from the conditional second moment given the complement."""
    mask = _mask(u, model.dim)
    var = lra_variance(model)
    if not var > 0:
        raise ZeroVariance("LRA has zero variance")
    mean = lra_mean(model)
    # complement conditioned: E[v] over u, E[v v'] over the rest
    return 1.0 - (_mixed_second_moment(model, ~mask) - mean**2) / var


def lra_sobol_interaction(model: LRAModel, u):
    """Pure interaction index ``S_u`` by inclusion-exclusion over subsets of ``u``."""
    u = sorted(set(int(i) for i in u))
    if len(u) > _MAX_SUBSET:
        raise SubsetTooLarge(f"|u| = {len(u)} exceeds {_MAX_SUBSET}")
    _mask(u, model.dim)
    total = 0.0
    for k in range(1, len(u) + 1):
        sign = (-1) ** (len(u) - k)
        for v in itertools.combinations(u, k):
            total += sign * lra_sobol_first(model, v)
    return total


def to_pce(model: LRAModel):
    """Expand into the full tensor-product PCE with ``y_a = sum_l b_l prod_i z[l, i, a_i]``.

    Only practical for small M; used as a cross-check of the closed forms.
    """
    from .pce import PCEModel

    dim, p = model.dim, model.degree
    idx = np.array(list(itertools.product(range(p + 1), repeat=dim)), dtype=int)
    idx = idx[np.lexsort(tuple(idx[:, i] for i in reversed(range(dim))) + (idx.sum(axis=1),))]
    coef = np.zeros(len(idx))
    for l in range(model.rank):
        term = np.full(len(idx), model.b[l])
        for i in range(dim):
            term *= model.z[l, i, idx[:, i]]
        coef += term
    return PCEModel(model.input_model, model.families, idx, coef)
