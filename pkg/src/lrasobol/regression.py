"""Least-squares machinery shared by the PCE and LRA builders.

Relative errors are normalized by the unbiased (``ddof=1``) empirical variance
of the response set they refer to.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    EmptySet,
    FitFailure,
    InvalidParameter,
    LeverageOne,
    LraSobolError,
    NumericalBreakdown,
    RankDeficient,
    UnderDetermined,
    ZeroVariance,
)

COND_LIMIT = 1e12
LEVERAGE_TOL = 1e-12


@dataclass
class ErrorReport:
    err_empirical_rel: float | None = None
    err_loo_rel: float | None = None
    err_loo_corrected_rel: float | None = None
    err_cv_k_rel: float | None = None
    err_generalization_rel: float | None = None

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: (None if v is None else float(v)) for k, v in d.items()})


def ols_solve(A, y, cond_limit=COND_LIMIT):
    """Least-squares coefficients of ``y`` on the columns of ``A``.

    Solved through an SVD so the condition number comes for free; raises
    :class:`RankDeficient` when it exceeds ``cond_limit``.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.ndim != 2:
        raise InvalidParameter("design matrix must be 2-D")
    n, p = A.shape
    if n < p:
        raise UnderDetermined(f"{n} rows for {p} unknowns")
    coef, _, _, sv = np.linalg.lstsq(A, y, rcond=None)
    if sv.size == 0 or sv[-1] <= sv[0] / cond_limit:
        cond = np.inf if sv.size == 0 or sv[-1] == 0 else sv[0] / sv[-1]
        raise RankDeficient(f"design matrix condition number {cond:.3g} exceeds {cond_limit:.1g}")
    return coef


def semi_norm(values):
    """Discrete L2 semi-norm ``sqrt(mean(a**2))``."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise EmptySet("semi-norm of an empty set")
    return float(np.sqrt(np.mean(values**2)))


def empirical_variance(y):
    y = np.asarray(y, dtype=float)
    if y.size < 2:
        raise ZeroVariance("empirical variance needs at least two responses")
    var = float(np.var(y, ddof=1))
    # rounding noise of a constant vector is not variance
    floor = (64 * np.finfo(float).eps * float(np.max(np.abs(y)))) ** 2
    if not var > floor:
        raise ZeroVariance("responses have zero empirical variance")
    return var


def empirical_error_rel(predictions, y):
    """Relative empirical error ``||y - y_hat||^2 / Var[y]`` over the ED."""
    y = np.asarray(y, dtype=float)
    return semi_norm(y - np.asarray(predictions, dtype=float)) ** 2 / empirical_variance(y)


def generalization_error_rel(predictions, y_val):
    """Relative error on a validation set with known true responses."""
    return empirical_error_rel(predictions, y_val)


def hat_diagonal(A):
    """Leverages ``diag(A (A^T A)^-1 A^T)`` as squared row norms of the thin Q factor."""
    q, _ = np.linalg.qr(np.asarray(A, dtype=float))
    return np.einsum("ij,ij->i", q, q)


def loo_error(A, y, h_diag=None, coef=None, relative=False):
    """Leave-one-out error from a single fit, ``mean(((y - y_hat) / (1 - h))**2)``."""
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if coef is None:
        coef = ols_solve(A, y)
    if h_diag is None:
        h_diag = hat_diagonal(A)
    if np.any(h_diag >= 1.0 - LEVERAGE_TOL):
        raise LeverageOne("a design point has unit leverage; leave-one-out is undefined")
    err = float(np.mean(((y - A @ coef) / (1.0 - h_diag)) ** 2))
    if relative:
        return err / empirical_variance(y)
    return err


def info_trace(A, scaling="unscaled"):
    """``tr((A^T A)^-1)``, or ``tr((A^T A / N)^-1)`` when ``scaling='normalized'``."""
    A = np.asarray(A, dtype=float)
    _, r = np.linalg.qr(A)
    rinv = solve_triangular(r, np.eye(r.shape[0]))
    tr = float(np.sum(rinv**2))
    if scaling == "normalized":
        return tr * A.shape[0]
    if scaling != "unscaled":
        raise InvalidParameter(f"unknown trace scaling {scaling!r}")
    return tr


def corrected_loo(err_loo_rel, n, p, A, scaling="unscaled"):
    """Finite-sample corrected LOO error ``err * (1 - P/N)^-1 * (1 + tr((A^T A)^-1))``."""
    if n <= p:
        raise UnderDetermined(f"corrected LOO needs N > P, got N={n}, P={p}")
    return err_loo_rel / (1.0 - p / n) * (1.0 + info_trace(A, scaling))


def kfold_partition(n, k, seed=0):
    """Shuffle ``range(n)`` with ``seed`` and deal the indices round-robin into k folds."""
    if not (2 <= k <= n):
        raise InvalidParameter(f"k-fold needs 2 <= k <= N, got k={k}, N={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(perm[i::k]) for i in range(k)]


def kfold_cv(fit: Callable, X, y, k, seed=0, folds=None):
    """Relative k-fold cross-validation error.

    ``fit(X_train, y_train)`` must return a predictor ``X_test -> y_hat``. The
    squared error on each held-out fold is normalized by the empirical variance
    of the full response set, so ``k = N`` reproduces the relative LOO error.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    var = empirical_variance(y)
    if folds is None:
        folds = kfold_partition(n, k, seed)
    errs = []
    for i, test in enumerate(folds):
        train = np.setdiff1d(np.arange(n), test)
        try:
            predict = fit(X[train], y[train])
            pred = np.asarray(predict(X[test]), dtype=float)
        except LraSobolError as exc:
            raise FitFailure(f"fold {i}: {exc}", stage=exc.stage, fold=i) from exc
        errs.append(np.mean((y[test] - pred) ** 2) / var)
    return float(np.mean(errs))


def lar_path(A, y, max_steps=None, on_breakdown="raise"):
    """Least-angle regression ordering of the columns of ``A``.

    Columns are centered and scaled to unit norm internally (the intercept is
    handled separately); constant columns are never selected. Returns the
    nested active sets, ``path[k]`` being the columns active after k + 1 steps.
    With ``on_breakdown='truncate'`` a degenerate equiangular direction ends the
    path instead of raising :class:`NumericalBreakdown`.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = A.shape
    if max_steps is None:
        max_steps = min(n - 1, p)
    if max_steps > min(n - 1, p):
        raise InvalidParameter(f"max_steps must be <= min(N - 1, P) = {min(n - 1, p)}")
    if max_steps <= 0:
        return []
    Xc = A - A.mean(axis=0)
    norms = np.linalg.norm(Xc, axis=0)
    usable = norms > 1e-12 * max(1.0, float(norms.max(initial=0.0)))
    X = np.zeros_like(Xc)
    X[:, usable] = Xc[:, usable] / norms[usable]
    r = y - y.mean()
    c = X.T @ r
    inactive = usable.copy()
    active: list[int] = []
    signs: list[float] = []
    L = np.zeros((max_steps, max_steps))
    path = []

    def breakdown(msg):
        if on_breakdown == "truncate":
            return path
        raise NumericalBreakdown(msg)

    if not np.any(inactive):
        return path
    j = int(np.argmax(np.where(inactive, np.abs(c), -np.inf)))
    for step in range(max_steps):
        # append column j to the signed Cholesky factor
        s = 1.0 if c[j] >= 0 else -1.0
        xj = s * X[:, j]
        k = len(active)
        if k:
            g = (X[:, active] * signs).T @ xj
            l = solve_triangular(L[:k, :k], g, lower=True)
            d2 = 1.0 - l @ l
        else:
            l = np.empty(0)
            d2 = 1.0
        if d2 <= 1e-10:
            return breakdown(f"column {j} is collinear with the active set at step {step}")
        L[k, :k] = l
        L[k, k] = np.sqrt(d2)
        active.append(j)
        signs.append(s)
        inactive[j] = False
        path.append(list(active))
        if step == max_steps - 1:
            break
        k += 1
        ones = np.ones(k)
        tmp = solve_triangular(L[:k, :k], ones, lower=True)
        ginv1 = solve_triangular(L[:k, :k].T, tmp, lower=False)
        denom = ones @ ginv1
        if not denom > 0:
            return breakdown("degenerate equiangular direction")
        AA = denom**-0.5
        w = AA * ginv1 * np.asarray(signs)
        u = X[:, active] @ w
        a = X.T @ u
        C = np.max(np.abs(c[active]))
        if not np.any(inactive):
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            g1 = (C - c) / (AA - a)
            g2 = (C + c) / (AA + a)
        g1 = np.where(inactive & (g1 > 1e-14), g1, np.inf)
        g2 = np.where(inactive & (g2 > 1e-14), g2, np.inf)
        gam = np.minimum(g1, g2)
        j = int(np.argmin(gam))
        gamma = gam[j]
        if not np.isfinite(gamma):
            return breakdown("no admissible step length for the next predictor")
        c = c - gamma * a
    return path
