"""Model-agnostic Sobol' machinery: MC moments, pick-freeze indices, Spearman, reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import InvalidParameter, LraSobolError, ModelFailure, ZeroRankVariance, ZeroVariance
from .input_model import InputModel

METHODS = ("LRA-analytic", "PCE-analytic", "MC-pick-freeze", "exact-benchmark")


@dataclass
class SensitivityReport:
    """Moments and per-variable indices from one method."""

    names: list
    first_order: np.ndarray
    total: np.ndarray
    method: str
    mean: float | None = None
    variance: float | None = None
    size: int | None = None
    subsets: dict = field(default_factory=dict)  # tuple(u) -> (first, total)
    first_order_se: np.ndarray | None = None
    total_se: np.ndarray | None = None

    def __post_init__(self):
        self.first_order = np.asarray(self.first_order, dtype=float)
        self.total = np.asarray(self.total, dtype=float)
        if self.method not in METHODS:
            raise InvalidParameter(f"unknown method tag {self.method!r}")

    @property
    def std(self):
        return None if self.variance is None else float(np.sqrt(self.variance))


def _evaluate(model_eval, x, stage):
    try:
        y = np.asarray(model_eval(x), dtype=float).reshape(-1)
    except LraSobolError:
        raise
    except Exception as exc:
        raise ModelFailure(f"model evaluation failed: {exc}", stage=stage) from exc
    if y.shape[0] != x.shape[0]:
        raise ModelFailure(f"model returned {y.shape[0]} values for {x.shape[0]} points", stage=stage)
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        raise ModelFailure(f"non-finite response at point {bad[0]}", stage=stage, index=int(bad[0]))
    return y


def _streams(seed):
    base, redraw = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(base), np.random.default_rng(redraw)


def mc_moments(model_eval: Callable, input_model: InputModel, n, seed=0, batch=100_000):
    """Sample mean, unbiased variance and standard error of the mean."""
    if n < 2:
        raise InvalidParameter("mc_moments needs n >= 2")
    rng, _ = _streams(seed)
    ys = []
    done = 0
    while done < n:
        m = min(batch, n - done)
        x = input_model.from_unit(rng.random((m, input_model.dim)))
        ys.append(_evaluate(model_eval, x, "sobol.mc_moments"))
        done += m
    y = np.concatenate(ys)
    var = float(np.var(y, ddof=1))
    return float(np.mean(y)), var, float(np.sqrt(var / n))


class PickFreeze(NamedTuple):
    first_order: float
    total: float
    first_order_se: float
    total_se: float


def _paired_estimate(y, yp):
    """Correlated-pair first-order estimate and its delta-method standard error."""
    n = y.shape[0]
    m = np.mean((y + yp) / 2)
    a = np.mean(y * yp)
    b = np.mean((y * y + yp * yp) / 2)
    den = b - m * m
    if not den > 0:
        raise ZeroVariance("pick-freeze sample has zero variance")
    est = (a - m * m) / den
    ga = 1.0 / den
    gb = -(a - m * m) / den**2
    gm = 2 * m * (a - b) / den**2
    psi = ga * (y * yp - a) + gb * ((y * y + yp * yp) / 2 - b) + gm * ((y + yp) / 2 - m)
    return float(est), float(np.std(psi, ddof=1) / np.sqrt(n))


def pick_freeze_samples(input_model: InputModel, n, seed=0):
    """Base and redraw unit-space blocks from two disjoint seed-derived streams."""
    rng_a, rng_b = _streams(seed)
    return rng_a.random((n, input_model.dim)), rng_b.random((n, input_model.dim))


def pick_freeze_indices(model_eval: Callable, input_model: InputModel, n, u, seed=0, _cache=None):
    """First-order and total index of the 0-based subset ``u`` by pick-freeze MC.

    The first-order index uses pairs sharing ``X_u``; the total index is one
    minus the first-order index of the complement, from pairs sharing ``X_~u``.
    Both use the same base/redraw streams, so different ``u`` share ``Y``.
    """
    if n < 100:
        raise InvalidParameter("pick-freeze needs n >= 100")
    dim = input_model.dim
    mask = np.zeros(dim, dtype=bool)
    u = sorted(set(int(i) for i in u))
    if not u or u[0] < 0 or u[-1] >= dim:
        raise InvalidParameter(f"invalid subset {u} for M={dim}")
    mask[u] = True
    if _cache is None:
        _cache = {}
    if "y" not in _cache:
        qa, qb = pick_freeze_samples(input_model, n, seed)
        _cache["qa"], _cache["qb"] = qa, qb
        _cache["y"] = _evaluate(model_eval, input_model.from_unit(qa), "sobol.pick_freeze")
    qa, qb, y = _cache["qa"], _cache["qb"], _cache["y"]
    x_u = np.where(mask, qa, qb)
    y_u = _evaluate(model_eval, input_model.from_unit(x_u), "sobol.pick_freeze")
    first, first_se = _paired_estimate(y, y_u)
    if mask.all():
        return PickFreeze(first, 1.0, first_se, 0.0)
    x_c = np.where(mask, qb, qa)
    y_c = _evaluate(model_eval, input_model.from_unit(x_c), "sobol.pick_freeze")
    comp, comp_se = _paired_estimate(y, y_c)
    return PickFreeze(first, 1.0 - comp, first_se, comp_se)


def mc_report(model_eval, input_model: InputModel, n, seed=0, subsets=()):
    """Pick-freeze indices for every variable (and optional subsets)."""
    cache = {}
    first, total, fse, tse = [], [], [], []
    for i in range(input_model.dim):
        r = pick_freeze_indices(model_eval, input_model, n, [i], seed, cache)
        first.append(r.first_order)
        total.append(r.total)
        fse.append(r.first_order_se)
        tse.append(r.total_se)
    y = cache["y"]
    sub = {}
    for s in subsets:
        r = pick_freeze_indices(model_eval, input_model, n, s, seed, cache)
        sub[tuple(sorted(s))] = (r.first_order, r.total)
    return SensitivityReport(
        input_model.names, first, total, "MC-pick-freeze",
        mean=float(np.mean(y)), variance=float(np.var(y, ddof=1)), size=n,
        subsets=sub, first_order_se=np.array(fse), total_se=np.array(tse),
    )


def spearman_rho(x, y):
    """Pearson correlation of (average) ranks."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape != y.shape or x.size < 3:
        raise InvalidParameter("spearman_rho needs two samples of equal length >= 3")
    rx, ry = rankdata(x), rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    den = np.sqrt(np.sum(rx * rx) * np.sum(ry * ry))
    if den == 0:
        raise ZeroRankVariance("constant sample has no rank variance")
    return float(np.clip(np.sum(rx * ry) / den, -1.0, 1.0))


def rank_variables(report_or_totals):
    """Variable positions ordered by descending total index (ascending position on ties)."""
    totals = getattr(report_or_totals, "total", report_or_totals)
    totals = np.asarray(totals, dtype=float)
    return sorted(range(len(totals)), key=lambda i: (-totals[i], i))


def subset_label(u: Sequence[int]):
    """1-based comma label used in reports, e.g. ``(0, 1) -> "1,2"``."""
    return ",".join(str(i + 1) for i in sorted(u))


def parse_subset(label: str, dim: int):
    try:
        u = sorted({int(t) - 1 for t in label.split(",") if t.strip()})
    except ValueError:
        raise InvalidParameter(f"cannot parse subset {label!r}; expected e.g. '1,2'") from None
    if not u or u[0] < 0 or u[-1] >= dim:
        raise InvalidParameter(f"subset {label!r} out of range for M={dim}")
    return u


def analytic_report(model, subsets=()):
    """Closed-form moments and indices of an LRA or PCE meta-model."""
    from .lra import LRAModel, lra_mean, lra_sobol_first, lra_sobol_total, lra_variance
    from .pce import PCEModel, pce_mean, pce_sobol_first, pce_sobol_total, pce_variance

    if isinstance(model, LRAModel):
        mean, var, first, total, tag, size = lra_mean, lra_variance, lra_sobol_first, lra_sobol_total, "LRA-analytic", model.rank
    elif isinstance(model, PCEModel):
        mean, var, first, total, tag, size = pce_mean, pce_variance, pce_sobol_first, pce_sobol_total, "PCE-analytic", len(model.coefficients)
    else:
        raise InvalidParameter(f"no closed-form indices for {type(model).__name__}")
    dim = model.dim
    s1 = [first(model, [i]) for i in range(dim)]
    st = [total(model, [i]) for i in range(dim)]
    sub = {tuple(sorted(u)): (first(model, u), total(model, u)) for u in subsets}
    return SensitivityReport(model.input_model.names, s1, st, tag, mean=mean(model),
                             variance=var(model), size=size, subsets=sub)
