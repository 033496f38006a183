"""Optional figures for the CLI reports (PNG via the Agg canvas).

Nothing here touches pyplot global state, so figures can be rendered from
worker threads or inside a test run without a display.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

STYLE = {"font.size": 9, "axes.spines.top": False, "axes.spines.right": False}


def _figure(width=6.4, height=3.6, ncols=1):
    import matplotlib as mpl

    with mpl.rc_context(STYLE):
        fig = Figure(figsize=(width, height), layout="constrained")
        FigureCanvasAgg(fig)
        axes = fig.subplots(1, ncols, squeeze=False)[0]
    return fig, axes


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    return path


def plot_indices(reports, path, reference=None, title=None):
    """Grouped bars of first-order and total indices, one bar group per variable.

    ``reports`` is a list of :class:`~lrasobol.sobol.SensitivityReport`;
    ``reference`` an optional dict with ``first_order`` / ``total`` arrays
    drawn as markers.
    """
    names = list(reports[0].names)
    x = np.arange(len(names))
    width = 0.8 / len(reports)
    fig, axes = _figure(max(6.4, 0.45 * len(names) + 2), 3.4, ncols=2)
    for ax, key, label in zip(axes, ("first_order", "total"), ("first-order", "total")):
        for k, rep in enumerate(reports):
            vals = getattr(rep, key)
            se = getattr(rep, key + "_se", None)
            ax.bar(x + (k - (len(reports) - 1) / 2) * width, vals, width, yerr=se,
                   label=rep.method, capsize=2)
        if reference is not None and key in reference:
            ax.plot(x, reference[key], "k_", markersize=12, mew=1.5, label="reference")
        ax.set_xticks(x, names, rotation=45 if len(names) > 8 else 0)
        ax.set_ylabel(f"{label} index")
        ax.set_ylim(0, max(1.0, ax.get_ylim()[1]))
    axes[0].legend(frameon=False)
    if title:
        fig.suptitle(title)
    return _save(fig, path)


_KEY_LABEL = {"S1": "first-order index", "ST": "total index"}
_REF_KEY = {"S1": "first_order", "ST": "total"}


def plot_convergence(rows, names, path, key="S1", reference=None, max_vars=5):
    """Index estimates against ED size, one line per (method, variable).

    ``rows`` are convergence records (``N``, ``method``, ``status`` and
    ``S1_<name>`` / ``ST_<name>`` columns). Replications at the same N are
    averaged. Only the ``max_vars`` leading variables are drawn.
    """
    ok = [r for r in rows if r.get("status") == "ok"]
    fig, axes = _figure()
    ax = axes[0]
    ref = None if not reference else reference.get(_REF_KEY[key])
    colors = {}
    for method in dict.fromkeys(r["method"] for r in ok):
        for i, v in enumerate(names[:max_vars]):
            ns = sorted({r["N"] for r in ok if r["method"] == method})
            vals = [np.mean([r[f"{key}_{v}"] for r in ok if r["method"] == method and r["N"] == n]) for n in ns]
            style = "o-" if method.startswith("LRA") else "s--"
            line, = ax.plot(ns, vals, style, ms=3, color=colors.get(v), label=f"{v} ({method.split('-')[0]})")
            colors[v] = line.get_color()
            if ref is not None and method == next(iter(dict.fromkeys(r["method"] for r in ok))):
                ax.axhline(float(ref[i]), color=colors[v], lw=0.6, ls=":")
    ax.set_xlabel("N")
    ax.set_ylabel(_KEY_LABEL[key])
    ax.legend(frameon=False, fontsize=7, ncol=2)
    return _save(fig, path)


def plot_boxplots(rows, names, index, path, key="S1", reference=None):
    """Spread of one variable's index over replications, one box per (N, method)."""
    col = f"{key}_{names[index]}"
    groups = {}
    for r in rows:
        if r.get("status") == "ok":
            groups.setdefault((r["N"], r["method"]), []).append(r[col])
    labels = sorted(groups)
    fig, axes = _figure()
    ax = axes[0]
    if labels:
        ax.boxplot([groups[k] for k in labels], widths=0.5)
        ax.set_xticks(np.arange(1, len(labels) + 1), [f"{n}\n{m.split('-')[0]}" for n, m in labels])
    if reference and _REF_KEY[key] in reference:
        ax.axhline(float(reference[_REF_KEY[key]][index]), color="k", lw=0.8, ls="--")
    ax.set_ylabel(f"{_KEY_LABEL[key]} of {names[index]}")
    return _save(fig, path)
