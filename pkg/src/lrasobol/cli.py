"""Command-line harness.

Subcommands::

    lrasobol build-lra   fit an LRA meta-model, write it as JSON
    lrasobol build-pce   fit a sparse PCE meta-model, write it as JSON
    lrasobol sobol       closed-form moments and indices of a saved model
    lrasobol reference   pick-freeze Monte Carlo indices of the true model
    lrasobol benchmark   list the registry, or print one benchmark's references
    lrasobol convergence index estimates over a grid of ED sizes / replications

Reports are CSV with ``#`` comment headers (tool version, config hash, seeds)
and 17 significant digits. ``--figures DIR`` additionally renders PNG figures.
Exit codes: 0 ok, 2 configuration, 3 numerical failure, 4 external model.
Verbosity comes from the ``TS_LOG`` environment variable (e.g. ``TS_LOG=INFO``).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import io
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .benchmarks import REGISTRY, ExternalModel, GridSpec, eole_basis, eole_input_model, get_benchmark
from .config import config_hash, load_config
from .errors import ConfigError, ExternalModelError, InvalidParameter, LraSobolError, NumericalError
from .input_model import InputModel
from .lra import select_degree
from .pce import build_pce
from .regression import generalization_error_rel
from .sampling import make_design, pseudo_random
from .serialization import read_model_file, save_model
from .sobol import _evaluate, analytic_report, mc_report, parse_subset, rank_variables, subset_label

log = logging.getLogger("lrasobol")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_EXTERNAL = 0, 2, 3, 4
METHOD_TAG = {"lra": "LRA-analytic", "pce": "PCE-analytic"}


def fmt(x):
    """17 significant digits, round-trip safe; blanks for missing values."""
    if x is None or x == "":
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


# ---------------------------------------------------------------------------
# model resolution
# ---------------------------------------------------------------------------

class ResolvedModel:
    """Input model, evaluator and (optional) reference values for one run."""

    def __init__(self, name, input_model, evaluator, reference=None, unit=""):
        self.name = name
        self.input_model = input_model
        self.evaluator = evaluator
        self.reference = reference or {}
        self.unit = unit

    def __call__(self, x):
        if self.evaluator is None:
            raise ExternalModelError(
                f"model {self.name!r} has no built-in response; set model.command", stage="model.resolve")
        return _evaluate(self.evaluator, np.atleast_2d(x), "model.evaluate")


def resolve_model(cfg) -> ResolvedModel:
    m = cfg["model"]
    name = m["benchmark"]
    command = ExternalModel(m["command"], m["timeout"]) if m["command"] else None
    if name is not None:
        if name not in REGISTRY:
            raise InvalidParameter(
                f"config field 'model.benchmark': unknown name {name!r}; available: {', '.join(REGISTRY)}",
                stage="config")
        if name == "eole-field":
            e = cfg["eole"]
            basis = eole_basis(GridSpec(e["lower"], e["upper"], e["n_side"]), e["length"], e["threshold"])
            bm = get_benchmark(name)
            bm.input_model = eole_input_model(basis.size)
            bm.reference = {"kind": "EOLE truncation", "retained_terms": basis.size}
        else:
            bm = get_benchmark(name)
        im = InputModel.from_records(cfg["inputs"]) if cfg["inputs"] else bm.input_model
        evaluator = command or bm.evaluator and bm
        ref = bm.reference if command is None and not cfg["inputs"] else {}
        return ResolvedModel(name, im, evaluator, ref, bm.unit)
    im = InputModel.from_records(cfg["inputs"])
    return ResolvedModel("external", im, command)


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def design_for(cfg, input_model, n=None, seed=None):
    d = cfg["design"]
    return make_design(d["kind"], input_model, n or d["n"], d["seed"] if seed is None else seed,
                       d["lhs_candidates"])


def fit_metamodel(cfg, method, ed, input_model):
    if method == "lra":
        c = cfg["lra"]
        _, model = select_degree(ed, input_model, c["p_grid"], c["r_max"], cv_seed=c["cv_seed"],
                                 i_max=c["i_max"], delta_err_min=c["delta_err_min"])
        return model
    c = cfg["pce"]
    lo, hi = c["p_t_range"]
    return build_pce(ed, input_model, range(int(lo), int(hi) + 1), tuple(c["q_set"]),
                     c["max_candidates"], trace_scaling=c["trace_scaling"])


def validation_error(cfg, model, rm: ResolvedModel, cache=None):
    v = cfg["validation"]
    if not v["n"]:
        return None
    key = (v["n"], v["seed"])
    if cache is not None and key in cache:
        x, y = cache[key]
    else:
        x = rm.input_model.from_unit(pseudo_random(rm.input_model.dim, v["n"], v["seed"]))
        y = rm(x)
        if cache is not None:
            cache[key] = (x, y)
    return generalization_error_rel(model(x), y)


def run_build(cfg, method):
    """Design, model runs, meta-model fit and validation. Returns (model, ed)."""
    rm = resolve_model(cfg)
    ed = design_for(cfg, rm.input_model)
    ed = ed.with_responses(rm(ed.points_physical))
    log.info("built %s design N=%d for %s", cfg["design"]["kind"], ed.size, rm.name)
    model = fit_metamodel(cfg, method, ed, rm.input_model)
    err_g = validation_error(cfg, model, rm)
    if err_g is not None:
        from dataclasses import replace

        model = replace(model, errors=replace(model.errors, err_generalization_rel=err_g))
    return model, ed


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def header_lines(command, cfg=None, chash=None, extra=()):
    lines = [f"lrasobol {__version__}", f"command: {command}"]
    if cfg is not None:
        chash = chash or config_hash(cfg)
        seeds = (f"seed={cfg['seed']} design={cfg['design']['seed']} cv={cfg['lra']['cv_seed']} "
                 f"validation={cfg['validation']['seed']} reference={cfg['reference']['seed']}")
        lines += [f"config_hash: {chash}", f"seeds: {seeds}"]
    elif chash:
        lines.append(f"config_hash: {chash}")
    lines += list(extra)
    return lines


def render_csv(columns, rows, comments=()):
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)


SENS_COLUMNS = ["variable", "first_order", "total", "method", "N"]


def sensitivity_rows(report, n):
    rows = []
    for i in rank_variables(report):
        row = {"variable": report.names[i], "first_order": report.first_order[i],
               "total": report.total[i], "method": report.method, "N": n}
        rows.append(row)
    for u, (s1, st) in report.subsets.items():
        row = {"variable": f"u={subset_label(u)}", "first_order": s1, "total": st,
               "method": report.method, "N": n}
        rows.append(row)
    return rows


def moment_lines(report):
    out = []
    if report.mean is not None:
        out.append(f"mean: {fmt(report.mean)}")
    if report.variance is not None:
        out.append(f"std: {fmt(report.std)}")
    return out


def parse_subsets(specs, dim):
    subsets = []
    for spec in specs or ():
        for part in spec.split(";"):
            if part.strip():
                subsets.append(tuple(parse_subset(part, dim)))
    return subsets


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _config_from_args(args):
    over = {
        "seed": args.seed,
        "model": {"benchmark": getattr(args, "benchmark", None), "command": getattr(args, "command", None)},
        "design": {"kind": getattr(args, "design", None), "n": getattr(args, "n", None),
                   "lhs_candidates": getattr(args, "lhs_candidates", None)},
    }
    if getattr(args, "validation_n", None) is not None:
        over["validation"] = {"n": args.validation_n}
    return load_config(args.config, over)


def cmd_build(args, method):
    cfg = _config_from_args(args)
    model, ed = run_build(cfg, method)
    chash = config_hash(cfg)
    out = args.out or cfg["outputs"]["model"] or f"{cfg['model']['benchmark'] or 'model'}-{method}.json"
    save_model(model, out, meta={"config": cfg, "config_hash": chash, "ed_size": ed.size,
                                 "design": ed.provenance})
    rep = analytic_report(model)
    rows = [{"quantity": "method", "value": METHOD_TAG[method]}, {"quantity": "N", "value": ed.size}]
    if method == "lra":
        rows += [{"quantity": "degree", "value": model.degree}, {"quantity": "rank", "value": model.rank}]
    else:
        rows += [{"quantity": "total_degree", "value": model.total_degree}, {"quantity": "q", "value": model.q},
                 {"quantity": "n_terms", "value": len(model.coefficients)}]
    rows += [{"quantity": k, "value": v} for k, v in model.errors.to_dict().items()]
    rows += [{"quantity": "mean", "value": rep.mean}, {"quantity": "std", "value": rep.std}]
    emit(render_csv(["quantity", "value"], rows, header_lines(f"build-{method}", cfg, chash)), "-")
    report_path = args.report or cfg["outputs"]["report"]
    if report_path:
        emit(render_csv(SENS_COLUMNS, sensitivity_rows(rep, ed.size),
                        header_lines(f"build-{method}", cfg, chash, moment_lines(rep))), report_path)
    if args.figures:
        from .plotting import plot_indices

        plot_indices([rep], Path(args.figures) / f"indices-{method}.png")
    return EXIT_OK


def cmd_sobol(args):
    model, meta = read_model_file(args.model)
    subsets = parse_subsets(args.subsets, model.dim)
    rep = analytic_report(model, subsets)
    n = meta.get("ed_size")
    text = render_csv(SENS_COLUMNS, sensitivity_rows(rep, n),
                      header_lines("sobol", chash=meta.get("config_hash"), extra=moment_lines(rep)))
    emit(text, args.out)
    if args.figures:
        from .plotting import plot_indices

        plot_indices([rep], Path(args.figures) / "indices.png")
    return EXIT_OK


def cmd_reference(args):
    cfg = load_config(args.config, {
        "seed": args.seed,
        "model": {"benchmark": args.benchmark, "command": args.command},
        "reference": {"n": args.n},
    })
    rm = resolve_model(cfg)
    subsets = parse_subsets(args.subsets, rm.input_model.dim)
    n = cfg["reference"]["n"]
    rep = mc_report(rm, rm.input_model, n, cfg["reference"]["seed"], subsets)
    # standard errors go in the header so the table keeps the analytic-report schema
    se = [f"standard_error: {name} first_order={fmt(a)} total={fmt(b)}"
          for name, a, b in zip(rep.names, rep.first_order_se, rep.total_se)]
    emit(render_csv(SENS_COLUMNS, sensitivity_rows(rep, n),
                    header_lines("reference", cfg, extra=moment_lines(rep) + se)), args.out)
    if args.figures:
        from .plotting import plot_indices

        plot_indices([rep], Path(args.figures) / "indices-reference.png", reference=rm.reference or None)
    return EXIT_OK


def cmd_benchmark(args):
    if not args.name:
        rows = []
        for name in REGISTRY:
            bm = get_benchmark(name)
            rows.append({"name": name, "dim": bm.input_model.dim, "unit": bm.unit,
                         "has_response": "yes" if bm.evaluator else "external",
                         "description": bm.description})
        emit(render_csv(["name", "dim", "unit", "has_response", "description"], rows,
                        header_lines("benchmark")), args.out)
        return EXIT_OK
    if args.name not in REGISTRY:
        raise InvalidParameter(f"unknown benchmark {args.name!r}; available: {', '.join(REGISTRY)}")
    bm = get_benchmark(args.name)
    ref = bm.reference
    extra = [f"reference: {ref.get('kind', '')}"]
    for key in ("mean", "std", "retained_terms"):
        if key in ref:
            extra.append(f"{key}: {fmt(ref[key])}")
    for m in bm.input_model:
        extra.append(f"input: {m.to_record()}")
    rows = []
    if "total" in ref:
        order = sorted(range(bm.input_model.dim), key=lambda i: (-ref["total"][i], i))
        rows = [{"variable": bm.input_model.names[i], "first_order": ref["first_order"][i],
                 "total": ref["total"][i], "method": "exact-benchmark", "N": ""} for i in order]
    emit(render_csv(SENS_COLUMNS, rows, header_lines(f"benchmark {args.name}", extra=extra)), args.out)
    return EXIT_OK


def convergence_cell(cfg, n, rep):
    """Fit every requested method on one (N, replication) design; never raises."""
    rows = []
    try:
        rm = resolve_model(cfg)
        names = rm.input_model.names
        ed = design_for(cfg, rm.input_model, n, cfg["design"]["seed"] + rep)
        ed = ed.with_responses(rm(ed.points_physical))
    except LraSobolError as exc:
        return [{"N": n, "replication": rep, "method": METHOD_TAG[m], "status": f"failed: {exc}"}
                for m in cfg["convergence"]["methods"]]
    val_cache = {}
    ref = rm.reference
    for method in cfg["convergence"]["methods"]:
        row = {"N": n, "replication": rep, "method": METHOD_TAG[method]}
        try:
            model = fit_metamodel(cfg, method, ed, rm.input_model)
            r = analytic_report(model)
            row.update(status="ok", mean=r.mean, std=r.std,
                       err_generalization_rel=validation_error(cfg, model, rm, val_cache),
                       err_selection=model.errors.err_cv_k_rel if method == "lra" else model.errors.err_loo_corrected_rel)
            for i, name in enumerate(names):
                row[f"S1_{name}"] = r.first_order[i]
                row[f"ST_{name}"] = r.total[i]
                if "first_order" in ref:
                    row[f"dS1_{name}"] = r.first_order[i] - ref["first_order"][i]
                    row[f"dST_{name}"] = r.total[i] - ref["total"][i]
        except LraSobolError as exc:
            row["status"] = f"failed: {exc}"
        rows.append(row)
    return rows


def cmd_convergence(args):
    over = {"seed": args.seed, "model": {"benchmark": args.benchmark, "command": args.command},
            "design": {"kind": args.design, "lhs_candidates": args.lhs_candidates}}
    conv = {}
    if args.n_list:
        conv["n_list"] = [int(t) for t in args.n_list.split(",") if t.strip()]
    if args.replications:
        conv["replications"] = args.replications
    if args.methods:
        conv["methods"] = [t.strip() for t in args.methods.split(",") if t.strip()]
    over["convergence"] = conv
    if args.validation_n is not None:
        over["validation"] = {"n": args.validation_n}
    cfg = load_config(args.config, over)
    rm = resolve_model(cfg)
    names = rm.input_model.names
    reps = cfg["convergence"]["replications"]
    if cfg["design"]["kind"] == "sobol" and reps > 1:
        log.warning("Sobol designs are deterministic; all %d replications will coincide", reps)
    cells = [(n, r) for n in cfg["convergence"]["n_list"] for r in range(reps)]
    jobs = max(1, args.jobs or 1)
    if jobs == 1:
        results = [convergence_cell(cfg, n, r) for n, r in cells]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(convergence_cell, cfg, n, r) for n, r in cells]
            results = [f.result() for f in futures]
    rows = [row for cell in results for row in cell]
    cols = ["N", "replication", "method", "status", "mean", "std", "err_selection", "err_generalization_rel"]
    cols += [f"S1_{v}" for v in names] + [f"ST_{v}" for v in names]
    if "first_order" in rm.reference:
        cols += [f"dS1_{v}" for v in names] + [f"dST_{v}" for v in names]
    emit(render_csv(cols, rows, header_lines("convergence", cfg)), args.out)
    if args.figures:
        from .plotting import plot_boxplots, plot_convergence

        fig_dir = Path(args.figures)
        plot_convergence(rows, names, fig_dir / "convergence-first-order.png", "S1", rm.reference)
        plot_convergence(rows, names, fig_dir / "convergence-total.png", "ST", rm.reference)
        if reps > 1:
            top = rank_variables(rm.reference["total"])[0] if "total" in rm.reference else 0
            plot_boxplots(rows, names, top, fig_dir / f"boxplot-{names[top]}.png", "S1", rm.reference)
    failed = sum(1 for r in rows if r["status"] != "ok")
    if failed:
        log.warning("%d of %d convergence cells failed", failed, len(rows))
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _add_model_args(p):
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--benchmark", help=f"registry model ({', '.join(REGISTRY)})")
    p.add_argument("--command", help="external model command (reads CSV on stdin, prints responses)")
    p.add_argument("--seed", type=int, help="base seed for every random stream")


def _add_design_args(p):
    p.add_argument("--design", choices=("sobol", "lhs", "random"), help="experimental design kind")
    p.add_argument("--lhs-candidates", type=int, help="maximin LHS candidate count")


def build_parser():
    parser = argparse.ArgumentParser(prog="lrasobol", description="LRA / PCE meta-models and Sobol' indices")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="cmd", required=True)

    for method in ("lra", "pce"):
        p = sub.add_parser(f"build-{method}", help=f"fit an {method.upper()} meta-model")
        _add_model_args(p)
        _add_design_args(p)
        p.add_argument("--n", type=int, help="experimental design size")
        p.add_argument("--validation-n", type=int, help="validation set size (0 disables)")
        p.add_argument("--out", help="model JSON path")
        p.add_argument("--report", help="also write the analytic index CSV here")
        p.add_argument("--figures", help="directory for PNG figures")

    p = sub.add_parser("sobol", help="closed-form indices of a saved model")
    p.add_argument("model", help="model JSON written by build-lra / build-pce")
    p.add_argument("--subsets", action="append", help="1-based subsets, e.g. '1,2;2,3'")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--figures", help="directory for PNG figures")

    p = sub.add_parser("reference", help="pick-freeze Monte Carlo indices")
    _add_model_args(p)
    p.add_argument("--n", type=int, help="Monte Carlo sample size")
    p.add_argument("--subsets", action="append", help="1-based subsets, e.g. '1,2;2,3'")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--figures", help="directory for PNG figures")

    p = sub.add_parser("benchmark", help="list benchmarks or show one's reference values")
    p.add_argument("name", nargs="?")
    p.add_argument("--out", help="CSV path (default stdout)")

    p = sub.add_parser("convergence", help="indices versus ED size")
    _add_model_args(p)
    _add_design_args(p)
    p.add_argument("--n-list", help="comma-separated ED sizes")
    p.add_argument("--replications", type=int)
    p.add_argument("--methods", help="comma-separated subset of lra,pce")
    p.add_argument("--validation-n", type=int, help="validation set size (0 disables)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--figures", help="directory for PNG figures")
    return parser


def _setup_logging():
    level = os.environ.get("TS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    handlers = {
        "build-lra": lambda a: cmd_build(a, "lra"),
        "build-pce": lambda a: cmd_build(a, "pce"),
        "sobol": cmd_sobol,
        "reference": cmd_reference,
        "benchmark": cmd_benchmark,
        "convergence": cmd_convergence,
    }
    try:
        return handlers[args.cmd](args)
    except (ConfigError, NumericalError, ExternalModelError, OSError) as exc:
        print(f"lrasobol: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)


def exit_code(exc):
    if isinstance(exc, ExternalModelError):
        return EXIT_EXTERNAL
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
