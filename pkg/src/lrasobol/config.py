"""Run configuration: one TOML file holds every input of a run.

Grammar (all tables optional, defaults shown)::

    seed = 0                       # default for every seed below

    [model]
    benchmark = "beam"             # registry name, or
    command = "python3 solver.py"  # external subprocess model
    timeout = 600                  # seconds, external models only

    [[inputs]]                     # required with a bare command; overrides a benchmark
    name = "x1"
    family = "lognormal"           # uniform | gaussian | lognormal | gumbel
    mean = 1.0                     # uniform: bounds = [a, b]
    cov = 0.1                      # gaussian: std = ...

    [design]
    kind = "sobol"                 # sobol | lhs | random
    n = 100
    seed = 0
    lhs_candidates = 5

    [lra]
    p_grid = [1, 2, ..., 15]
    r_max = 10
    i_max = 50
    delta_err_min = 1e-6
    cv_seed = 0

    [pce]
    p_t_range = [1, 20]            # inclusive
    q_set = [0.25, 0.5, 0.75, 1.0]
    max_candidates = 10000
    trace_scaling = "unscaled"     # unscaled | normalized

    [validation]
    n = 0                          # 0 disables
    seed = 1

    [reference]
    n = 100000
    seed = 2

    [convergence]
    n_list = [100, 200, 500]
    replications = 1
    methods = ["lra", "pce"]

    [outputs]
    model = "model.json"
    report = "report.csv"

    [eole]
    lower = -0.5
    upper = 0.5
    n_side = 11
    length = 0.2
    threshold = 0.99
"""

from __future__ import annotations

import copy
import hashlib
import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import InvalidParameter

DEFAULTS = {
    "seed": 0,
    "model": {"benchmark": None, "command": None, "timeout": None},
    "inputs": None,
    "design": {"kind": "sobol", "n": 100, "seed": None, "lhs_candidates": 5},
    "lra": {"p_grid": list(range(1, 16)), "r_max": 10, "i_max": 50, "delta_err_min": 1e-6, "cv_seed": None},
    "pce": {"p_t_range": [1, 20], "q_set": [0.25, 0.5, 0.75, 1.0], "max_candidates": 10_000,
            "trace_scaling": "unscaled"},
    "validation": {"n": 0, "seed": None},
    "reference": {"n": 100_000, "seed": None},
    "convergence": {"n_list": [100, 200, 500], "replications": 1, "methods": ["lra", "pce"]},
    "outputs": {"model": None, "report": None},
    "eole": {"lower": -0.5, "upper": 0.5, "n_side": 11, "length": 0.2, "threshold": 0.99},
}

_SEED_OFFSETS = {"design": 0, "lra": 0, "validation": 1, "reference": 2}


def _merge(base, upd, path=""):
    for key, val in upd.items():
        where = f"{path}{key}"
        if key not in base:
            raise InvalidParameter(f"unknown config field {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise InvalidParameter(f"config field {where!r} must be a table")
            _merge(base[key], val, where + ".")
        else:
            base[key] = val


def load_config(path=None, overrides=None):
    """Defaults, then the TOML file, then ``overrides`` (same nesting, ``None`` skipped)."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise InvalidParameter(f"cannot read config {path}: {exc}", stage="config") from exc
        except tomllib.TOMLDecodeError as exc:
            raise InvalidParameter(f"config {path} is not valid TOML: {exc}", stage="config") from exc
        _merge(cfg, data)
    if overrides:
        _merge(cfg, _drop_none(overrides))
    _resolve_seeds(cfg)
    validate(cfg)
    return cfg


def _drop_none(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            v = _drop_none(v)
            if v:
                out[k] = v
        elif v is not None:
            out[k] = v
    return out


def _resolve_seeds(cfg):
    base = int(cfg["seed"])
    for section, off in _SEED_OFFSETS.items():
        key = "cv_seed" if section == "lra" else "seed"
        if cfg[section][key] is None:
            cfg[section][key] = base + off


def validate(cfg):
    m = cfg["model"]
    if m["benchmark"] is None and m["command"] is None:
        raise InvalidParameter("config field 'model.benchmark' or 'model.command' is required", stage="config")
    if m["command"] is not None and m["benchmark"] is None and not cfg["inputs"]:
        raise InvalidParameter("config field 'inputs' is required for an external model", stage="config")
    d = cfg["design"]
    if d["kind"] not in ("sobol", "lhs", "random"):
        raise InvalidParameter(f"config field 'design.kind' must be sobol, lhs or random, got {d['kind']!r}",
                               stage="config")
    _positive_int(d["n"], "design.n")
    _positive_int(d["lhs_candidates"], "design.lhs_candidates")
    lra = cfg["lra"]
    if not lra["p_grid"] or any(int(p) < 1 for p in lra["p_grid"]):
        raise InvalidParameter("config field 'lra.p_grid' must be a non-empty list of degrees >= 1", stage="config")
    _positive_int(lra["r_max"], "lra.r_max")
    _positive_int(lra["i_max"], "lra.i_max")
    pce = cfg["pce"]
    lo_hi = pce["p_t_range"]
    if len(lo_hi) != 2 or int(lo_hi[0]) < 1 or int(lo_hi[1]) < int(lo_hi[0]):
        raise InvalidParameter("config field 'pce.p_t_range' must be [lo, hi] with 1 <= lo <= hi", stage="config")
    if not pce["q_set"] or any(not 0 < float(q) <= 1 for q in pce["q_set"]):
        raise InvalidParameter("config field 'pce.q_set' must hold values in (0, 1]", stage="config")
    if pce["trace_scaling"] not in ("unscaled", "normalized"):
        raise InvalidParameter("config field 'pce.trace_scaling' must be unscaled or normalized", stage="config")
    if int(cfg["validation"]["n"]) < 0:
        raise InvalidParameter("config field 'validation.n' must be >= 0", stage="config")
    conv = cfg["convergence"]
    if not conv["n_list"]:
        raise InvalidParameter("config field 'convergence.n_list' must be non-empty", stage="config")
    for n in conv["n_list"]:
        _positive_int(n, "convergence.n_list")
    _positive_int(conv["replications"], "convergence.replications")
    bad = set(conv["methods"]) - {"lra", "pce"}
    if bad or not conv["methods"]:
        raise InvalidParameter(f"config field 'convergence.methods' has unknown entries {sorted(bad)}",
                               stage="config")


def _positive_int(v, name):
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise InvalidParameter(f"config field {name!r} must be a positive integer, got {v!r}", stage="config")


def config_hash(cfg):
    """Short SHA-256 of the canonical JSON form of a resolved config."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]

