"""JSON model files for fitted LRA and PCE meta-models.

Floats are written with ``repr`` precision by the json module, so a save/load
round trip reproduces coefficients bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import __version__
from .errors import LraSobolError, UnreadableModel
from .input_model import InputModel
from .lra import LRAModel
from .pce import PCEModel
from .regression import ErrorReport

FORMAT = "lrasobol-model"
FORMAT_VERSION = 1


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def model_to_dict(model, meta=None):
    head = {"format": FORMAT, "format_version": FORMAT_VERSION, "tool_version": __version__,
            "marginals": model.input_model.to_records(), "families": list(model.families),
            "errors": model.errors.to_dict(), "meta": meta or {}}
    if isinstance(model, LRAModel):
        head.update(
            kind="lra",
            degree=model.degree,
            rank=model.rank,
            b=model.b,
            # z[l][i][k]: term l, input i, polynomial degree k
            z=model.z,
            rank_trace=model.rank_trace,
            degree_trace=model.degree_trace,
        )
    elif isinstance(model, PCEModel):
        head.update(
            kind="pce",
            total_degree=model.total_degree,
            q=model.q,
            indices=model.indices,
            coefficients=model.coefficients,
            trace=model.trace,
        )
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return _jsonable(head)


def model_from_dict(d):
    try:
        if d.get("format") != FORMAT:
            raise UnreadableModel(f"not a {FORMAT} file")
        im = InputModel.from_records(d["marginals"])
        errors = ErrorReport.from_dict(d.get("errors", {}))
        if d["kind"] == "lra":
            return LRAModel(im, tuple(d["families"]), int(d["degree"]), np.array(d["b"], float),
                            np.array(d["z"], float), errors, list(d.get("rank_trace", [])),
                            list(d.get("degree_trace", [])))
        if d["kind"] == "pce":
            return PCEModel(im, tuple(d["families"]), np.array(d["indices"], int),
                            np.array(d["coefficients"], float), errors, d.get("total_degree"),
                            d.get("q"), list(d.get("trace", [])))
        raise UnreadableModel(f"unknown model kind {d['kind']!r}")
    except UnreadableModel:
        raise
    except (KeyError, TypeError, ValueError, LraSobolError) as exc:
        raise UnreadableModel(f"malformed model file: {exc}", stage="serialization.load") from exc


def save_model(model, path, meta=None):
    path = Path(path)
    path.write_text(json.dumps(model_to_dict(model, meta), indent=1) + "\n")
    return path


def load_model(path):
    return read_model_file(path)[0]


def read_model_file(path):
    """``(model, meta)`` from a model JSON file."""
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        raise UnreadableModel(f"cannot read {path}: {exc}", stage="serialization.load") from exc
    if not isinstance(d, dict):
        raise UnreadableModel(f"{path}: top level is not an object", stage="serialization.load")
    meta = d.get("meta") if isinstance(d.get("meta"), dict) else {}
    return model_from_dict(d), meta
