"""Experimental designs: Sobol sequences, maximin LHS and pseudo-random draws."""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.spatial.distance import pdist

from .errors import DimensionTooLarge, InvalidParameter
from .input_model import InputModel

SOBOL_MAX_DIM = 64
_BITS = 32


@lru_cache(maxsize=1)
def _direction_table():
    """Direction integers ``V[dim, bit]`` scaled to ``_BITS`` bits."""
    text = resources.files("lrasobol").joinpath("data/sobol_directions.txt").read_text()
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("d "):
            continue
        rows.append([int(t) for t in line.split()])
    V = np.zeros((len(rows), _BITS), dtype=np.uint64)
    for d, row in enumerate(rows):
        s, a, m = row[1], row[2], row[3:]
        if s == 0:
            V[d] = [1 << (_BITS - 1 - k) for k in range(_BITS)]
            continue
        v = [0] * _BITS
        for k in range(min(s, _BITS)):
            v[k] = m[k] << (_BITS - 1 - k)
        for k in range(s, _BITS):
            val = v[k - s] ^ (v[k - s] >> s)
            for j in range(1, s):
                if (a >> (s - 1 - j)) & 1:
                    val ^= v[k - j]
            v[k] = val
        V[d] = v
    return V


def sobol_sequence(dim, n):
    """First ``n`` points of the Sobol sequence, skipping the all-zeros point.

    Points follow the Gray-code (Antonov-Saleev) ordering, so ``sobol_sequence(M, n)``
    is a prefix of ``sobol_sequence(M, n + k)``.
    """
    if dim < 1 or n < 1:
        raise InvalidParameter("sobol_sequence needs dim >= 1 and n >= 1")
    if dim > SOBOL_MAX_DIM:
        raise DimensionTooLarge(f"Sobol table covers {SOBOL_MAX_DIM} dimensions, got {dim}")
    if n >= 2**_BITS:
        raise InvalidParameter(f"at most 2**{_BITS} - 1 points supported")
    V = _direction_table()[:dim]
    idx = np.arange(1, n + 1, dtype=np.uint64)
    gray = idx ^ (idx >> np.uint64(1))
    acc = np.zeros((n, dim), dtype=np.uint64)
    for bit in range(int(n).bit_length()):
        mask = ((gray >> np.uint64(bit)) & np.uint64(1)).astype(bool)
        acc[mask] ^= V[:, bit]
    return acc.astype(np.float64) / float(2**_BITS)


def lhs(dim, n, rng):
    """One random Latin hypercube: one point per stratum per column, jittered."""
    strata = np.column_stack([rng.permutation(n) for _ in range(dim)])
    return (strata + rng.random((n, dim))) / n


def min_distance(points):
    """Smallest pairwise Euclidean distance."""
    if len(points) < 2:
        return np.inf
    return float(pdist(points).min())


def maximin_select(candidates):
    """Index of the candidate with the largest minimum distance (first on ties)."""
    scores = [min_distance(c) for c in candidates]
    return int(np.argmax(scores))


def maximin_lhs(dim, n, n_candidates=5, seed=0):
    """Best of ``n_candidates`` random LHS designs under the maximin criterion."""
    if n < 2:
        raise InvalidParameter("maximin_lhs needs n >= 2")
    if n_candidates < 1:
        raise InvalidParameter("n_candidates must be >= 1")
    rng = np.random.default_rng(seed)
    candidates = [lhs(dim, n, rng) for _ in range(n_candidates)]
    return candidates[maximin_select(candidates)]


def pseudo_random(dim, n, seed=0):
    """Uniform draws from numpy's PCG64 stream seeded with ``seed``."""
    return np.random.default_rng(seed).random((n, dim))


@dataclass(frozen=True)
class ExperimentalDesign:
    """Design points in unit, physical and standard coordinates, plus responses."""

    points_unit: np.ndarray
    points_physical: np.ndarray
    points_standard: np.ndarray
    provenance: dict
    responses: np.ndarray | None = None

    @property
    def size(self):
        return self.points_unit.shape[0]

    @property
    def dim(self):
        return self.points_unit.shape[1]

    def with_responses(self, y):
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != self.size:
            raise InvalidParameter(f"expected {self.size} responses, got {y.shape[0]}")
        return replace(self, responses=y)

    def subset(self, rows):
        rows = np.asarray(rows)
        return ExperimentalDesign(
            self.points_unit[rows],
            self.points_physical[rows],
            self.points_standard[rows],
            dict(self.provenance, subset=True),
            None if self.responses is None else self.responses[rows],
        )

    @classmethod
    def from_unit(cls, unit, input_model: InputModel, provenance):
        unit = np.atleast_2d(np.asarray(unit, dtype=float))
        standard = input_model.standard_from_unit(unit)
        physical = input_model.from_standard(standard)
        return cls(unit, physical, standard, provenance)

    @classmethod
    def from_physical(cls, physical, input_model: InputModel, responses=None):
        """Wrap user-supplied points (e.g. read from a file)."""
        physical = np.atleast_2d(np.asarray(physical, dtype=float))
        standard = input_model.to_standard(physical)
        unit = np.column_stack([m.cdf(physical[:, i]) for i, m in enumerate(input_model)])
        y = None if responses is None else np.asarray(responses, dtype=float).reshape(-1)
        return cls(unit, physical, standard, {"kind": "user"}, y)


def make_design(kind, input_model: InputModel, n, seed=0, n_candidates=5):
    """Generate an :class:`ExperimentalDesign` of the requested kind."""
    dim = input_model.dim
    if kind == "sobol":
        unit = sobol_sequence(dim, n)
        prov = {"kind": "sobol"}
    elif kind == "lhs":
        unit = maximin_lhs(dim, n, n_candidates, seed)
        prov = {"kind": "lhs", "seed": seed, "n_candidates": n_candidates}
    elif kind == "random":
        unit = pseudo_random(dim, n, seed)
        prov = {"kind": "random", "seed": seed}
    else:
        raise InvalidParameter(f"unknown design kind {kind!r}; expected sobol, lhs or random")
    return ExperimentalDesign.from_unit(unit, input_model, prov)
