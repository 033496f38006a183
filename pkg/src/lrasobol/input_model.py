"""Independent input marginals and the isoprobabilistic map to standard space.

Uniform marginals map affinely onto [-1, 1] (Legendre space); every other family
maps onto a standard normal variable (Hermite space) by CDF matching.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .errors import InvalidParameter, NonFinite, OutOfSupport

FAMILIES = ("uniform", "gaussian", "lognormal", "gumbel")
EULER_GAMMA = 0.57721566490153286061

_SUPPORT_TOL = 1e-12


def lognormal_params(mean, cov):
    """Moment-matched ``(lambda, zeta)`` of a lognormal with given mean and CoV."""
    if not (mean > 0):
        raise InvalidParameter(f"lognormal mean must be > 0, got {mean}")
    if not (cov > 0):
        raise InvalidParameter(f"lognormal cov must be > 0, got {cov}")
    zeta = math.sqrt(math.log1p(cov * cov))
    lam = math.log(mean) - 0.5 * zeta * zeta
    return lam, zeta


def gumbel_params(mean, cov):
    """Moment-matched ``(location, scale)`` of a max-type Gumbel distribution."""
    if not (cov > 0):
        raise InvalidParameter(f"gumbel cov must be > 0, got {cov}")
    if not (mean > 0):
        raise InvalidParameter(f"gumbel mean must be > 0 for a positive scale, got {mean}")
    scale = mean * cov * math.sqrt(6.0) / math.pi
    location = mean - EULER_GAMMA * scale
    return location, scale


@dataclass(frozen=True)
class Marginal:
    """One input variable.

    ``a`` and ``b`` hold the declared parameters: (lower, upper) for uniform,
    (mean, std) for gaussian, (mean, cov) for lognormal and gumbel.
    """

    family: str
    a: float
    b: float
    name: str = ""
    _p: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        fam = self.family.lower()
        object.__setattr__(self, "family", fam)
        if fam not in FAMILIES:
            raise InvalidParameter(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        a, b = float(self.a), float(self.b)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise InvalidParameter("marginal parameters must be finite")
        if fam == "uniform":
            if not b > a:
                raise InvalidParameter(f"uniform needs upper > lower, got ({a}, {b})")
            p = (a, b)
        elif fam == "gaussian":
            if not b > 0:
                raise InvalidParameter(f"gaussian std must be > 0, got {b}")
            p = (a, b)
        elif fam == "lognormal":
            p = lognormal_params(a, b)
        else:
            p = gumbel_params(a, b)
        object.__setattr__(self, "_p", p)

    # constructors -----------------------------------------------------------
    @classmethod
    def uniform(cls, lower, upper, name=""):
        return cls("uniform", lower, upper, name)

    @classmethod
    def gaussian(cls, mean, std, name=""):
        return cls("gaussian", mean, std, name)

    @classmethod
    def lognormal(cls, mean, cov, name=""):
        return cls("lognormal", mean, cov, name)

    @classmethod
    def gumbel(cls, mean, cov, name=""):
        return cls("gumbel", mean, cov, name)

    # properties -------------------------------------------------------------
    @property
    def params(self):
        """Internal parameters: bounds, (mean, std), (lambda, zeta) or (location, scale)."""
        return self._p

    @property
    def standard_family(self):
        return "legendre" if self.family == "uniform" else "hermite"

    @property
    def mean(self):
        if self.family == "uniform":
            return 0.5 * (self.a + self.b)
        return self.a

    @property
    def std(self):
        if self.family == "uniform":
            return (self.b - self.a) / math.sqrt(12.0)
        if self.family == "gaussian":
            return self.b
        return self.a * self.b

    # distribution functions -------------------------------------------------
    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        p1, p2 = self._p
        if self.family == "uniform":
            return np.clip((x - p1) / (p2 - p1), 0.0, 1.0)
        if self.family == "gaussian":
            return special.ndtr((x - p1) / p2)
        if self.family == "lognormal":
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(x > 0, special.ndtr((np.log(np.where(x > 0, x, 1.0)) - p1) / p2), 0.0)
        return np.exp(-np.exp(-(x - p1) / p2))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        p1, p2 = self._p
        if self.family == "uniform":
            return np.where((x >= p1) & (x <= p2), 1.0 / (p2 - p1), 0.0)
        if self.family == "gaussian":
            return np.exp(-0.5 * ((x - p1) / p2) ** 2) / (p2 * math.sqrt(2 * math.pi))
        if self.family == "lognormal":
            xs = np.where(x > 0, x, 1.0)
            val = np.exp(-0.5 * ((np.log(xs) - p1) / p2) ** 2) / (xs * p2 * math.sqrt(2 * math.pi))
            return np.where(x > 0, val, 0.0)
        t = (x - p1) / p2
        return np.exp(-t - np.exp(-t)) / p2

    def ppf(self, q):
        """Inverse CDF on (0, 1)."""
        q = np.asarray(q, dtype=float)
        if self.family == "uniform":
            p1, p2 = self._p
            return p1 + q * (p2 - p1)
        return self.from_standard(special.ndtri(q))

    # isoprobabilistic transform ---------------------------------------------
    def to_standard(self, x):
        x = np.asarray(x, dtype=float)
        p1, p2 = self._p
        if self.family == "uniform":
            width = p2 - p1
            if np.any(x < p1 - _SUPPORT_TOL * width) or np.any(x > p2 + _SUPPORT_TOL * width):
                raise OutOfSupport(f"{self.label()}: value outside [{p1}, {p2}]")
            u = 2.0 * (x - p1) / width - 1.0
        elif self.family == "gaussian":
            u = (x - p1) / p2
        elif self.family == "lognormal":
            if np.any(x <= 0):
                raise OutOfSupport(f"{self.label()}: lognormal value must be > 0")
            u = (np.log(x) - p1) / p2
        else:
            t = (x - p1) / p2
            with np.errstate(over="ignore"):
                log_cdf = -np.exp(-t)
            u = special.ndtri_exp(log_cdf)
        if not np.all(np.isfinite(u)):
            raise NonFinite(f"{self.label()}: transform to standard space is not finite")
        return u

    def from_standard(self, u):
        u = np.asarray(u, dtype=float)
        if not np.all(np.isfinite(u)):
            raise NonFinite(f"{self.label()}: standard value is not finite")
        p1, p2 = self._p
        if self.family == "uniform":
            if np.any(np.abs(u) > 1.0 + _SUPPORT_TOL):
                raise OutOfSupport(f"{self.label()}: standard uniform value outside [-1, 1]")
            x = p1 + 0.5 * (u + 1.0) * (p2 - p1)
        elif self.family == "gaussian":
            x = p1 + p2 * u
        elif self.family == "lognormal":
            with np.errstate(over="ignore"):
                x = np.exp(p1 + p2 * u)
        else:
            with np.errstate(divide="ignore"):
                x = p1 - p2 * np.log(-special.log_ndtr(u))
        if not np.all(np.isfinite(x)):
            raise NonFinite(f"{self.label()}: transform to physical space overflowed")
        return x

    def standard_from_unit(self, q):
        """Map a unit-hypercube coordinate straight to standard space."""
        q = np.asarray(q, dtype=float)
        if self.family == "uniform":
            return 2.0 * q - 1.0
        return special.ndtri(q)

    def label(self):
        return self.name or self.family

    def to_record(self):
        rec = {"name": self.name, "family": self.family}
        if self.family == "uniform":
            rec["bounds"] = [self.a, self.b]
        elif self.family == "gaussian":
            rec.update(mean=self.a, std=self.b)
        else:
            rec.update(mean=self.a, cov=self.b)
        return rec

    @classmethod
    def from_record(cls, rec):
        """Build from a config record ``{name, family, mean|bounds, cov|std}``."""
        fam = str(rec.get("family", "")).lower()
        name = str(rec.get("name", ""))
        try:
            if fam == "uniform":
                lo, hi = rec["bounds"]
                return cls.uniform(lo, hi, name)
            if fam == "gaussian":
                return cls.gaussian(rec["mean"], rec["std"], name)
            if fam in ("lognormal", "gumbel"):
                return cls(fam, rec["mean"], rec["cov"], name)
        except KeyError as exc:
            raise InvalidParameter(f"marginal {name or fam!r} is missing field {exc.args[0]!r}") from None
        raise InvalidParameter(f"marginal {name!r}: unknown family {rec.get('family')!r}")


class InputModel:
    """Ordered list of independent marginals."""

    def __init__(self, marginals: Sequence[Marginal]):
        marginals = tuple(marginals)
        if len(marginals) < 1:
            raise InvalidParameter("an input model needs at least one marginal")
        self.marginals = marginals

    def __len__(self):
        return len(self.marginals)

    def __iter__(self):
        return iter(self.marginals)

    def __getitem__(self, i):
        return self.marginals[i]

    def __eq__(self, other):
        return isinstance(other, InputModel) and self.marginals == other.marginals

    def __repr__(self):
        return f"InputModel({list(self.marginals)!r})"

    @property
    def dim(self):
        return len(self.marginals)

    @property
    def names(self):
        return [m.name or f"x{i + 1}" for i, m in enumerate(self.marginals)]

    @property
    def standard_families(self):
        return [m.standard_family for m in self.marginals]

    def _apply(self, method, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise InvalidParameter(f"expected last axis of length {self.dim}, got {x.shape[-1]}")
        out = np.empty_like(x)
        for i, m in enumerate(self.marginals):
            out[..., i] = getattr(m, method)(x[..., i])
        return out

    def to_standard(self, x):
        return self._apply("to_standard", x)

    def from_standard(self, u):
        return self._apply("from_standard", u)

    def from_unit(self, q):
        return self._apply("ppf", q)

    def standard_from_unit(self, q):
        return self._apply("standard_from_unit", q)

    def sample_standard(self, n, rng):
        """i.i.d. draws in standard space, shape (n, M)."""
        out = np.empty((n, self.dim))
        for i, m in enumerate(self.marginals):
            if m.standard_family == "legendre":
                out[:, i] = rng.uniform(-1.0, 1.0, n)
            else:
                out[:, i] = rng.standard_normal(n)
        return out

    def to_records(self):
        return [m.to_record() for m in self.marginals]

    @classmethod
    def from_records(cls, records):
        return cls([Marginal.from_record(r) for r in records])
