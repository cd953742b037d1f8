"""Distributions for the relevant eigen coordinates ``gamma_j``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence, Union

import numpy as np

from .errors import UnsupportedPrior

_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class Normal:
    mean: float
    sd: float
    analytic = True

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.sd)) or self.sd < 0:
            raise UnsupportedPrior(f"normal prior needs finite mean and sd >= 0, got {self}")

    @property
    def var(self) -> float:
        return self.sd * self.sd

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.mean + self.sd * rng.standard_normal(size)

    def cell_means(self, r: int) -> np.ndarray:
        # E[gamma | gamma in the i-th of r equal-probability cells]
        edges = [_STD_NORMAL.inv_cdf(i / r) for i in range(1, r)]
        dens = np.array([0.0] + [_STD_NORMAL.pdf(e) for e in edges] + [0.0])
        return self.mean + self.sd * r * (dens[:-1] - dens[1:])


@dataclass(frozen=True)
class PointMass:
    value: float
    analytic = True

    @property
    def mean(self) -> float:
        return self.value

    @property
    def var(self) -> float:
        return 0.0

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.full(size, float(self.value))

    def cell_means(self, r: int) -> np.ndarray:
        return np.full(r, float(self.value))


@dataclass(frozen=True)
class LogUniform:
    """Density proportional to ``1/gamma`` on ``[lo, hi]``.

    A proper stand-in for the improper scale-invariant measure
    ``d gamma / gamma``; widening ``hi/lo`` makes the variance unbounded.
    """

    lo: float
    hi: float
    analytic = False

    def __post_init__(self):
        if not (0 < self.lo < self.hi) or not math.isfinite(self.hi):
            raise UnsupportedPrior(f"log-uniform prior needs 0 < lo < hi < inf, got {self}")

    @property
    def _log_ratio(self) -> float:
        return math.log(self.hi / self.lo)

    @property
    def mean(self) -> float:
        return (self.hi - self.lo) / self._log_ratio

    @property
    def var(self) -> float:
        second = (self.hi**2 - self.lo**2) / (2 * self._log_ratio)
        return second - self.mean**2

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.lo * np.exp(self._log_ratio * rng.random(size))

    def cell_means(self, r: int) -> np.ndarray:
        edges = self.lo * (self.hi / self.lo) ** (np.arange(r + 1) / r)
        return r * np.diff(edges) / self._log_ratio


@dataclass(frozen=True)
class DiscreteUniform:
    """Equal probability on a finite set of values."""

    values: tuple[float, ...]
    analytic = True

    def __post_init__(self):
        if not self.values:
            raise UnsupportedPrior("discrete prior needs at least one value")
        object.__setattr__(self, "values", tuple(sorted(float(v) for v in self.values)))

    @property
    def mean(self) -> float:
        return math.fsum(self.values) / len(self.values)

    @property
    def var(self) -> float:
        mu = self.mean
        return math.fsum((v - mu) ** 2 for v in self.values) / len(self.values)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.asarray(self.values)[rng.integers(len(self.values), size=size)]

    def cell_means(self, r: int) -> np.ndarray:
        # integrate the quantile function over each cell [i/r, (i+1)/r)
        k = len(self.values)
        vals = np.asarray(self.values)
        out = np.empty(r)
        for i in range(r):
            lo, hi = i / r, (i + 1) / r
            acc = 0.0
            for l in range(k):
                overlap = min(hi, (l + 1) / k) - max(lo, l / k)
                if overlap > 0:
                    acc += overlap * vals[l]
            out[i] = acc * r
        return out


Component = Union[Normal, PointMass, LogUniform, DiscreteUniform]


@dataclass(frozen=True)
class GammaPrior:
    """Independent priors for ``gamma_1, ..., gamma_m``."""

    components: tuple[Component, ...]
    independent: bool = True

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def m(self) -> int:
        return len(self.components)

    @property
    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.components], dtype=float)

    @property
    def variances(self) -> np.ndarray:
        return np.array([c.var for c in self.components], dtype=float)

    @property
    def analytic(self) -> bool:
        return all(c.analytic for c in self.components)

    def require_supported(self) -> None:
        if not self.independent:
            raise UnsupportedPrior("only independent gamma_j priors are supported")
        for c in self.components:
            if not isinstance(c, (Normal, PointMass, LogUniform, DiscreteUniform)):
                raise UnsupportedPrior(f"unsupported prior component {c!r}")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draws as an array of shape ``(size, m)``."""
        return np.column_stack([c.sample(rng, size) for c in self.components])

    @classmethod
    def normal(cls, means: Sequence[float], sds: Sequence[float]) -> "GammaPrior":
        return cls(tuple(Normal(float(a), float(b)) for a, b in zip(means, sds)))

    @classmethod
    def point(cls, values: Sequence[float]) -> "GammaPrior":
        return cls(tuple(PointMass(float(v)) for v in values))

    @classmethod
    def from_dict(cls, d: dict) -> "GammaPrior":
        comps = []
        for c in d["components"]:
            kind = c.get("kind")
            if kind == "normal":
                comps.append(Normal(float(c["mean"]), float(c["sd"])))
            elif kind == "point":
                comps.append(PointMass(float(c["value"])))
            elif kind == "loguniform":
                comps.append(LogUniform(float(c["lo"]), float(c["hi"])))
            elif kind == "discrete":
                comps.append(DiscreteUniform(tuple(c["values"])))
            else:
                raise UnsupportedPrior(f"unknown prior kind {kind!r}")
        return cls(tuple(comps), bool(d.get("independent", True)))

    def to_dict(self) -> dict:
        out = []
        for c in self.components:
            if isinstance(c, Normal):
                out.append({"kind": "normal", "mean": c.mean, "sd": c.sd})
            elif isinstance(c, PointMass):
                out.append({"kind": "point", "value": c.value})
            elif isinstance(c, LogUniform):
                out.append({"kind": "loguniform", "lo": c.lo, "hi": c.hi})
            else:
                out.append({"kind": "discrete", "values": list(c.values)})
        return {"components": out, "independent": self.independent}
