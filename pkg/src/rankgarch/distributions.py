"""Standardized (mean-0, variance-1) innovation distributions.

Sampling uses numpy Generator primitives so that paths are reproducible for a
fixed seed independent of the scipy version; densities, CDFs and quantiles
come from the corresponding scipy frozen distributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DomainError, InfiniteFourthMoment, InvalidDf

_KINDS = ("normal", "de", "logistic", "t", "skewnormal")


@dataclass(frozen=True)
class Innovation:
    """One of the supported innovation families, already scaled to unit variance."""

    kind: str
    df: float | None = None
    shape: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise DomainError(f"unknown innovation family {self.kind!r}; choose from {_KINDS}")
        if self.kind == "t":
            if self.df is None or self.df <= 2.0:
                raise InvalidDf("Student-t innovations need df > 2 for a finite variance")
        if self.kind == "skewnormal" and self.shape is None:
            raise DomainError("skew-normal innovations need a shape parameter")

    @property
    def name(self) -> str:
        if self.kind == "t":
            return f"t({self.df:g})"
        if self.kind == "skewnormal":
            return f"skewnormal({self.shape:g})"
        return self.kind

    def _skew_consts(self) -> tuple[float, float, float]:
        delta = self.shape / math.sqrt(1.0 + self.shape**2)
        mean = delta * math.sqrt(2.0 / math.pi)
        sd = math.sqrt(1.0 - 2.0 * delta**2 / math.pi)
        return delta, mean, sd

    def frozen(self):
        """Scipy frozen distribution of the standardized variable."""
        if self.kind == "normal":
            return stats.norm()
        if self.kind == "de":
            return stats.laplace(scale=1.0 / math.sqrt(2.0))
        if self.kind == "logistic":
            return stats.logistic(scale=math.sqrt(3.0) / math.pi)
        if self.kind == "t":
            return stats.t(self.df, scale=1.0 / math.sqrt(self.df / (self.df - 2.0)))
        delta, mean, sd = self._skew_consts()
        return stats.skewnorm(self.shape, loc=-mean / sd, scale=1.0 / sd)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "normal":
            return rng.standard_normal(size)
        if self.kind == "de":
            return rng.laplace(0.0, 1.0 / math.sqrt(2.0), size)
        if self.kind == "logistic":
            return rng.logistic(0.0, math.sqrt(3.0) / math.pi, size)
        if self.kind == "t":
            return rng.standard_t(self.df, size) / math.sqrt(self.df / (self.df - 2.0))
        delta, mean, sd = self._skew_consts()
        z = rng.standard_normal((2, size))
        raw = delta * np.abs(z[0]) + math.sqrt(1.0 - delta**2) * z[1]
        return (raw - mean) / sd

    def pdf(self, x):
        return self.frozen().pdf(x)

    def cdf(self, x):
        return self.frozen().cdf(x)

    def ppf(self, u):
        return self.frozen().ppf(u)

    def fourth_moment(self) -> float:
        """E eps^4 of the standardized variable; raises when infinite."""
        if self.kind == "normal":
            return 3.0
        if self.kind == "de":
            return 6.0
        if self.kind == "logistic":
            return 4.2
        if self.kind == "t":
            if self.df <= 4.0:
                raise InfiniteFourthMoment(f"t({self.df:g}) has no finite fourth moment")
            return 3.0 * (self.df - 2.0) / (self.df - 4.0)
        _, mean, sd = self._skew_consts()
        excess = 2.0 * (math.pi - 3.0) * mean**4 / sd**4
        return 3.0 + excess


def normal() -> Innovation:
    return Innovation("normal")


def double_exponential() -> Innovation:
    return Innovation("de")


def logistic() -> Innovation:
    return Innovation("logistic")


def student_t(df: float) -> Innovation:
    return Innovation("t", df=float(df))


def skew_normal(shape: float) -> Innovation:
    return Innovation("skewnormal", shape=float(shape))


def from_name(name: str, df: float | None = None, shape: float | None = None) -> Innovation:
    """Build an Innovation from a CLI-style name (normal|de|logistic|t|skewnormal)."""
    name = name.lower()
    if name == "t":
        if df is None:
            raise DomainError("t innovations need --df")
        return student_t(df)
    if name == "skewnormal":
        return skew_normal(5.0 if shape is None else shape)
    return Innovation(name)
