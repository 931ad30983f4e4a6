"""Parameter containers and conditional-variance filters for GARCH and GJR models.

The filtered variance follows the truncated ARCH(inf) expansion: pre-sample
observations are treated as zero and pre-sample variances as the expansion
intercept ``omega / (1 - sum(beta))``, so the O(n) recursion reproduces the
truncated-series definition exactly.  The linear recursions (variance and its
parameter gradient) are evaluated with ``scipy.signal.lfilter``, i.e. the
forward recursion executed in C.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.signal import lfilter

from .errors import (
    DimensionMismatch,
    NonFiniteInput,
    NonPositiveParameter,
    NonPositiveVariance,
    NonStationary,
    UnsupportedSpec,
)


class Family(Enum):
    GARCH = "garch"
    GJR = "gjr"


@dataclass(frozen=True)
class ModelSpec:
    """Model family and lag orders (p ARCH lags, q variance lags)."""

    family: Family = Family.GARCH
    p: int = 1
    q: int = 1

    def __post_init__(self) -> None:
        if self.p < 1 or self.q < 1:
            raise DimensionMismatch(f"orders must satisfy p >= 1, q >= 1, got p={self.p}, q={self.q}")

    @property
    def n_params(self) -> int:
        per_lag = 2 if self.family is Family.GJR else 1
        return 1 + per_lag * self.p + self.q

    @property
    def param_names(self) -> list[str]:
        names = ["omega"]
        names += [f"alpha{i}" for i in range(1, self.p + 1)]
        if self.family is Family.GJR:
            names += [f"gamma{i}" for i in range(1, self.p + 1)]
        names += [f"beta{j}" for j in range(1, self.q + 1)]
        return names


@dataclass(frozen=True)
class ParamVector:
    """Parameter point laid out as (omega, alpha_1..p, [gamma_1..p,] beta_1..q)."""

    values: np.ndarray
    spec: ModelSpec = field(default_factory=ModelSpec)

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float).reshape(-1).copy()
        if arr.size != self.spec.n_params:
            raise DimensionMismatch(
                f"expected {self.spec.n_params} components for {self.spec.family.value}"
                f"({self.spec.p},{self.spec.q}), got {arr.size}"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @classmethod
    def garch(cls, omega: float, alpha, beta) -> "ParamVector":
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        beta = np.atleast_1d(np.asarray(beta, dtype=float))
        spec = ModelSpec(Family.GARCH, alpha.size, beta.size)
        return cls(np.concatenate(([omega], alpha, beta)), spec)

    @classmethod
    def gjr(cls, omega: float, alpha, gamma, beta) -> "ParamVector":
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
        beta = np.atleast_1d(np.asarray(beta, dtype=float))
        if gamma.size != alpha.size:
            raise DimensionMismatch("gamma must have one component per ARCH lag")
        spec = ModelSpec(Family.GJR, alpha.size, beta.size)
        return cls(np.concatenate(([omega], alpha, gamma, beta)), spec)

    def with_values(self, values) -> "ParamVector":
        return ParamVector(np.asarray(values, dtype=float), self.spec)

    @property
    def omega(self) -> float:
        return float(self.values[0])

    @property
    def alpha(self) -> np.ndarray:
        return self.values[1 : 1 + self.spec.p]

    @property
    def gamma(self) -> np.ndarray:
        if self.spec.family is not Family.GJR:
            return np.zeros(self.spec.p)
        return self.values[1 + self.spec.p : 1 + 2 * self.spec.p]

    @property
    def beta(self) -> np.ndarray:
        return self.values[self.spec.n_params - self.spec.q :]

    def rescaled(self, scale: float) -> "ParamVector":
        """Divide omega and the ARCH-block components (alpha, gamma) by ``scale``."""
        out = self.values.copy()
        n_arch = 1 + (2 if self.spec.family is Family.GJR else 1) * self.spec.p
        out[:n_arch] /= scale
        return self.with_values(out)


def validate_params(theta: ParamVector, require_stationary: bool = False) -> ParamVector:
    """Check positivity and (optionally) second-order stationarity of a parameter point.

    The sum of the beta components must be below one unconditionally, because
    the variance-expansion intercept omega / (1 - sum(beta)) has to be finite
    and positive.  With ``require_stationary`` the second-order condition
    sum(alpha) + sum(beta) < 1 (GARCH) or sum(alpha + gamma/2) + sum(beta) < 1
    (GJR, symmetric-innovation convention) is enforced as well.
    """
    v = theta.values
    if not np.all(np.isfinite(v)):
        raise NonFiniteInput("parameter vector contains non-finite components")
    if np.any(v <= 0.0):
        bad = theta.spec.param_names[int(np.argmax(v <= 0.0))]
        raise NonPositiveParameter(f"component {bad} = {v[np.argmax(v <= 0.0)]:g} is not strictly positive")
    bsum = float(theta.beta.sum())
    if bsum >= 1.0:
        raise NonStationary(f"sum(beta) = {bsum:g} >= 1")
    if require_stationary:
        load = float(theta.alpha.sum()) + bsum
        if theta.spec.family is Family.GJR:
            load += 0.5 * float(theta.gamma.sum())
        if load >= 1.0:
            raise NonStationary(f"persistence {load:g} >= 1")
    return theta


def unconditional_variance(theta: ParamVector) -> float:
    """Stationary second moment omega / (1 - sum(alpha) - [sum(gamma)/2] - sum(beta))."""
    validate_params(theta, require_stationary=True)
    load = float(theta.alpha.sum()) + float(theta.beta.sum())
    if theta.spec.family is Family.GJR:
        load += 0.5 * float(theta.gamma.sum())
    return theta.omega / (1.0 - load)


def expansion_coefficients(theta: ParamVector, j_max: int) -> np.ndarray:
    """ARCH(inf) expansion coefficients c_0..c_jmax of a GARCH(1,1) point.

    c_0 = omega / (1 - beta) and c_j = alpha * beta**(j-1); serves as an
    independent oracle for the variance filter.
    """
    if theta.spec.family is not Family.GARCH or theta.spec.p != 1 or theta.spec.q != 1:
        raise UnsupportedSpec("closed-form expansion implemented for GARCH(1,1) only")
    validate_params(theta)
    omega, alpha, beta = theta.omega, float(theta.alpha[0]), float(theta.beta[0])
    coef = np.empty(j_max + 1)
    coef[0] = omega / (1.0 - beta)
    if j_max >= 1:
        coef[1:] = alpha * beta ** np.arange(j_max)
    return coef


def _check_series(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size < 1:
        raise NonFiniteInput("series must contain at least one observation")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("series contains non-finite values")
    return x


def _arch_input(theta: ParamVector, x: np.ndarray) -> np.ndarray:
    """Direct (beta-free) part of the variance recursion, pre-sample x = 0."""
    n = x.size
    z = x * x
    u = np.full(n, theta.omega)
    alpha, gamma = theta.alpha, theta.gamma
    zneg = z * (x < 0.0) if theta.spec.family is Family.GJR else None
    for i in range(1, theta.spec.p + 1):
        if i >= n + 1:
            break
        u[i:] += alpha[i - 1] * z[: n - i]
        if zneg is not None:
            u[i:] += gamma[i - 1] * zneg[: n - i]
    return u


_B_ONE = np.ones(1)


def _ar_filter(u: np.ndarray, beta: np.ndarray, past: float) -> np.ndarray:
    """Run y_t = u_t + sum_j beta_j y_{t-j} with y_s = past for all s <= 0."""
    a = np.concatenate(([1.0], -beta))
    # initial delay states of the transposed direct form: state m carries
    # sum_{j>m} beta_j * past
    zi = past * np.cumsum(beta[::-1])[::-1]
    y, _ = lfilter(_B_ONE, a, u, zi=zi)
    return y


def filter_variance(theta: ParamVector, x) -> np.ndarray:
    """Filtered conditional variances under the truncated-expansion convention."""
    validate_params(theta)
    x = _check_series(x)
    c0 = theta.omega / (1.0 - float(theta.beta.sum()))
    v = _ar_filter(_arch_input(theta, x), theta.beta, c0)
    if not np.all(np.isfinite(v)) or v.min() <= 0.0:
        raise NonPositiveVariance("variance filter left the positive region")
    return v


def filter_variance_gradient(theta: ParamVector, x) -> tuple[np.ndarray, np.ndarray]:
    """Filtered variances and their exact parameter gradient (n x m matrix).

    Columns follow the parameter layout.  Each column solves the recursion
    obtained by differentiating the variance recursion, seeded with the
    derivative of the pre-sample intercept.
    """
    validate_params(theta)
    x = _check_series(x)
    n, spec = x.size, theta.spec
    beta = theta.beta
    one_minus_b = 1.0 - float(beta.sum())
    c0 = theta.omega / one_minus_b
    v = _ar_filter(_arch_input(theta, x), beta, c0)
    if not np.all(np.isfinite(v)) or v.min() <= 0.0:
        raise NonPositiveVariance("variance filter left the positive region")

    z = x * x
    grad = np.empty((n, spec.n_params))
    # the omega column starts at its fixed point 1/(1-sum beta) and stays there
    grad[:, 0] = 1.0 / one_minus_b
    col = 1
    for i in range(1, spec.p + 1):
        u = np.zeros(n)
        if i < n + 1:
            u[i:] = z[: n - i]
        grad[:, col] = _ar_filter(u, beta, 0.0)
        col += 1
    if spec.family is Family.GJR:
        zneg = z * (x < 0.0)
        for i in range(1, spec.p + 1):
            u = np.zeros(n)
            if i < n + 1:
                u[i:] = zneg[: n - i]
            grad[:, col] = _ar_filter(u, beta, 0.0)
            col += 1
    dc0_dbeta = theta.omega / one_minus_b**2
    for k in range(1, spec.q + 1):
        u = np.full(n, c0)
        if k < n + 1:
            u[k:] = v[: n - k]
        grad[:, col] = _ar_filter(u, beta, dc0_dbeta)
        col += 1
    return v, grad


def residuals(theta: ParamVector, x) -> np.ndarray:
    """Rescaled observations x_t / sqrt(v_t) used for ranking."""
    x = _check_series(x)
    return x / np.sqrt(filter_variance(theta, x))
