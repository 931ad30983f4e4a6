"""Weighted bootstrap for the rank estimator: exchangeable weights, replicates,
and percentile confidence intervals.

Each replicate restarts the one-step iteration at the fitted raw point with
the estimating-equation terms multiplied by exchangeable weights (the Newton
matrix stays unweighted by default), then divides the intercept/ARCH block by
the original fit's scale.  Replicate deviations are divided by the standard
deviation of the weights before the equal-tailed percentile intervals are
formed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    ExcessiveFailures,
    InsufficientReplicates,
    NonFiniteStep,
    SingularInformation,
)
from .estimators import MAX_HALVINGS, FitResult, _clamp, _in_region, _solve_newton
from .model import ParamVector, _check_series, filter_variance_gradient
from .scores import Score, compute_ranks, score_eval
from .simulate import derive_rng

FAILURE_SHARE_LIMIT = 0.10


class WeightScheme(Enum):
    """Multinomial counts (M), normalized exponentials (E), normalized uniforms (U)."""

    M = "m"
    E = "e"
    U = "u"

    @classmethod
    def from_name(cls, name: str) -> "WeightScheme":
        return cls(name.lower())


def draw_weights(scheme: WeightScheme, n: int, rng: np.random.Generator) -> np.ndarray:
    """One exchangeable weight vector of length n (mean one; E/U sum to n exactly)."""
    if n < 2:
        raise ValueError("need n >= 2 weights")
    if scheme is WeightScheme.M:
        return rng.multinomial(n, np.full(n, 1.0 / n)).astype(float)
    if scheme is WeightScheme.E:
        raw = rng.exponential(1.0, n)
    else:
        raw = rng.uniform(0.5, 1.5, n)
    return n * raw / raw.sum()


def weight_variance(scheme: WeightScheme, n: int | None = None, weights=None) -> float:
    """Var(w_1): theoretical per scheme, or the sample variance of a drawn vector."""
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        return float(np.var(w, ddof=1))
    if n is None:
        raise ValueError("theoretical mode needs n")
    if scheme is WeightScheme.M:
        return 1.0 - 1.0 / n
    if scheme is WeightScheme.E:
        return 1.0
    return 1.0 / 12.0


def weighted_central_sequence(theta: ParamVector, x, score: Score, weights) -> np.ndarray:
    """Weighted analogue of the rank estimating vector (weights multiply each summand)."""
    x = _check_series(x)
    w = np.asarray(weights, dtype=float)
    if w.size != x.size:
        raise ValueError("need one weight per observation")
    _, b_vec = _weighted_terms(theta, x, score, w, weighted_info=False)
    return b_vec / math.sqrt(x.size)


def _weighted_terms(
    theta: ParamVector, x: np.ndarray, score: Score, w: np.ndarray, weighted_info: bool
) -> tuple[np.ndarray, np.ndarray]:
    v, dv = filter_variance_gradient(theta, x)
    sqrt_v = np.sqrt(v)
    ranks = compute_ranks(x / sqrt_v)
    phi = score_eval(score, ranks / (x.size + 1.0))
    resid_term = 1.0 - phi * x / sqrt_v
    dlogv = dv / v[:, None]
    if weighted_info:
        a_mat = (dlogv * w[:, None]).T @ dlogv
    else:
        a_mat = dlogv.T @ dlogv
    b_vec = dlogv.T @ (w * resid_term)
    return a_mat, b_vec


def _weighted_one_step(
    theta: ParamVector, x: np.ndarray, score: Score, w: np.ndarray, rho: float, weighted_info: bool
) -> ParamVector:
    a_mat, b_vec = _weighted_terms(theta, x, score, w, weighted_info)
    step = _solve_newton(a_mat, b_vec) * (2.0 / (1.0 + rho))
    for _ in range(MAX_HALVINGS + 1):
        candidate = theta.values - step
        if _in_region(candidate, theta.spec):
            return theta.with_values(candidate)
        step = 0.5 * step
    return theta.with_values(_clamp(theta.values - step, theta.spec))


def bootstrap_replicate(
    theta_raw: ParamVector,
    x,
    score: Score,
    weights,
    k_star: int,
    scale: float,
    rho: float = 1.0,
    weighted_info: bool = False,
) -> ParamVector:
    """One bootstrap replicate: k_star weighted updates from the fitted raw point,
    then rescaling by the original fit's scale."""
    x = _check_series(x)
    w = np.asarray(weights, dtype=float)
    theta = theta_raw
    for _ in range(k_star):
        theta = _weighted_one_step(theta, x, score, w, rho, weighted_info)
    return theta.rescaled(scale)


@dataclass
class BootstrapRun:
    """Replicate matrix plus everything needed to rebuild it."""

    replicates: np.ndarray  # (n_kept, m) rescaled replicate estimates
    theta_hat: ParamVector  # point estimate the intervals re-center on
    scheme: WeightScheme
    weight_sd: float  # sd of the weights used to rescale deviations
    n_boot: int
    k_star: int
    master_seed: int
    stream_keys: list[int]  # spawn keys of the surviving replicates
    failed: list[int]  # spawn keys of dropped replicates
    sigma_mode: str = "theoretical"


def bootstrap_distribution(
    fit: FitResult,
    x,
    score: Score,
    scheme: WeightScheme,
    n_boot: int,
    k_star: int = 3,
    seed: int = 0,
    sigma_mode: str = "theoretical",
    rho: float = 1.0,
    weighted_info: bool = False,
) -> BootstrapRun:
    """Full bootstrap run: n_boot independent weight draws from streams
    derived as stream(seed, index), replicates computed in index order."""
    if n_boot < 1:
        raise InsufficientReplicates("need at least one replicate")
    if sigma_mode not in ("theoretical", "empirical"):
        raise ValueError("sigma_mode must be 'theoretical' or 'empirical'")
    x = _check_series(x)
    n = x.size
    rows: list[np.ndarray] = []
    kept: list[int] = []
    failed: list[int] = []
    emp_vars: list[float] = []
    for b in range(n_boot):
        w = draw_weights(scheme, n, derive_rng(seed, b))
        try:
            rep = bootstrap_replicate(fit.theta_raw, x, score, w, k_star, fit.scale, rho, weighted_info)
        except (SingularInformation, NonFiniteStep):
            failed.append(b)
            continue
        rows.append(rep.values)
        kept.append(b)
        if sigma_mode == "empirical":
            emp_vars.append(weight_variance(scheme, weights=w))
    if len(failed) > FAILURE_SHARE_LIMIT * n_boot:
        raise ExcessiveFailures(f"{len(failed)} of {n_boot} bootstrap replicates failed")
    if sigma_mode == "empirical":
        var = float(np.mean(emp_vars))
    else:
        var = weight_variance(scheme, n)
    return BootstrapRun(
        replicates=np.array(rows),
        theta_hat=fit.theta,
        scheme=scheme,
        weight_sd=math.sqrt(var),
        n_boot=n_boot,
        k_star=k_star,
        master_seed=seed,
        stream_keys=kept,
        failed=failed,
        sigma_mode=sigma_mode,
    )


def confidence_intervals(run: BootstrapRun, levels) -> dict[float, np.ndarray]:
    """Equal-tailed percentile intervals per parameter and level.

    Deviations (replicate - estimate) are divided by the weight sd; the
    interval at level l is [est - q_{(1+l)/2}, est - q_{(1-l)/2}] of those
    rescaled deviations, re-centered at the estimate.
    """
    n_kept = run.replicates.shape[0]
    if n_kept < 20:
        raise InsufficientReplicates(f"only {n_kept} surviving replicates; need at least 20")
    if n_kept < 100:
        warnings.warn("fewer than 100 bootstrap replicates; intervals will be noisy", RuntimeWarning)
    est = run.theta_hat.values
    dev = (run.replicates - est) / run.weight_sd
    out: dict[float, np.ndarray] = {}
    for level in levels:
        if not 0.0 < level < 1.0:
            raise ValueError("levels must lie in (0, 1)")
        lo_q = np.quantile(dev, (1.0 + level) / 2.0, axis=0)
        hi_q = np.quantile(dev, (1.0 - level) / 2.0, axis=0)
        out[float(level)] = np.column_stack((est - lo_q, est - hi_q))
    return out
