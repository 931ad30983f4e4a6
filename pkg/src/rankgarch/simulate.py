"""Sample-path generation for GARCH and GJR processes with reproducible seeding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import Innovation
from .errors import NonStationary, UnsupportedSpec
from .model import Family, ParamVector, validate_params

DEFAULT_BURNIN = 500


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for stream(seed, *key); stable across runs and schedules."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key)))


def child_seed(seed: int, *key: int) -> int:
    """Collapse stream(seed, *key) to a single integer seed for nested drivers."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class SimSpec:
    """Everything needed to generate one path."""

    theta0: ParamVector
    n: int
    dist: Innovation
    seed: int
    burnin: int = DEFAULT_BURNIN

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.burnin < 0:
            raise ValueError("burnin must be nonnegative")


def _persistence(theta: ParamVector) -> float:
    load = float(theta.alpha.sum()) + float(theta.beta.sum())
    if theta.spec.family is Family.GJR:
        load += 0.5 * float(theta.gamma.sum())
    return load


def _simulate_path(spec: SimSpec, allow_nonstationary: bool) -> np.ndarray:
    theta = spec.theta0
    validate_params(theta)
    load = _persistence(theta)
    if load >= 1.0:
        if not allow_nonstationary:
            raise NonStationary(f"persistence {load:g} >= 1; pass allow_nonstationary to simulate anyway")
        start = theta.omega / (1.0 - float(theta.beta.sum()))
    else:
        start = theta.omega / (1.0 - load)

    p, q = theta.spec.p, theta.spec.q
    omega = theta.omega
    alpha = theta.alpha
    gamma = theta.gamma if theta.spec.family is Family.GJR else np.zeros(p)
    beta = theta.beta

    total = spec.burnin + spec.n
    eps = spec.dist.sample(derive_rng(spec.seed), total)
    x = np.empty(total)
    sig2 = np.empty(total)
    for t in range(total):
        s = omega
        for i in range(1, p + 1):
            if t - i >= 0:
                xi = x[t - i]
                s += (alpha[i - 1] + gamma[i - 1] * (xi < 0.0)) * xi * xi
            else:
                # pre-sample squared return at its stationary mean, sign unknown
                s += (alpha[i - 1] + 0.5 * gamma[i - 1]) * start
        for j in range(1, q + 1):
            s += beta[j - 1] * (sig2[t - j] if t - j >= 0 else start)
        sig2[t] = s
        x[t] = np.sqrt(s) * eps[t]
    return x[spec.burnin :]


def simulate_garch(spec: SimSpec, allow_nonstationary: bool = False) -> np.ndarray:
    """Generate a GARCH path of length n (after discarding the burn-in)."""
    if spec.theta0.spec.family is not Family.GARCH:
        raise UnsupportedSpec("simulate_garch needs a GARCH parameter point; use simulate_gjr")
    return _simulate_path(spec, allow_nonstationary)


def simulate_gjr(spec: SimSpec, allow_nonstationary: bool = False) -> np.ndarray:
    """Generate a GJR path; with gamma = 0 it reproduces the GARCH path bit for bit."""
    if spec.theta0.spec.family is not Family.GJR:
        raise UnsupportedSpec("simulate_gjr needs a GJR parameter point; use simulate_garch")
    return _simulate_path(spec, allow_nonstationary)


def simulate(spec: SimSpec, allow_nonstationary: bool = False) -> np.ndarray:
    """Family-dispatching path generator."""
    return _simulate_path(spec, allow_nonstationary)
