"""Rank-based one-step estimation for GARCH/GJR, with QMLE and LAD baselines.

The rank estimator iterates Newton-type updates of the form

    theta <- theta - (2 / (1 + rho)) * A(theta)^{-1} b(theta),

where A is the sum of outer products vdot vdot' / v^2 and b sums the per-
observation terms (vdot / v) * (1 - score(rank/(n+1)) * x / sqrt(v)).  The
raw solution lives on a score-dependent scale; the second-moment identity of
the stationary model backs out the scale so omega and the ARCH-block
components can be brought to the model scale.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .errors import (
    DegenerateSeries,
    ExplosiveBeta,
    InitFailed,
    NonFiniteStep,
    OptimFailed,
    SingularInformation,
)
from .model import (
    Family,
    ModelSpec,
    ParamVector,
    _check_series,
    filter_variance,
    filter_variance_gradient,
)
from .scores import Score, compute_ranks, score_eval

MAX_CONDITION = 1e12
OMEGA_FLOOR = 1e-12
BETA_FLOOR = 1e-6
BETA_CEIL = 1.0 - 1e-6
MAX_HALVINGS = 10


@dataclass
class FitConfig:
    """Settings for the rank-based fit."""

    score: Score = Score.VDW
    init: str | ParamVector = "qmle"  # "qmle" | "lad" | "moment" | explicit point
    max_iter: int = 50
    tol: float = 1e-8
    rho: float = 1.0  # convention for the score-dependent step factor 2/(1+rho)

    def __post_init__(self) -> None:
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")


@dataclass
class FitResult:
    """Estimator output: raw point, scale, rescaled point and iteration trace."""

    theta_raw: ParamVector
    scale: float
    theta: ParamVector
    iterations: int
    converged: bool
    step_norms: list[float] = field(default_factory=list)
    method: str = ""


def _score_terms(theta: ParamVector, x: np.ndarray, score: Score) -> tuple[np.ndarray, np.ndarray]:
    """Newton building blocks: A = sum vdot vdot'/v^2 and the estimating-equation sum b."""
    v, dv = filter_variance_gradient(theta, x)
    sqrt_v = np.sqrt(v)
    ranks = compute_ranks(x / sqrt_v)
    phi = score_eval(score, ranks / (x.size + 1.0))
    resid_term = 1.0 - phi * x / sqrt_v
    dlogv = dv / v[:, None]
    a_mat = dlogv.T @ dlogv
    b_vec = dlogv.T @ resid_term
    return a_mat, b_vec


def rank_central_sequence(theta: ParamVector, x, score: Score) -> np.ndarray:
    """Rank-based estimating vector n^{-1/2} sum (vdot/v) (1 - score(rank/(n+1)) x/sqrt(v))."""
    x = _check_series(x)
    _, b_vec = _score_terms(theta, x, score)
    return b_vec / math.sqrt(x.size)


def information_matrix(theta: ParamVector, x) -> np.ndarray:
    """Plug-in information matrix n^{-1} sum vdot vdot' / v^2 (symmetric PSD)."""
    x = _check_series(x)
    v, dv = filter_variance_gradient(theta, x)
    dlogv = dv / v[:, None]
    return dlogv.T @ dlogv / x.size


def _solve_newton(a_mat: np.ndarray, b_vec: np.ndarray) -> np.ndarray:
    if not (np.all(np.isfinite(a_mat)) and np.all(np.isfinite(b_vec))):
        raise NonFiniteStep("non-finite Newton system")
    diag = np.diag(a_mat)
    if np.any(diag <= 0.0):
        raise SingularInformation("information matrix has a nonpositive diagonal")
    # Jacobi equilibration: the raw matrix mixes parameter units (omega is
    # orders of magnitude below beta), so condition is checked scale-free.
    d = 1.0 / np.sqrt(diag)
    scaled = a_mat * d[:, None] * d[None, :]
    eig = np.linalg.eigvalsh(scaled)
    if eig[0] <= 0.0 or eig[-1] / eig[0] > MAX_CONDITION:
        cond = math.inf if eig[0] <= 0.0 else eig[-1] / eig[0]
        raise SingularInformation(f"information matrix condition number {cond:.3g} exceeds {MAX_CONDITION:g}")
    try:
        cho = linalg.cho_factor(scaled, check_finite=False)
        step = d * linalg.cho_solve(cho, b_vec * d, check_finite=False)
    except linalg.LinAlgError as exc:
        raise SingularInformation(str(exc)) from None
    if not np.all(np.isfinite(step)):
        raise NonFiniteStep("Newton step contains non-finite components")
    return step


def _in_region(values: np.ndarray, spec: ModelSpec) -> bool:
    q = spec.q
    arch = values[: values.size - q]
    beta = values[values.size - q :]
    return (
        bool(np.all(arch >= OMEGA_FLOOR))
        and bool(np.all(beta >= BETA_FLOOR))
        and bool(np.all(beta <= BETA_CEIL))
        and float(beta.sum()) <= BETA_CEIL
    )


def _clamp(values: np.ndarray, spec: ModelSpec) -> np.ndarray:
    out = values.copy()
    q = spec.q
    out[: out.size - q] = np.maximum(out[: out.size - q], OMEGA_FLOOR)
    beta = np.clip(out[out.size - q :], BETA_FLOOR, BETA_CEIL)
    bsum = float(beta.sum())
    if bsum > BETA_CEIL:
        beta *= BETA_CEIL / bsum
    out[out.size - q :] = beta
    return out


def one_step_update(
    theta: ParamVector, x, score: Score, rho: float = 1.0, damping: float = 1.0
) -> ParamVector:
    """One Newton-type update of the rank estimating equation, kept inside the
    admissible region by step halving (at most 10) and a final clamp."""
    x = _check_series(x)
    a_mat, b_vec = _score_terms(theta, x, score)
    step = _solve_newton(a_mat, b_vec) * (2.0 / (1.0 + rho)) * damping
    for _ in range(MAX_HALVINGS + 1):
        candidate = theta.values - step
        if _in_region(candidate, theta.spec):
            return theta.with_values(candidate)
        step = 0.5 * step
    return theta.with_values(_clamp(theta.values - step, theta.spec))


def estimate_scale(theta_raw: ParamVector, x) -> float:
    """Scale carried by a raw estimate, from the stationary second-moment identity.

    GARCH: (omega / mean(x^2) + sum(alpha)) / (1 - sum(beta)).  For GJR the
    ARCH load includes sum(gamma)/2 (negative shocks hit half the time under
    symmetric innovations), which keeps the estimator consistent there.
    """
    x = _check_series(x)
    xbar2 = float(np.mean(x * x))
    if xbar2 <= 0.0:
        raise DegenerateSeries("mean squared return is zero; scale undefined")
    bsum = float(theta_raw.beta.sum())
    if bsum >= 1.0:
        raise ExplosiveBeta(f"sum(beta) = {bsum:g} >= 1")
    arch_load = float(theta_raw.alpha.sum())
    if theta_raw.spec.family is Family.GJR:
        arch_load += 0.5 * float(theta_raw.gamma.sum())
    return (theta_raw.omega / xbar2 + arch_load) / (1.0 - bsum)


def intercept_from_ratios(arch_ratios, beta, xbar2: float) -> float:
    """Back out the intercept for estimators parameterized by (alpha/omega, beta).

    Returns (1 + sum(a_i) * xbar2)^{-1} (1 - sum(beta)) * xbar2 where a_i are
    the estimated alpha/omega ratios and xbar2 the sample second moment.
    """
    arch_ratios = np.atleast_1d(np.asarray(arch_ratios, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if xbar2 <= 0.0 or not np.all(np.isfinite(arch_ratios)) or not np.all(np.isfinite(beta)):
        raise DegenerateSeries("intercept back-out needs finite inputs and xbar2 > 0")
    bsum = float(beta.sum())
    if bsum >= 1.0:
        raise ExplosiveBeta(f"sum(beta) = {bsum:g} >= 1")
    return (1.0 - bsum) * xbar2 / (1.0 + float(arch_ratios.sum()) * xbar2)


def moment_start(x, spec: ModelSpec) -> ParamVector:
    """Crude start: persistence split 0.1 ARCH / 0.85 variance lags."""
    x = _check_series(x)
    xbar2 = float(np.mean(x * x))
    if xbar2 <= 0.0:
        raise DegenerateSeries("all-zero series")
    omega = 0.1 * xbar2 * (1.0 - 0.85)
    alpha = np.full(spec.p, 0.1 / spec.p)
    beta = np.full(spec.q, 0.85 / spec.q)
    if spec.family is Family.GJR:
        gamma = np.full(spec.p, 0.05 / spec.p)
        return ParamVector.gjr(omega, alpha, gamma, beta)
    return ParamVector.garch(omega, alpha, beta)


_LOG_BOUNDS_OMEGA = (-80.0, 40.0)
_LOG_BOUNDS_ARCH = (-30.0, 3.0)
_LOG_BOUNDS_BETA = (-20.0, math.log(BETA_CEIL))


def _log_bounds(spec: ModelSpec) -> list[tuple[float, float]]:
    bounds = [_LOG_BOUNDS_OMEGA]
    bounds += [_LOG_BOUNDS_ARCH] * (spec.n_params - 1 - spec.q)
    bounds += [_LOG_BOUNDS_BETA] * spec.q
    return bounds


def _projected_grad_norm(jac: np.ndarray, u: np.ndarray, bounds) -> float:
    g = np.asarray(jac, dtype=float).copy()
    for k, (lo, hi) in enumerate(bounds):
        if u[k] <= lo + 1e-12 and g[k] > 0.0:
            g[k] = 0.0
        if u[k] >= hi - 1e-12 and g[k] < 0.0:
            g[k] = 0.0
    return float(np.max(np.abs(g)))


def fit_qmle(x, spec: ModelSpec | None = None, init: ParamVector | None = None) -> FitResult:
    """Gaussian quasi-maximum likelihood fit.

    Minimizes mean(log v_t + x_t^2 / v_t) by L-BFGS-B on log-parameters with
    the exact gradient; converged means the projected gradient (log scale)
    dropped below 1e-6.  The result needs no rescaling (scale = 1).
    """
    x = _check_series(x)
    spec = spec or ModelSpec()
    if x.size <= spec.n_params:
        raise DegenerateSeries(f"need more than {spec.n_params} observations")
    start = init if init is not None else moment_start(x, spec)
    q = spec.q
    z = x * x

    def objective(u: np.ndarray) -> tuple[float, np.ndarray]:
        theta_vals = np.exp(u)
        if float(theta_vals[-q:].sum()) > BETA_CEIL:
            return 1e12 * (1.0 + float(theta_vals[-q:].sum())), np.zeros_like(u)
        theta = ParamVector(theta_vals, spec)
        v, dv = filter_variance_gradient(theta, x)
        loss = float(np.mean(np.log(v) + z / v))
        dloss_dtheta = ((1.0 / v - z / (v * v)) @ dv) / x.size
        return loss, dloss_dtheta * theta_vals

    u0 = np.log(start.values)
    bounds = _log_bounds(spec)
    u0 = np.clip(u0, [b[0] for b in bounds], [b[1] for b in bounds])
    try:
        res = optimize.minimize(
            objective,
            u0,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": 500, "maxfun": 2000, "ftol": 1e-14, "gtol": 1e-9},
        )
    except (ValueError, FloatingPointError) as exc:
        raise OptimFailed(f"quasi-likelihood optimizer crashed: {exc}") from None
    if not np.all(np.isfinite(res.x)):
        raise OptimFailed("quasi-likelihood optimizer returned non-finite parameters")
    theta_hat = ParamVector(np.exp(res.x), spec)
    converged = bool(res.success) and _projected_grad_norm(res.jac, res.x, bounds) < 1e-6
    return FitResult(
        theta_raw=theta_hat,
        scale=1.0,
        theta=theta_hat,
        iterations=int(res.nit),
        converged=converged,
        method="qmle",
    )


def fit_lad(x, spec: ModelSpec | None = None, init: ParamVector | None = None) -> FitResult:
    """Least-absolute-deviations fit of log x^2 on log v, rescaled afterwards.

    Observations with |x_t| < 1e-12 are skipped in the objective (the log
    blows up there) but still drive the variance filter.  Nelder-Mead handles
    the kinks of the objective.
    """
    x = _check_series(x)
    spec = spec or ModelSpec()
    if x.size <= spec.n_params:
        raise DegenerateSeries(f"need more than {spec.n_params} observations")
    usable = np.abs(x) >= 1e-12
    if not np.any(usable):
        raise DegenerateSeries("no observations with |x| >= 1e-12")
    log_z = np.log(x[usable] ** 2)
    start = init if init is not None else moment_start(x, spec)
    q = spec.q

    def objective(u: np.ndarray) -> float:
        theta_vals = np.exp(u)
        if float(theta_vals[-q:].sum()) > BETA_CEIL:
            return 1e12 * (1.0 + float(theta_vals[-q:].sum()))
        v = filter_variance(ParamVector(theta_vals, spec), x)
        return float(np.sum(np.abs(log_z - np.log(v[usable]))))

    try:
        res = optimize.minimize(
            objective,
            np.log(start.values),
            method="Nelder-Mead",
            options={"maxiter": 4000, "maxfev": 6000, "xatol": 1e-10, "fatol": 1e-10},
        )
    except (ValueError, FloatingPointError) as exc:
        raise OptimFailed(f"LAD optimizer crashed: {exc}") from None
    if not np.all(np.isfinite(res.x)):
        raise OptimFailed("LAD optimizer returned non-finite parameters")
    theta_raw = ParamVector(np.exp(res.x), spec)
    scale = estimate_scale(theta_raw, x)
    return FitResult(
        theta_raw=theta_raw,
        scale=scale,
        theta=theta_raw.rescaled(scale),
        iterations=int(res.nit),
        converged=bool(res.success),
        method="lad",
    )


def lad_objective(theta: ParamVector, x) -> float:
    """Value of the LAD criterion at a point (exposed for testing)."""
    x = _check_series(x)
    usable = np.abs(x) >= 1e-12
    v = filter_variance(theta, x)
    return float(np.sum(np.abs(np.log(x[usable] ** 2) - np.log(v[usable]))))


def _resolve_init(x, spec: ModelSpec, init: str | ParamVector) -> ParamVector:
    if isinstance(init, ParamVector):
        return init
    attempts = {"qmle": ("qmle", "lad", "moment"), "lad": ("lad", "moment"), "moment": ("moment",)}
    if init not in attempts:
        raise InitFailed(f"unknown init {init!r}")
    last: Exception | None = None
    for name in attempts[init]:
        try:
            if name == "qmle":
                return fit_qmle(x, spec).theta_raw
            if name == "lad":
                return fit_lad(x, spec).theta_raw
            return moment_start(x, spec)
        except (OptimFailed, DegenerateSeries, SingularInformation, NonFiniteStep) as exc:
            last = exc
    raise InitFailed(f"all initial estimators failed: {last}")


def fit_r_estimator(x, config: FitConfig | None = None, spec: ModelSpec | None = None) -> FitResult:
    """Iterated one-step rank estimator, then scale back-out and rescaling.

    Runs at most ``config.max_iter`` updates, stopping once the relative step
    norm drops below ``config.tol``; a result that used the full budget is
    returned with ``converged=False`` rather than raised.
    """
    x = _check_series(x)
    config = config or FitConfig()
    spec = spec or ModelSpec()
    if x.size <= spec.n_params:
        raise DegenerateSeries(f"need more than {spec.n_params} observations")
    theta = _resolve_init(x, spec, config.init)
    step_norms: list[float] = []
    converged = False
    damping = 1.0
    retried = False
    iteration = 0
    while iteration < config.max_iter:
        iteration += 1
        try:
            new = one_step_update(theta, x, config.score, config.rho, damping)
        except SingularInformation:
            # a degenerate starting point (e.g. an ARCH weight collapsed to
            # zero) leaves the model locally unidentified; restart once from
            # the interior moment-based point
            if retried:
                raise
            retried = True
            theta = moment_start(x, spec)
            step_norms.clear()
            damping = 1.0
            iteration = 0
            continue
        rel = float(np.linalg.norm(new.values - theta.values) / (np.linalg.norm(theta.values) + 1e-12))
        # Rank flips can trap the undamped map in a small limit cycle near the
        # solution.  Smooth contraction of this iteration has ratio <= ~2/3
        # (the score functional rho is nonnegative), so a non-shrinking step
        # inside the small-step regime can only come from such a cycle;
        # quartering the step scale from then on collapses it.
        if step_norms and rel < 1e-3 and rel > 0.7 * step_norms[-1]:
            damping *= 0.25
        step_norms.append(rel)
        theta = new
        if rel < config.tol:
            converged = True
            break
    if not converged:
        warnings.warn("rank fit used the full iteration budget without meeting tol", RuntimeWarning)
    scale = estimate_scale(theta, x)
    return FitResult(
        theta_raw=theta,
        scale=scale,
        theta=theta.rescaled(scale),
        iterations=len(step_norms),
        converged=converged,
        step_norms=step_norms,
        method=f"r-{config.score.value}",
    )
