"""Study drivers and theoretical quantities: score functionals by quadrature,
the closed-form sign-vs-QMLE efficiency ratio, Monte Carlo bias/MSE/efficiency
tables, bootstrap coverage experiments, and QQ data for residual diagnostics.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.integrate import cumulative_trapezoid, quad
from scipy.special import ndtri

from .bootstrap import WeightScheme, bootstrap_distribution, confidence_intervals
from .distributions import Innovation
from .errors import (
    AllReplicationsFailed,
    DomainError,
    NonFiniteStep,
    OptimFailed,
    QuadratureNotConverged,
    SingularInformation,
)
from .estimators import FitConfig, fit_lad, fit_qmle, fit_r_estimator
from .model import ParamVector
from .scores import Score
from .simulate import SimSpec, child_seed, simulate

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# score functionals by numerical integration


@dataclass(frozen=True)
class QuadConfig:
    """Knobs for the numerical integration of the score functionals."""

    tail: float = 1e-12  # probability mass truncated from each tail of the grid
    grid_points: int = 16000  # base resolution of the cumulative grids
    tol: float = 1e-6  # tolerated error estimate per functional
    epsabs: float = 1e-11
    epsrel: float = 1e-11


@dataclass(frozen=True)
class ScoreFunctionals:
    """The five scalars that drive the asymptotics of a (score, distribution) pair."""

    c: float  # squared expectation linking the raw estimate to the model scale
    sigma2: float
    rho: float
    gamma: float
    lam: float
    score: str = ""
    dist: str = ""


def _guarded_quad(fun, lo, hi, cfg: QuadConfig, breaks=()):
    pieces = [lo, *sorted(b for b in breaks if lo < b < hi), hi]
    total, err = 0.0, 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        val, e = quad(fun, a, b, epsabs=cfg.epsabs, epsrel=cfg.epsrel, limit=300)
        total += val
        err += e
    return total, err


def score_functionals(dist: Innovation, score: Score, cfg: QuadConfig | None = None) -> ScoreFunctionals:
    """Evaluate the scale constant and the four asymptotic-variance functionals.

    The scale ``c`` is the squared mean of score(F(eps)) * eps; everything
    else lives on the axis of eta = eps / sqrt(c).  The sign score puts a
    point mass of size two at u = 1/2, so its Stieltjes integrals collapse to
    evaluations at the median; the absolutely continuous scores integrate on
    cumulative grids with a coarse/fine refinement error check.
    """
    cfg = cfg or QuadConfig()
    frozen = dist.frozen()
    med = float(frozen.ppf(0.5))
    errors: list[float] = []

    if score is Score.SIGN:
        # point mass of size two at u = 1/2: Stieltjes integrals collapse to
        # the median, and the squared score is one a.s.
        sc_above, e1 = _guarded_quad(lambda y: y * float(frozen.pdf(y)), med, math.inf, cfg)
        sc_below, e2 = _guarded_quad(lambda y: y * float(frozen.pdf(y)), -math.inf, med, cfg)
        sqrt_c = sc_above - sc_below
        errors.append(e1 + e2)
        if sqrt_c <= 0.0:
            raise DomainError("sign score gives a nonpositive scale; estimator not identified")
        c = sqrt_c * sqrt_c
        s = sqrt_c
        med_eta = med / s
        sigma2 = 1.0 / c - 1.0
        rho = 2.0 * med_eta**2 * s * float(frozen.pdf(med))
        gamma = med_eta**2
        lam = 2.0 * med_eta * (0.5 + sc_below / s)
        if max(errors) > cfg.tol:
            raise QuadratureNotConverged(f"error estimate {max(errors):.3g} above {cfg.tol:g}")
        return ScoreFunctionals(c, sigma2, rho, gamma, lam, score.value, dist.name)

    def score_val(u: float) -> float:
        return (u - 0.5) if score is Score.WILCOXON else float(ndtri(u))

    # sqrt(c) = int_0^1 score(u) F^{-1}(u) du; endpoint singularities are
    # integrable for every family with df > 2
    def sqrt_c_integrand(u: float) -> float:
        y = float(frozen.ppf(u))
        return score_val(u) * y if math.isfinite(y) else 0.0

    sqrt_c, e = _guarded_quad(sqrt_c_integrand, 0.0, 1.0, cfg, breaks=(0.5,))
    errors.append(e)
    if sqrt_c <= 0.0:
        raise DomainError("score/distribution pair gives a nonpositive scale; estimator not identified")
    c = sqrt_c * sqrt_c
    s = sqrt_c

    def sigma2_integrand(u: float) -> float:
        y = float(frozen.ppf(u)) / s
        return (score_val(u) * y) ** 2 if math.isfinite(y) else 0.0

    sig_raw, e = _guarded_quad(sigma2_integrand, 0.0, 1.0, cfg, breaks=(0.5,))
    errors.append(e)
    sigma2 = sig_raw - 1.0

    def rho_integrand(u: float) -> float:
        y = float(frozen.ppf(u))
        if not math.isfinite(y):
            return 0.0
        log_g = math.log(s) + float(frozen.logpdf(y))
        if not math.isfinite(log_g):
            return 0.0
        if score is Score.VDW:
            t = float(ndtri(u))
            log_g += 0.5 * t * t + _LOG_SQRT_2PI
        return (y / s) ** 2 * math.exp(log_g)

    rho, e = _guarded_quad(rho_integrand, 0.0, 1.0, cfg, breaks=(0.5,))
    errors.append(e)

    gamma, lam, grid_err = _gamma_lambda_grid(frozen, score, s, cfg)
    errors.append(grid_err)
    if max(errors) > cfg.tol:
        raise QuadratureNotConverged(f"error estimate {max(errors):.3g} above {cfg.tol:g}")
    return ScoreFunctionals(c, sigma2, rho, gamma, lam, score.value, dist.name)


def _tail_estimate(f_outward, widths_outward) -> float:
    """Estimate the mass an integrand carries beyond the grid by continuing
    the outermost cell integrals geometrically (values ordered inward to
    outward; falls back to a large multiple when the decay is too slow)."""
    f = np.abs(np.asarray(f_outward, dtype=float))
    w = np.abs(np.asarray(widths_outward, dtype=float))
    cells = f * w[: f.size]
    if cells[-1] <= 0.0:
        return 0.0
    if cells[-2] <= 0.0:
        return float(cells[-1]) * 30.0
    r = cells[-1] / cells[-2]
    if not np.isfinite(r) or r >= 0.97:
        return float(cells[-1]) * 30.0
    return float(cells[-1] * r / (1.0 - r))


def _gamma_lambda_grid(frozen, score: Score, s: float, cfg: QuadConfig) -> tuple[float, float, float]:
    """Variance and cross functionals of the absolutely continuous scores.

    Uses gamma = Var_t(P(t) - Q(t)) with the tail-safe cumulants
    P(t) = int_t^1 (1-u) Ginv dphi and Q(t) = int_0^t u Ginv dphi, and
    lam = int Ginv(u) (u - M(u)) dphi(u) with M the partial mean of the score
    term; everything is pushed to the eta axis and accumulated by trapezoids.
    The returned error estimate compares the full grid with its half-density
    subgrid.
    """
    n_pts = cfg.grid_points
    u_grid = np.linspace(cfg.tail, 1.0 - cfg.tail, n_pts)
    y_q = frozen.ppf(u_grid) / s
    lo, hi = y_q[0], y_q[-1]
    lo_mid, hi_mid = float(frozen.ppf(1e-3)) / s, float(frozen.isf(1e-3)) / s
    parts = [y_q, np.linspace(lo_mid, hi_mid, n_pts)]
    # log-spaced tail points resolve slow power decay out to the cutoffs
    if hi > hi_mid > 0.0:
        parts.append(np.geomspace(hi_mid, hi, n_pts // 4))
    if lo < lo_mid < 0.0:
        parts.append(-np.geomspace(-lo_mid, -lo, n_pts // 4))
    y = np.unique(np.concatenate(parts))

    def evaluate(yv: np.ndarray) -> tuple[float, float]:
        ys = yv * s
        med = float(frozen.ppf(0.5))
        G = np.asarray(frozen.cdf(ys))
        SF = np.asarray(frozen.sf(ys))
        log_g = math.log(s) + np.asarray(frozen.logpdf(ys))
        g = np.exp(log_g)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(ys <= med, ndtri(np.clip(G, 1e-320, 1.0)), -ndtri(np.clip(SF, 1e-320, 1.0)))
        if score is Score.WILCOXON:
            psi = g
            phi_vals = G - 0.5
        else:
            log_psi = log_g + 0.5 * t * t + _LOG_SQRT_2PI
            psi = np.where(np.isfinite(log_psi), np.exp(np.minimum(log_psi, 700.0)), 0.0)
            phi_vals = t
        psi = np.where(np.isfinite(psi), psi, 0.0)
        phi_vals = np.where(np.isfinite(phi_vals), phi_vals, 0.0)

        w_top = SF * yv * psi
        w_bot = G * yv * psi
        cum_top = cumulative_trapezoid(w_top, yv, initial=0.0)
        p_part = cum_top[-1] - cum_top  # integral from y to the top
        q_part = cumulative_trapezoid(w_bot, yv, initial=0.0)
        h = p_part - q_part
        gamma = float(np.trapezoid(h * h * g, yv))

        m_part = cumulative_trapezoid(yv * phi_vals * g, yv, initial=0.0)
        lam_integrand = yv * (G - m_part) * psi
        lam = float(np.trapezoid(lam_integrand, yv))
        # truncated-tail bounds: gamma integrates h^2 against the uniform
        # measure on (0,1), of which cfg.tail is cut at each end; the lam
        # tails are continued geometrically from the outermost grid cells
        trunc = float(cfg.tail * (h[0] ** 2 + h[-1] ** 2))
        trunc += _tail_estimate(lam_integrand[-3:], np.diff(yv[-4:]))
        trunc += _tail_estimate(lam_integrand[2::-1], -np.diff(yv[3::-1]))
        return gamma, lam, trunc

    gamma_f, lam_f, trunc = evaluate(y)
    gamma_c, lam_c, _ = evaluate(y[::2])
    err = max(abs(gamma_f - gamma_c), abs(lam_f - lam_c)) / 3.0 + trunc
    return gamma_f, lam_f, err


def are_sign_vs_qmle(dist: Innovation, cfg: QuadConfig | None = None) -> float:
    """Closed-form efficiency of the sign-score estimator against the QMLE:
    (E eps^4 - 1) / (4 sigma^2) with sigma^2 the sign-score dispersion."""
    fourth = dist.fourth_moment()
    functionals = score_functionals(dist, Score.SIGN, cfg)
    return (fourth - 1.0) / (4.0 * functionals.sigma2)


# ---------------------------------------------------------------------------
# Monte Carlo study driver

R_SCORES = {"sign": Score.SIGN, "wilcoxon": Score.WILCOXON, "vdw": Score.VDW}
ESTIMATOR_NAMES = ("qmle", "lad", "sign", "wilcoxon", "vdw")


@dataclass(frozen=True)
class McDesign:
    """One cell of the simulation study."""

    theta0: ParamVector
    dist: Innovation
    n: int
    n_rep: int
    estimators: tuple[str, ...] = ("qmle", "sign", "wilcoxon", "vdw")
    seed: int = 0
    burnin: int = 500
    max_iter: int = 50
    tol: float = 1e-8
    threads: int = 1

    def __post_init__(self) -> None:
        if self.n_rep < 2:
            raise ValueError("need at least two replications")
        unknown = set(self.estimators) - set(ESTIMATOR_NAMES)
        if unknown:
            raise ValueError(f"unknown estimators {sorted(unknown)}")


@dataclass
class EstimatorSummary:
    bias: np.ndarray
    mse: np.ndarray
    are: np.ndarray | None  # MSE ratio QMLE/this, None when QMLE absent
    are_se: np.ndarray | None
    n_used: int


@dataclass
class McStudyReport:
    per_estimator: dict[str, EstimatorSummary]
    param_names: list[str]
    theta0: np.ndarray
    n: int
    n_rep: int
    replications_used: int
    qmle_failures: int
    estimator_failures: dict[str, int]


def _mc_replication(design: McDesign, rep: int) -> dict[str, tuple[np.ndarray | None, bool]]:
    sim = SimSpec(design.theta0, design.n, design.dist, child_seed(design.seed, rep, 0), design.burnin)
    x = simulate(sim)
    out: dict[str, tuple[np.ndarray | None, bool]] = {}
    spec = design.theta0.spec
    need_qmle = "qmle" in design.estimators or any(name in R_SCORES for name in design.estimators)
    qmle_point = None
    if need_qmle:
        try:
            fq = fit_qmle(x, spec)
            qmle_point = fq.theta_raw
            if "qmle" in design.estimators:
                out["qmle"] = (fq.theta.values, fq.converged)
        except OptimFailed:
            if "qmle" in design.estimators:
                out["qmle"] = (None, False)
    for name in design.estimators:
        if name == "qmle":
            continue
        try:
            if name == "lad":
                res = fit_lad(x, spec)
            else:
                cfg = FitConfig(
                    score=R_SCORES[name],
                    init=qmle_point if qmle_point is not None else "lad",
                    max_iter=design.max_iter,
                    tol=design.tol,
                )
                res = fit_r_estimator(x, cfg, spec)
            out[name] = (res.theta.values, res.converged)
        except (OptimFailed, SingularInformation, NonFiniteStep):
            out[name] = (None, False)
    return out


def _run_indexed(worker, design, n_rep: int, threads: int) -> list:
    if threads <= 1:
        return [worker(design, r) for r in range(n_rep)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, [design] * n_rep, range(n_rep)))


def _ratio_se(num: np.ndarray, den: np.ndarray) -> float:
    """Delta-method standard error for mean(num)/mean(den) over paired draws."""
    r = num.size
    mn, md = float(np.mean(num)), float(np.mean(den))
    if md == 0.0 or r < 2:
        return math.nan
    cov = np.cov(num, den, ddof=1)
    ratio = mn / md
    var = (ratio**2) * (cov[0, 0] / mn**2 + cov[1, 1] / md**2 - 2.0 * cov[0, 1] / (mn * md)) / r
    return math.sqrt(max(var, 0.0))


def mc_study(design: McDesign) -> McStudyReport:
    """Simulate, fit every requested estimator, and tabulate bias/MSE/efficiency.

    Efficiency ratios (and the bias/MSE cells themselves) are computed on the
    replications where the QMLE converged, mirroring how the heavy-tail cells
    of the reference tables are defined; replications where any estimator
    failed outright are dropped as well.
    """
    rows = _run_indexed(_mc_replication, design, design.n_rep, design.threads)
    qmle_failures = 0
    est_failures = {name: 0 for name in design.estimators}
    keep: list[int] = []
    for r, row in enumerate(rows):
        ok = True
        for name in design.estimators:
            theta, converged = row.get(name, (None, False))
            if theta is None:
                est_failures[name] += 1
                ok = False
            elif name == "qmle" and not converged:
                ok = False
        if "qmle" in design.estimators:
            theta, converged = row["qmle"]
            if theta is None or not converged:
                qmle_failures += 1
        if ok:
            keep.append(r)
    if not keep:
        raise AllReplicationsFailed("no replication produced a full set of estimates")

    theta0 = design.theta0.values
    sq_errors: dict[str, np.ndarray] = {}
    summaries: dict[str, EstimatorSummary] = {}
    for name in design.estimators:
        estimates = np.array([rows[r][name][0] for r in keep])
        err = estimates - theta0
        sq_errors[name] = err**2
        summaries[name] = EstimatorSummary(
            bias=err.mean(axis=0),
            mse=(err**2).mean(axis=0),
            are=None,
            are_se=None,
            n_used=len(keep),
        )
    if "qmle" in design.estimators:
        mse_q = sq_errors["qmle"].mean(axis=0)
        for name in design.estimators:
            mse_e = sq_errors[name].mean(axis=0)
            summaries[name].are = mse_q / mse_e
            summaries[name].are_se = np.array(
                [_ratio_se(sq_errors["qmle"][:, j], sq_errors[name][:, j]) for j in range(theta0.size)]
            )
    return McStudyReport(
        per_estimator=summaries,
        param_names=design.theta0.spec.param_names,
        theta0=theta0,
        n=design.n,
        n_rep=design.n_rep,
        replications_used=len(keep),
        qmle_failures=qmle_failures,
        estimator_failures=est_failures,
    )


# ---------------------------------------------------------------------------
# bootstrap coverage experiment


@dataclass(frozen=True)
class CoverageDesign:
    theta0: ParamVector
    dist: Innovation
    n: int
    n_rep: int
    n_boot: int
    scheme: WeightScheme = WeightScheme.U
    score: Score = Score.SIGN
    levels: tuple[float, ...] = (0.95, 0.90)
    seed: int = 0
    burnin: int = 500
    k_star: int = 6
    sigma_mode: str = "theoretical"
    weighted_info: bool = False
    threads: int = 1

    def __post_init__(self) -> None:
        if self.n_rep < 1 or self.n_boot < 1:
            raise ValueError("n_rep and n_boot must be positive")


@dataclass
class CoverageReport:
    coverage: dict[float, np.ndarray]  # level -> percentage per parameter
    coverage_se: dict[float, np.ndarray]  # binomial standard errors (percentage points)
    param_names: list[str]
    n: int
    n_rep: int
    n_boot: int
    scheme: str
    score: str
    replications_used: int
    failures: int
    flags: list[str] = field(default_factory=list)


def _coverage_replication(design: CoverageDesign, rep: int) -> dict[float, np.ndarray] | None:
    sim = SimSpec(design.theta0, design.n, design.dist, child_seed(design.seed, rep, 0), design.burnin)
    x = simulate(sim)
    try:
        fit = fit_r_estimator(x, FitConfig(score=design.score), design.theta0.spec)
        run = bootstrap_distribution(
            fit,
            x,
            design.score,
            design.scheme,
            design.n_boot,
            k_star=design.k_star,
            seed=child_seed(design.seed, rep, 1),
            sigma_mode=design.sigma_mode,
            weighted_info=design.weighted_info,
        )
        intervals = confidence_intervals(run, design.levels)
    except RankGarchError:
        return None
    theta0 = design.theta0.values
    return {
        level: (ci[:, 0] <= theta0) & (theta0 <= ci[:, 1])
        for level, ci in intervals.items()
    }


def coverage_experiment(design: CoverageDesign) -> CoverageReport:
    """Empirical coverage of the bootstrap intervals across replications."""
    import warnings as _warnings

    with _warnings.catch_warnings():
        _warnings.simplefilter("ignore", RuntimeWarning)
        rows = _run_indexed(_coverage_replication, design, design.n_rep, design.threads)
    hits = {level: [] for level in design.levels}
    failures = 0
    for row in rows:
        if row is None:
            failures += 1
            continue
        for level in design.levels:
            hits[level].append(row[level])
    used = design.n_rep - failures
    if used == 0:
        raise AllReplicationsFailed("every coverage replication failed")
    coverage = {}
    coverage_se = {}
    for level in design.levels:
        h = np.array(hits[level], dtype=float)
        p = h.mean(axis=0)
        coverage[level] = 100.0 * p
        coverage_se[level] = 100.0 * np.sqrt(np.maximum(p * (1.0 - p), 0.0) / used)
    flags = []
    if design.n_boot < 100:
        flags.append("low-B")
    if design.n_rep < 50:
        flags.append("low-R")
    return CoverageReport(
        coverage=coverage,
        coverage_se=coverage_se,
        param_names=design.theta0.spec.param_names,
        n=design.n,
        n_rep=design.n_rep,
        n_boot=design.n_boot,
        scheme=design.scheme.value,
        score=design.score.value,
        replications_used=used,
        failures=failures,
        flags=flags,
    )


# ---------------------------------------------------------------------------
# QQ data


def qq_data(eps, df: float, standardize: bool = True) -> np.ndarray:
    """Pairs (t-quantile, empirical quantile) at plotting positions (i-1/2)/n.

    The theoretical quantiles are rescaled to unit variance when df > 2 and
    ``standardize`` is set, matching residuals from a unit-variance fit.
    """
    eps = np.asarray(eps, dtype=float).reshape(-1)
    if df <= 0.0:
        raise DomainError("df must be positive")
    if eps.size < 10:
        raise DomainError("need at least 10 residuals for QQ data")
    probs = (np.arange(1, eps.size + 1) - 0.5) / eps.size
    theo = stats.t.ppf(probs, df)
    if standardize and df > 2.0:
        theo = theo / math.sqrt(df / (df - 2.0))
    return np.column_stack((theo, np.sort(eps)))
