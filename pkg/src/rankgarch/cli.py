"""Command-line front end: CSV ingestion, fitting, simulation, bootstrap
intervals, and the Monte Carlo / coverage study drivers.

Every output file starts with a header block (tool version, resolved
configuration, master seed, input checksum) and is byte-stable across reruns
with identical inputs.  Exit codes: 0 success, 1 input error, 2 estimator
non-convergence, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import CoverageDesign, McDesign, coverage_experiment, mc_study, qq_data
from .bootstrap import WeightScheme, bootstrap_distribution, confidence_intervals
from .distributions import from_name as dist_from_name
from .errors import (
    DegenerateSeries,
    DimensionMismatch,
    DomainError,
    InputFormatError,
    InsufficientReplicates,
    InvalidDf,
    NonFiniteInput,
    NonPositiveParameter,
    NonStationary,
    RankGarchError,
)
from .estimators import FitConfig, FitResult, fit_lad, fit_qmle, fit_r_estimator
from .model import Family, ModelSpec, ParamVector, residuals
from .scores import Score
from .simulate import SimSpec, simulate

INPUT_ERRORS = (
    InputFormatError,
    DomainError,
    InvalidDf,
    DimensionMismatch,
    NonPositiveParameter,
    NonStationary,
    NonFiniteInput,
    DegenerateSeries,
)


# ---------------------------------------------------------------------------
# input handling


def read_returns(path: str) -> tuple[np.ndarray, str]:
    """Parse a returns CSV: one value per line (last column), optional header
    and date column, blank lines skipped.  Returns the series and the sha256
    of the raw bytes."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise InputFormatError(f"cannot read {path}: {exc}") from None
    checksum = hashlib.sha256(raw).hexdigest()
    values: list[float] = []
    first_bad: str | None = None
    for lineno, line in enumerate(raw.decode("utf-8", errors="replace").splitlines(), 1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        field = text.split(",")[-1].strip()
        try:
            values.append(float(field))
        except ValueError:
            if not values and first_bad is None:
                first_bad = f"line {lineno}: {text!r}"  # header candidate
                continue
            raise InputFormatError(f"line {lineno}: cannot parse {field!r} as a return") from None
    if not values:
        raise InputFormatError(f"no usable data rows in {path} (first skipped: {first_bad or 'none, file empty'})")
    return np.asarray(values), checksum


def load_config_file(path: str) -> dict[str, str]:
    """Flat `key = value` settings; '#' starts a comment."""
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputFormatError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise InputFormatError(f"{path} line {lineno}: expected key = value")
        key, value = stripped.split("=", 1)
        out[key.strip().lower().replace("-", "_")] = value.strip()
    return out


def _parse_levels(text: str) -> tuple[float, ...]:
    try:
        levels = tuple(float(tok) for tok in text.replace(";", ",").split(",") if tok.strip())
    except ValueError:
        raise InputFormatError(f"cannot parse levels {text!r}") from None
    if not levels or any(not 0.0 < lv < 1.0 for lv in levels):
        raise InputFormatError("levels must lie strictly inside (0, 1)")
    return levels


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.replace(";", ",").split(",") if tok.strip()]
    except ValueError:
        raise InputFormatError(f"cannot parse number list {text!r}") from None


def _model_spec(model: str, p: int, q: int) -> ModelSpec:
    try:
        family = Family(model.lower())
    except ValueError:
        raise InputFormatError(f"unknown model {model!r}; choose garch or gjr") from None
    return ModelSpec(family, p, q)


def _theta_from_values(values: list[float], spec: ModelSpec) -> ParamVector:
    return ParamVector(np.asarray(values), spec)


# ---------------------------------------------------------------------------
# output handling


def header_block(command: str, config: dict, seed, checksum: str | None) -> str:
    items = " ".join(f"{k}={config[k]}" for k in sorted(config))
    lines = [
        f"# rankgarch {__version__}",
        f"# command: {command}",
        f"# config: {items}",
        f"# seed: {seed if seed is not None else '-'}",
        f"# input-sha256: {checksum or '-'}",
    ]
    return "\n".join(lines) + "\n"


def write_output(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _fmt(x) -> str:
    return repr(float(x))


def _record(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True) + "\n"


def _param_dict(theta: ParamVector) -> dict[str, float]:
    return {name: float(v) for name, v in zip(theta.spec.param_names, theta.values)}


def _fit_records(res: FitResult, n: int, score_name: str) -> str:
    spec = res.theta.spec
    rec = {
        "record": "fit",
        "model": spec.family.value,
        "p": spec.p,
        "q": spec.q,
        "n": n,
        "score": score_name,
        "converged": bool(res.converged),
        "iterations": res.iterations,
        "scale": float(res.scale),
        "theta_raw": _param_dict(res.theta_raw),
        "theta": _param_dict(res.theta),
        "step_norms": [float(s) for s in res.step_norms],
    }
    return _record(rec)


def _run_fit(x: np.ndarray, args) -> FitResult:
    spec = _model_spec(args.model, args.p, args.q)
    name = args.score.lower()
    if name == "qmle":
        return fit_qmle(x, spec)
    if name == "lad":
        return fit_lad(x, spec)
    cfg = FitConfig(score=Score.from_name(name), init=args.init, max_iter=args.iters, tol=args.tol)
    return fit_r_estimator(x, cfg, spec)


# ---------------------------------------------------------------------------
# subcommands


def cmd_fit(args) -> int:
    x, checksum = read_returns(args.input)
    res = _run_fit(x, args)
    config = {
        "input": args.input,
        "model": args.model,
        "p": args.p,
        "q": args.q,
        "score": args.score,
        "iters": args.iters,
        "tol": args.tol,
        "init": args.init,
    }
    text = header_block("fit", config, args.seed, checksum) + _fit_records(res, x.size, args.score)
    write_output(args.output, text)
    return 0 if res.converged else 2


def cmd_simulate(args) -> int:
    spec = _model_spec(args.model, args.p, args.q)
    theta0 = _theta_from_values(_parse_floats(args.params), spec)
    dist = dist_from_name(args.dist, df=args.df, shape=args.shape)
    sim = SimSpec(theta0, args.n, dist, args.seed, args.burnin)
    x = simulate(sim, allow_nonstationary=args.allow_nonstationary)
    config = {
        "model": args.model,
        "p": args.p,
        "q": args.q,
        "params": args.params,
        "n": args.n,
        "burnin": args.burnin,
        "dist": dist.name,
    }
    body = "".join(repr(float(v)) + "\n" for v in x)
    write_output(args.output, header_block("simulate", config, args.seed, None) + body)
    return 0


def cmd_bootstrap(args) -> int:
    x, checksum = read_returns(args.input)
    res = _run_fit(x, args)
    score = Score.from_name(args.score)
    scheme = WeightScheme.from_name(args.scheme)
    run = bootstrap_distribution(
        res,
        x,
        score,
        scheme,
        args.B,
        k_star=args.kstar,
        seed=args.seed,
        sigma_mode=args.sigma_mode,
        weighted_info=args.weighted_info,
    )
    levels = _parse_levels(args.levels)
    try:
        intervals = confidence_intervals(run, levels)
    except InsufficientReplicates:
        intervals = None  # too few replicates for quantiles; replicates still written
    config = {
        "input": args.input,
        "model": args.model,
        "p": args.p,
        "q": args.q,
        "score": args.score,
        "scheme": args.scheme,
        "B": args.B,
        "kstar": args.kstar,
        "levels": args.levels,
        "sigma_mode": args.sigma_mode,
        "weighted_info": args.weighted_info,
    }
    lines = [header_block("bootstrap", config, args.seed, checksum)]
    lines.append("parameter,level,estimate,lower,upper\n")
    names = res.theta.spec.param_names
    if intervals is None:
        lines.append(_record({"record": "intervals-skipped", "reason": "fewer than 20 replicates"}))
    else:
        for level in levels:
            arr = intervals[level]
            for j, name in enumerate(names):
                lines.append(
                    f"{name},{_fmt(level)},{_fmt(res.theta.values[j])},{_fmt(arr[j, 0])},{_fmt(arr[j, 1])}\n"
                )
    lines.append(
        _record(
            {
                "record": "bootstrap",
                "n_boot": run.n_boot,
                "n_failed": len(run.failed),
                "weight_sd": run.weight_sd,
                "scheme": scheme.value,
                "k_star": run.k_star,
            }
        )
    )
    write_output(args.output, "".join(lines))
    if args.replicates_out:
        rep_lines = [header_block("bootstrap-replicates", config, args.seed, checksum)]
        rep_lines.append(",".join(names) + "\n")
        for row in run.replicates:
            rep_lines.append(",".join(_fmt(v) for v in row) + "\n")
        Path(args.replicates_out).write_text("".join(rep_lines))
    return 0 if res.converged else 2


def _design_common(cfg: dict):
    model = cfg.get("model", "garch")
    p, q = int(cfg.get("p", 1)), int(cfg.get("q", 1))
    spec = _model_spec(model, p, q)
    theta0 = _theta_from_values(_parse_floats(cfg["theta0"]), spec)
    dist = dist_from_name(
        cfg.get("dist", "normal"),
        df=float(cfg["df"]) if "df" in cfg else None,
        shape=float(cfg["shape"]) if "shape" in cfg else None,
    )
    return theta0, dist


def cmd_benchmark(args) -> int:
    cfg = load_config_file(args.design_file)
    theta0, dist = _design_common(cfg)
    estimators = tuple(
        tok.strip().lower() for tok in cfg.get("estimators", "qmle,sign,wilcoxon,vdw").split(",") if tok.strip()
    )
    design = McDesign(
        theta0=theta0,
        dist=dist,
        n=int(cfg.get("n", 1000)),
        n_rep=int(cfg.get("reps", 100)),
        estimators=estimators,
        seed=int(cfg.get("seed", 0)),
        burnin=int(cfg.get("burnin", 500)),
        threads=args.threads,
    )
    report = mc_study(design)
    config = {k: cfg[k] for k in sorted(cfg)}
    lines = [header_block("benchmark", config, design.seed, None)]
    lines.append("estimator,parameter,bias,mse,are,are_se,n_used\n")
    recs = []
    for name in design.estimators:
        cell = report.per_estimator[name]
        for j, pname in enumerate(report.param_names):
            are = "" if cell.are is None else _fmt(cell.are[j])
            are_se = "" if cell.are_se is None else _fmt(cell.are_se[j])
            lines.append(
                f"{name},{pname},{_fmt(cell.bias[j])},{_fmt(cell.mse[j])},{are},{are_se},{cell.n_used}\n"
            )
            recs.append(
                _record(
                    {
                        "record": "benchmark-cell",
                        "estimator": name,
                        "parameter": pname,
                        "bias": float(cell.bias[j]),
                        "mse": float(cell.mse[j]),
                        "are": None if cell.are is None else float(cell.are[j]),
                        "are_se": None if cell.are_se is None else float(cell.are_se[j]),
                        "n_used": cell.n_used,
                    }
                )
            )
    lines.append(
        _record(
            {
                "record": "benchmark-summary",
                "replications": report.n_rep,
                "replications_used": report.replications_used,
                "qmle_failures": report.qmle_failures,
                "estimator_failures": report.estimator_failures,
            }
        )
    )
    lines.extend(recs)
    write_output(args.output, "".join(lines))
    return 0


def cmd_coverage(args) -> int:
    cfg = load_config_file(args.design_file)
    theta0, dist = _design_common(cfg)
    design = CoverageDesign(
        theta0=theta0,
        dist=dist,
        n=int(cfg.get("n", 1000)),
        n_rep=int(cfg.get("reps", 100)),
        n_boot=int(cfg.get("boot", 500)),
        scheme=WeightScheme.from_name(cfg.get("scheme", "u")),
        score=Score.from_name(cfg.get("score", "sign")),
        levels=_parse_levels(cfg.get("levels", "0.95,0.90")),
        seed=int(cfg.get("seed", 0)),
        burnin=int(cfg.get("burnin", 500)),
        k_star=int(cfg.get("kstar", 6)),
        sigma_mode=cfg.get("sigma_mode", "theoretical"),
        weighted_info=cfg.get("weighted_info", "false").lower() in ("1", "true", "yes"),
        threads=args.threads,
    )
    report = coverage_experiment(design)
    config = {k: cfg[k] for k in sorted(cfg)}
    lines = [header_block("coverage", config, design.seed, None)]
    lines.append("level,parameter,coverage_pct,se_pct\n")
    recs = []
    for level in design.levels:
        for j, pname in enumerate(report.param_names):
            lines.append(
                f"{_fmt(level)},{pname},{_fmt(report.coverage[level][j])},{_fmt(report.coverage_se[level][j])}\n"
            )
            recs.append(
                _record(
                    {
                        "record": "coverage-cell",
                        "level": level,
                        "parameter": pname,
                        "coverage_pct": float(report.coverage[level][j]),
                        "se_pct": float(report.coverage_se[level][j]),
                    }
                )
            )
    lines.append(
        _record(
            {
                "record": "coverage-summary",
                "replications": report.n_rep,
                "replications_used": report.replications_used,
                "failures": report.failures,
                "flags": report.flags,
                "scheme": report.scheme,
                "score": report.score,
                "n": report.n,
                "n_boot": report.n_boot,
            }
        )
    )
    lines.extend(recs)
    write_output(args.output, "".join(lines))
    return 0


def cmd_qq(args) -> int:
    x, checksum = read_returns(args.input)
    res = _run_fit(x, args)
    eps = residuals(res.theta, x)
    dfs = _parse_floats(args.df)
    config = {
        "input": args.input,
        "model": args.model,
        "p": args.p,
        "q": args.q,
        "score": args.score,
        "df": args.df,
        "standardize": not args.raw_t,
    }
    lines = [header_block("qq", config, args.seed, checksum)]
    lines.append("df,theoretical,empirical\n")
    for df in dfs:
        pairs = qq_data(eps, df, standardize=not args.raw_t)
        for trow in pairs:
            lines.append(f"{_fmt(df)},{_fmt(trow[0])},{_fmt(trow[1])}\n")
    write_output(args.output, "".join(lines))
    return 0 if res.converged else 2


# ---------------------------------------------------------------------------
# parser


def _add_fit_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--model", default="garch", help="garch or gjr")
    sub.add_argument("--p", type=int, default=1, help="ARCH order")
    sub.add_argument("--q", type=int, default=1, help="variance-lag order")
    sub.add_argument("--score", default="vdw", help="sign|wilcoxon|vdw|qmle|lad")
    sub.add_argument("--iters", type=int, default=50, help="one-step iteration budget")
    sub.add_argument("--tol", type=float, default=1e-8, help="relative step-norm tolerance")
    sub.add_argument("--init", default="qmle", help="initial estimator: qmle|lad|moment")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="rankgarch", description=__doc__)
    parser.add_argument("--version", action="version", version=f"rankgarch {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)
    registry: dict[str, argparse.ArgumentParser] = {}

    def common(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--config", help="flat key = value settings file; flags override")
        sub.add_argument("--seed", type=int, default=0, help="master seed")
        sub.add_argument(
            "--threads",
            type=int,
            default=int(os.environ.get("RANK_GARCH_THREADS", "1")),
            help="replication-level workers (env RANK_GARCH_THREADS)",
        )
        sub.add_argument("-o", "--output", default=None, help="output file (default stdout)")

    sub = subs.add_parser("fit", help="fit a model to a returns CSV")
    sub.add_argument("input", help="returns CSV")
    _add_fit_flags(sub)
    common(sub)
    sub.set_defaults(func=cmd_fit)
    registry["fit"] = sub

    sub = subs.add_parser("simulate", help="generate a sample path")
    sub.add_argument("--model", default="garch")
    sub.add_argument("--p", type=int, default=1)
    sub.add_argument("--q", type=int, default=1)
    sub.add_argument("--params", required=True, help="comma-separated parameter values")
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--burnin", type=int, default=500)
    sub.add_argument("--dist", default="normal", help="normal|de|logistic|t|skewnormal")
    sub.add_argument("--df", type=float, default=None)
    sub.add_argument("--shape", type=float, default=None)
    sub.add_argument("--allow-nonstationary", action="store_true")
    common(sub)
    sub.set_defaults(func=cmd_simulate)
    registry["simulate"] = sub

    sub = subs.add_parser("bootstrap", help="weighted-bootstrap confidence intervals")
    sub.add_argument("input")
    _add_fit_flags(sub)
    sub.add_argument("--scheme", default="u", help="m|e|u")
    sub.add_argument("--B", type=int, default=500, help="bootstrap replicates")
    sub.add_argument("--kstar", type=int, default=6, help="weighted one-step iterations per replicate")
    sub.add_argument("--levels", default="0.95,0.90")
    sub.add_argument("--sigma-mode", default="theoretical", choices=("theoretical", "empirical"))
    sub.add_argument("--weighted-info", action="store_true", help="also weight the Newton matrix")
    sub.add_argument("--replicates-out", default=None)
    common(sub)
    sub.set_defaults(func=cmd_bootstrap)
    registry["bootstrap"] = sub

    sub = subs.add_parser("benchmark", help="Monte Carlo bias/MSE/efficiency study")
    sub.add_argument("--design-file", required=True)
    common(sub)
    sub.set_defaults(func=cmd_benchmark)
    registry["benchmark"] = sub

    sub = subs.add_parser("coverage", help="bootstrap coverage experiment")
    sub.add_argument("--design-file", required=True)
    common(sub)
    sub.set_defaults(func=cmd_coverage)
    registry["coverage"] = sub

    sub = subs.add_parser("qq", help="QQ data of fitted residuals against t quantiles")
    sub.add_argument("input")
    _add_fit_flags(sub)
    sub.add_argument("--df", required=True, help="comma-separated t degrees of freedom")
    sub.add_argument("--raw-t", action="store_true", help="skip unit-variance rescaling of quantiles")
    common(sub)
    sub.set_defaults(func=cmd_qq)
    registry["qq"] = sub

    return parser, registry


def _apply_config(sub: argparse.ArgumentParser, cfg: dict[str, str]) -> None:
    """Install config-file values as typed defaults so flags keep priority."""
    typed: dict[str, object] = {}
    for action in sub._actions:
        if action.dest not in cfg:
            continue
        raw = cfg[action.dest]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            typed[action.dest] = raw.lower() in ("1", "true", "yes")
        elif action.type is not None:
            typed[action.dest] = action.type(raw)
        else:
            typed[action.dest] = raw
    sub.set_defaults(**typed)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, registry = build_parser()
    # apply --config file values as subcommand defaults so flags keep priority
    if argv and argv[0] in registry and "--config" in argv:
        cfg_path = argv[argv.index("--config") + 1] if argv.index("--config") + 1 < len(argv) else None
        if cfg_path:
            try:
                _apply_config(registry[argv[0]], load_config_file(cfg_path))
            except (InputFormatError, ValueError) as exc:
                print(f"error: {exc}", file=sys.stderr)
                return 1
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (*INPUT_ERRORS, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RankGarchError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
