"""Command-line harness.

Subcommands ``denoise``, ``logreg`` and ``validate``.  Settings come from
built-in defaults, then an optional ``--config`` key=value file, then the
command-line flags, later sources winning.  Each run writes ``trace.csv``
and ``summary.txt`` (plus the result image or weights) into ``--out``.

Exit codes: 0 success, 2 usage error, 3 parameter validation failure,
4 input/output failure, 5 divergence.
"""
import argparse
import dataclasses
import math
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels, precond
from .io import FormatError, atomic_write_text, load_libsvm, load_pgm, read_config, save_pgm
from .linop import estimate_norm, load_matrix_csv
from .precond import InvalidMetricError, StepMetric
from .problems import build_l1tv, build_logreg, impulse_noise_image, logistic_toy
from .solver import (
    DivergenceError,
    InertialSchedule,
    SolveOptions,
    run,
    suggest_schedule,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVALID = 3
EXIT_IO = 4
EXIT_DIVERGED = 5

TRACE_HEADER = "iter,objective,km_residual_P,primal_change,elapsed_ms"


def fmt(v):
    """12 significant digits, the one number format used in every output file."""
    return f"{float(v):.12g}"


@dataclass
class RunConfig:
    task: str
    algorithm: str = "sipdfp"
    metric_mode: str = "scalar"
    sigma: Optional[float] = None
    gamma: Optional[float] = None
    tau: Optional[float] = None
    s_exponent: float = 1.0
    alpha: float = 0.0
    theta: float = 0.01
    delta_hat: Optional[float] = None
    rho: Optional[float] = None
    rule: str = "condat"
    max_iter: int = 10000
    tol: float = 1e-10
    record_every: int = 10
    timing: bool = False
    input: Optional[str] = None
    out: str = "."
    # denoise
    lambda_tv: float = 10.0
    isotropic: bool = False
    box_lo: float = 0.0
    box_hi: Optional[float] = None
    synthetic_size: int = 16
    synthetic_density: float = 0.2
    synthetic_seed: int = 0
    # logreg
    reg: float = 1e-6
    batches: int = 1
    # validate
    norms: Optional[str] = None
    matrix: Optional[str] = None

    def check(self):
        if self.task not in ("denoise", "logreg", "validate"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.algorithm not in ("ipdfp", "sipdfp"):
            raise ValueError(f"algorithm must be ipdfp or sipdfp, got {self.algorithm!r}")
        if self.metric_mode not in ("scalar", "diagonal"):
            raise ValueError(f"metric must be scalar or diagonal, got {self.metric_mode!r}")
        if not 0.0 <= self.s_exponent <= 2.0:
            raise ValueError(f"s must lie in [0, 2], got {self.s_exponent}")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.rule not in ("as_written", "condat"):
            raise ValueError(f"rule must be as_written or condat, got {self.rule!r}")
        if self.max_iter < 1 or self.record_every < 1:
            raise ValueError("max_iter and record_every must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        return self


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(name, raw):
    typ = _FIELD_TYPES[name]
    if raw is None or not isinstance(raw, str):
        return raw
    if raw.lower() in ("", "none"):
        return None
    if typ is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if typ is int:
        return int(raw)
    if typ in (float, Optional[float]):
        return float(raw)
    return raw


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    a = common.add_argument
    a("--config", help="key=value file; command-line flags override it")
    a("--out", help="output directory (default: current directory)")
    a("--algorithm", choices=["ipdfp", "sipdfp"])
    a("--metric", dest="metric_mode", choices=["scalar", "diagonal"])
    a("--sigma", type=float)
    a("--gamma", type=float)
    a("--tau", type=float, help="dual step of the K blocks")
    a("--s", dest="s_exponent", type=float, help="diagonal preconditioner exponent in [0, 2]")
    a("--alpha", type=float, help="inertia in [0, 1)")
    a("--theta", type=float)
    a("--delta-hat", type=float)
    a("--rho", type=float, help="relaxation; default is 99%% of the admissible bound")
    a("--rule", choices=["as_written", "condat"])
    a("--max-iter", type=int)
    a("--tol", type=float)
    a("--record-every", type=int)
    a("--timing", action="store_true", default=None, help="record wall time in the trace")

    p = argparse.ArgumentParser(prog="ipdfp", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="task", required=True)

    d = sub.add_parser("denoise", parents=[common], help="L1/TV denoising of a PGM image")
    d.add_argument("--input", help="P2/P5 PGM; omitted means a synthetic impulse-noise image")
    d.add_argument("--lambda-tv", type=float)
    d.add_argument("--isotropic", action="store_true", default=None)
    d.add_argument("--box-lo", type=float)
    d.add_argument("--box-hi", type=float, help="default: the image maxval")
    d.add_argument("--synthetic-size", type=int)
    d.add_argument("--synthetic-density", type=float)
    d.add_argument("--synthetic-seed", type=int)

    g = sub.add_parser("logreg", parents=[common], help="l1-regularized logistic regression")
    g.add_argument("--input", help="LibSVM file; omitted means the built-in 4-sample toy")
    g.add_argument("--reg", type=float, help="l1 weight (default 1e-6)")
    g.add_argument("--batches", type=int)

    v = sub.add_parser("validate", parents=[common], help="check step parameters")
    v.add_argument("--norms", help="comma-separated operator norms ||K_i||")
    v.add_argument("--matrix", help="CSV matrix K (norm estimated, or diagonal metric built)")
    return p


def resolve_config(argv):
    """Parse ``argv`` into a checked :class:`RunConfig`."""
    ns = vars(_parser().parse_args(argv))
    merged = {}
    if ns.get("config"):
        raw = read_config(ns["config"])
        unknown = sorted(set(raw) - set(_FIELD_TYPES))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        merged.update({k: _coerce(k, v) for k, v in raw.items()})
    for k, v in ns.items():
        if k in _FIELD_TYPES and v is not None:
            merged[k] = v
    merged["task"] = ns["task"]
    return RunConfig(**merged).check()


def _schedule(cfg):
    if cfg.rho is None and cfg.delta_hat is None:
        return suggest_schedule(cfg.alpha, cfg.theta)
    base = suggest_schedule(cfg.alpha, cfg.theta)
    dh = cfg.delta_hat if cfg.delta_hat is not None else base.delta_hat
    rho = cfg.rho if cfg.rho is not None else base.rho
    return InertialSchedule(cfg.alpha, cfg.theta, dh, rho).check()


def _metric(cfg, Ks, pairs=None):
    if cfg.metric_mode == "diagonal":
        m = precond.build_diagonal(Ks, s=cfg.s_exponent, zero_rows="unit", pairs=pairs)
    else:
        auto = precond.auto_scalar_steps([estimate_norm(k) for k in Ks])
        m = StepMetric.scalar(
            auto.sigma if cfg.sigma is None else cfg.sigma,
            auto.gamma if cfg.gamma is None else cfg.gamma,
            auto.tau if cfg.tau is None else cfg.tau,
        )
    return precond.check_metric(m, Ks)


def _write_outputs(cfg, result, extra):
    rows = [TRACE_HEADER]
    for r in result.records:
        el = r.elapsed_ms if cfg.timing else 0.0
        rows.append(",".join(fmt(v) for v in (r.iter, r.objective, r.km_residual_P, r.primal_change, el)))
    atomic_write_text(f"{cfg.out}/trace.csv", "\n".join(rows) + "\n")
    met, sch = result.metric, result.schedule
    summary = {
        "task": cfg.task,
        "objective": fmt(result.records[-1].objective),
        "iterations": str(result.iterations),
        "reason": result.reason,
        "residual": fmt(result.residual),
        "algorithm": cfg.algorithm,
        "rule": cfg.rule,
        "metric": met.mode,
        "alpha": fmt(sch.alpha),
        "theta": fmt(sch.theta),
        "delta_hat": fmt(sch.delta_hat),
        "rho": fmt(sch.rho),
        "max_iter": str(cfg.max_iter),
        "tol": fmt(cfg.tol),
        "metric_margin": fmt(met.report.margin),
        "backend": kernels.BACKEND,
    }
    if met.mode == "scalar":
        summary.update(sigma=fmt(met.sigma), gamma=fmt(met.gamma), tau=fmt(met.tau))
    else:
        summary["s"] = fmt(cfg.s_exponent)
        for name in ("sigma", "gamma", "tau"):
            vec = getattr(met, name)
            summary[f"{name}_min"] = fmt(vec.min())
            summary[f"{name}_max"] = fmt(vec.max())
    summary.update(extra)
    atomic_write_text(
        f"{cfg.out}/summary.txt", "".join(f"{k}={v}\n" for k, v in summary.items())
    )
    return summary


def _solve(cfg, problem, metric):
    if cfg.algorithm == "ipdfp":
        problem = dataclasses.replace(problem, H=None)
    opts = SolveOptions(
        max_iter=cfg.max_iter, tol=cfg.tol, rule=cfg.rule, record_every=cfg.record_every
    )
    return run(problem, metric, _schedule(cfg), opts, algorithm=cfg.algorithm)


def run_denoise(cfg):
    if cfg.input:
        b, h, w, maxval = load_pgm(cfg.input)
        source = cfg.input
    else:
        n = cfg.synthetic_size
        _, noisy = impulse_noise_image(n, n, cfg.synthetic_density, cfg.synthetic_seed)
        b, h, w, maxval = noisy.ravel(), n, n, 255
        source = f"synthetic {n}x{n} density={fmt(cfg.synthetic_density)} seed={cfg.synthetic_seed}"
    hi = float(maxval) if cfg.box_hi is None else cfg.box_hi
    problem = build_l1tv(b, cfg.lambda_tv, cfg.isotropic, shape=(h, w), box=(cfg.box_lo, hi))
    Ks = problem.operators
    pairs = None
    if cfg.isotropic:
        npx = h * w
        pairs = (npx + np.arange(npx), 2 * npx + np.arange(npx))
    metric = _metric(cfg, Ks, pairs)
    result = _solve(cfg, problem, metric)
    save_pgm(f"{cfg.out}/denoised.pgm", result.x, h, w, maxval)
    extra = {
        "input": source,
        "input_objective": fmt(problem.objective(np.clip(b, cfg.box_lo, hi))),
        "lambda_tv": fmt(cfg.lambda_tv),
        "isotropic": str(cfg.isotropic).lower(),
        "box": f"{fmt(cfg.box_lo)},{fmt(hi)}",
        "height": str(h),
        "width": str(w),
    }
    return result, extra


def run_logreg(cfg):
    if cfg.input:
        data = load_libsvm(cfg.input)
        tau = cfg.reg
        source = cfg.input
    else:
        data, tau = logistic_toy()
        tau = cfg.reg if cfg.reg is not None else tau
        source = "toy"
    problem = build_logreg(data, tau, cfg.batches)
    metric = _metric(cfg, problem.operators)
    result = _solve(cfg, problem, metric)
    atomic_write_text(f"{cfg.out}/weights.txt", "".join(fmt(v) + "\n" for v in result.x))
    extra = {
        "input": source,
        "samples": str(data.m),
        "features": str(data.q),
        "reg": fmt(tau),
        "batches": str(cfg.batches),
    }
    return result, extra


def run_validate(cfg, stdout):
    if cfg.matrix:
        K = load_matrix_csv(cfg.matrix)
        Ks = [K]
    else:
        K, Ks = None, None
    if cfg.metric_mode == "diagonal":
        if K is None:
            raise ValueError("diagonal validation needs --matrix")
        m = precond.build_diagonal(K, s=cfg.s_exponent, zero_rows="unit")
        rep = precond.validate_diagonal(m, K)
        print(f"diagonal metric (s={fmt(cfg.s_exponent)}): {rep.message}", file=stdout)
        for k, v in rep.terms.items():
            print(f"  {k} = {fmt(v)}", file=stdout)
    else:
        if cfg.norms:
            norms = [float(t) for t in cfg.norms.split(",") if t.strip()]
        elif Ks:
            norms = [precond.NORM_SAFETY * estimate_norm(k) for k in Ks]
        else:
            raise ValueError("scalar validation needs --norms or --matrix")
        steps = [cfg.sigma, cfg.gamma, cfg.tau]
        if any(v is None for v in steps):
            raise ValueError("scalar validation needs --sigma, --gamma and --tau")
        rep = precond.validate_split(*steps, norms)
        bound = 1.0 / math.sqrt(1.0 + sum(n * n for n in norms))
        print(f"scalar steps sigma={fmt(cfg.sigma)} gamma={fmt(cfg.gamma)} tau={fmt(cfg.tau)}", file=stdout)
        print(f"  {rep.message}", file=stdout)
        print(f"  equal steps sigma=gamma=tau=s are feasible for s < {fmt(bound)}", file=stdout)
    print("ACCEPTED" if rep.accepted else "REJECTED", file=stdout)
    return EXIT_OK if rep.accepted else EXIT_INVALID


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        cfg = resolve_config(argv)
    except SystemExit as exc:  # argparse usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (OSError, FormatError) as exc:
        print(f"error: cannot read config: {exc}", file=stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INVALID
    try:
        if cfg.task != "validate":
            os.makedirs(cfg.out, exist_ok=True)
        if cfg.task == "validate":
            return run_validate(cfg, stdout)
        runner = run_denoise if cfg.task == "denoise" else run_logreg
        result, extra = runner(cfg)
        summary = _write_outputs(cfg, result, extra)
    except (InvalidMetricError, DivergenceError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_DIVERGED if isinstance(exc, DivergenceError) else EXIT_INVALID
    except (OSError, FormatError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INVALID
    print(
        f"{cfg.task}: {summary['reason']} after {summary['iterations']} iterations, "
        f"objective {summary['objective']}, residual {summary['residual']}",
        file=stdout,
    )
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
