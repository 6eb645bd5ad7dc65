"""Command-line entry point: ``hawkes-nsk {simulate,eval,fit,study,ergodic-check}``.

Exit codes: 0 success, 1 usage or invalid specification, 2 data error,
3 numerical failure (a diagnostic JSON object is printed on stdout).
Structured outputs are JSON, tables CSV; every float carries 17 significant
digits. Files and directories are written to a temporary sibling and renamed
into place, so an existing output is never left half-written.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import shutil
import sys
import tempfile
from dataclasses import asdict
from pathlib import Path

from . import __version__
from ._parallel import THREADS_ENV, resolve_threads
from .errors import DataError, DomainError, HawkesError, InvalidParameterError, NumericFailure
from .estimator import FitOptions, fit_mle
from .kernel import KernelParams, _family, parse_kernel
from .model import ModelSpec, dumps17, events_to_json, fmt, reference_model, read_events
from .baseline import parse_baseline

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

_BASELINE_HELP = ('baseline spec: "bspline(degree=2,knots=[],coef=[5,1.25,2.5])", '
                  '"quadexp(t1,t2,t3)" or "const(nu)"')


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# atomic output

def _write_text_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _publish_dir(tmp: Path, target: Path, force: bool) -> None:
    if target.exists():
        if not force:
            raise UsageError(f"output directory {target} exists; pass --force to replace it")
        old = target.with_name(f".{target.name}.old")
        if old.exists():
            shutil.rmtree(old)
        os.rename(target, old)
        os.rename(tmp, target)
        shutil.rmtree(old)
    else:
        os.rename(tmp, target)


def _staging_dir(target: Path) -> Path:
    target.parent.mkdir(parents=True, exist_ok=True)
    return Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=target.parent))


def _emit(doc, out: str | None) -> None:
    text = dumps17(doc) + "\n"
    if out:
        _write_text_atomic(Path(out), text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# spec helpers

def _model_from_args(args, need_values: bool = True) -> ModelSpec:
    if getattr(args, "reference_model", None):
        return reference_model(args.reference_model)
    if not args.baseline or not args.kernel:
        raise UsageError("--baseline and --kernel are required (or --reference-model)")
    base = parse_baseline(args.baseline)
    text = args.kernel.strip()
    if "(" not in text:
        if need_values:
            raise UsageError("--kernel needs parameter values here, e.g. gpd(0.5,0.25,0.75)")
        fam = _family(text)
        # structural template: values only matter for pinned coordinates
        return ModelSpec(base, fam, KernelParams(eta=0.5, beta=1.0, alpha=1.0))
    k = parse_kernel(text)
    return ModelSpec(base, k.family, k.params)


def _add_model_args(p, kernel_help="kernel spec, e.g. gpd(0.5,0.25,0.75), gamma(0.5,2,0.5), weibull(...), exp(eta,beta)"):
    p.add_argument("--baseline", help=_BASELINE_HELP)
    p.add_argument("--kernel", help=kernel_help)
    p.add_argument("--reference-model", type=int, choices=(1, 2, 3),
                   help="use one of the three simulation-study models instead of --baseline/--kernel")


def _parse_n_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--n expects a comma-separated list of numbers, got {text!r}") from None
    if not vals:
        raise UsageError("--n list is empty")
    return vals


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(args) -> int:
    from .simulator import simulate_hawkes

    model = _model_from_args(args)
    ev = simulate_hawkes(model, args.n, args.seed)
    fmt_ = args.format or ("json" if args.out and args.out.endswith(".json") else "csv")
    resolved = {"command": "simulate", "model": model.describe(), "n": args.n, "seed": args.seed,
                "format": fmt_, "out": args.out, "count": ev.count, "version": __version__}
    if fmt_ == "json":
        text = events_to_json(ev, seed=args.seed, model=model) + "\n"
    else:
        text = "".join(fmt(t) + "\n" for t in ev.times)
    if args.out:
        _write_text_atomic(Path(args.out), text)
        sys.stdout.write(dumps17(resolved) + "\n")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args) -> int:
    from .likelihood import LikelihoodWorkspace, compensator, rescaled_residuals

    model = _model_from_args(args)
    ev = read_events(args.events, args.n)
    ws = LikelihoodWorkspace(model, ev, args.kernel_horizon_eps)
    ll, sc, info = ws.evaluate(order=2 if args.information else 1)
    doc = {"config": {"command": "eval", "events": args.events, "n": ev.scale_n, "model": model.describe(),
                      "kernel_horizon_eps": args.kernel_horizon_eps, "information": args.information,
                      "residuals": args.residuals, "version": __version__},
           "count": ev.count, "param_names": model.param_names, "loglik": ll, "score": sc,
           "compensator": compensator(model, ev, 1.0, args.kernel_horizon_eps)}
    if args.information:
        doc["information"] = info
    if args.residuals and ev.count:
        doc["residuals"] = rescaled_residuals(model, ev, args.kernel_horizon_eps)
    _emit(doc, args.out)
    return EXIT_OK


def _parse_fix(items) -> dict:
    out = {}
    for it in items or []:
        if "=" not in it:
            raise UsageError(f"--fix expects name=value, got {it!r}")
        k, v = it.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise UsageError(f"--fix value for {k!r} is not a number") from None
    return out


def cmd_fit(args) -> int:
    template = _model_from_args(args, need_values=False)
    ev = read_events(args.events, args.n)
    opts = FitOptions(starts=args.starts, max_iter=args.max_iter, grad_tol=args.grad_tol, seed=args.seed,
                      horizon_eps=args.kernel_horizon_eps)
    fix = _parse_fix(args.fix)
    res = fit_mle(ev, template, opts, fix=fix)
    doc = res.as_dict()
    doc["config"] = {"command": "fit", "events": args.events, "n": ev.scale_n, "baseline": str(template.baseline),
                     "kernel_family": template.family.short_name, "options": asdict(opts), "fix": fix,
                     "version": __version__}
    _emit(doc, args.out)
    return EXIT_OK if res.converged or not args.strict else EXIT_NUMERIC


def cmd_study(args) -> int:
    from .study import StudyConfig, run_study, write_report

    try:
        doc = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise DataError(f"cannot read study config {args.config}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"malformed study config {args.config}: {exc}") from exc
    if args.out:
        doc["output_dir"] = args.out
    if args.replicates:
        doc["replicates"] = args.replicates
    try:
        cfg = StudyConfig.from_dict(doc)
    except TypeError as exc:
        raise InvalidParameterError(f"bad study config: {exc}") from None
    out = Path(cfg.output_dir or "study_out")
    stage = _staging_dir(out)
    try:
        report = run_study(type(cfg)(**{**cfg.__dict__, "output_dir": None}), threads=args.threads)
        write_report(report, stage)
        summary = {"config": {**cfg.to_dict(), "output_dir": str(out), "version": __version__},
                   "rows": [r.__dict__ for r in report.rows]}
        (stage / "summary.json").write_text(dumps17(summary) + "\n")
        (stage / "config.json").write_text(dumps17(summary["config"]) + "\n")
        _publish_dir(stage, out, args.force)
    finally:
        if stage.exists():
            shutil.rmtree(stage)
    sys.stdout.write(dumps17({"output_dir": str(out), "rows": len(report.rows),
                              "threads": resolve_threads(args.threads)}) + "\n")
    return EXIT_OK


def cmd_ergodic(args) -> int:
    from .ergodicity import MCOptions, ergodicity_report

    model = _model_from_args(args)
    n_list = _parse_n_list(args.n)
    limit = MCOptions(horizon=args.limit_horizon, replicates=args.limit_reps, seed=args.seed)
    pi, rows = ergodicity_report(model, args.psi, n_list, args.reps, args.seed, limit=limit, threads=args.threads)
    out = Path(args.out)
    stage = _staging_dir(out)
    try:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["n", "replicates", "mean_average", "mean_abs_dev", "sd_dev", "mean_count", "rate_abs_dev",
                "rate_sd_dev"]
        w.writerow(cols)
        for r in rows:
            w.writerow([fmt(getattr(r, c)) if isinstance(getattr(r, c), float) else getattr(r, c) for c in cols])
        (stage / "convergence.csv").write_text(buf.getvalue())
        summary = {"config": {"command": "ergodic-check", "model": model.describe(), "psi": args.psi, "n": n_list,
                              "reps": args.reps, "seed": args.seed, "limit": asdict(limit),
                              "version": __version__},
                   "pi": pi, "rows": [r.__dict__ for r in rows],
                   "decreasing": bool(all(a.mean_abs_dev > b.mean_abs_dev for a, b in zip(rows, rows[1:])))}
        (stage / "summary.json").write_text(dumps17(summary) + "\n")
        _publish_dir(stage, out, args.force)
    finally:
        if stage.exists():
            shutil.rmtree(stage)
    sys.stdout.write(dumps17({"output_dir": str(out), "pi": pi, "threads": resolve_threads(args.threads)}) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hawkes-nsk", description="Simulate, evaluate and fit non-stationary Hawkes processes "
                                               "with non-exponential kernels.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate one path by thinning")
    _add_model_args(s)
    s.add_argument("--n", type=float, required=True, help="scale n (stretched window length)")
    s.add_argument("--seed", type=int, required=True, help="integer seed")
    s.add_argument("--out", help="output file (.csv one unit time per line, or .json); stdout if omitted")
    s.add_argument("--format", choices=("csv", "json"), help="force the output format")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("eval", help="log-likelihood, score, information and residuals at given parameters")
    _add_model_args(e)
    e.add_argument("--events", required=True, help="event file (CSV or JSON)")
    e.add_argument("--n", type=float, help="scale n (required for CSV input)")
    e.add_argument("--information", action="store_true", help="also report the observed information")
    e.add_argument("--residuals", action="store_true", help="also report time-rescaling residuals")
    e.add_argument("--kernel-horizon-eps", type=float, default=0.0,
                   help="drop kernel terms beyond this tail mass (default 0 = exact)")
    e.add_argument("--out", help="output JSON file; stdout if omitted")
    e.set_defaults(func=cmd_eval)

    f = sub.add_parser("fit", help="maximum-likelihood fit")
    _add_model_args(f, kernel_help="kernel family (gpd, gamma, weibull, exp) or a full spec for --fix defaults")
    f.add_argument("--events", required=True, help="event file (CSV or JSON)")
    f.add_argument("--n", type=float, help="scale n (required for CSV input)")
    f.add_argument("--starts", type=int, default=5, help="number of starts (default 5)")
    f.add_argument("--seed", type=int, default=0, help="seed for the jittered starts (default 0)")
    f.add_argument("--max-iter", type=int, default=500, help="BFGS iteration cap per start (default 500)")
    f.add_argument("--grad-tol", type=float, default=1e-7, help="convergence tolerance on the gradient norm")
    f.add_argument("--fix", action="append", metavar="NAME=VALUE", help="pin a parameter (repeatable)")
    f.add_argument("--kernel-horizon-eps", type=float, default=0.0,
                   help="drop kernel terms beyond this tail mass (default 0 = exact)")
    f.add_argument("--strict", action="store_true", help="exit 3 when the fit does not converge")
    f.add_argument("--out", help="output JSON file; stdout if omitted")
    f.set_defaults(func=cmd_fit)

    st = sub.add_parser("study", help="replication study from a JSON config")
    st.add_argument("--config", required=True, help="JSON config mirroring StudyConfig")
    st.add_argument("--out", help="output directory (overrides the config)")
    st.add_argument("--replicates", type=int, help="override the replicate count")
    st.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or all cores)")
    st.add_argument("--force", action="store_true", help="replace an existing output directory")
    st.set_defaults(func=cmd_study)

    g = sub.add_parser("ergodic-check", help="convergence table of time averages towards the ergodic limit")
    _add_model_args(g)
    g.add_argument("--model", dest="reference_model", type=int, choices=(1, 2, 3), help="alias of --reference-model")
    g.add_argument("--psi", default="identity", choices=("identity", "log", "square", "consistency"),
                   help="functional of the intensity (default identity)")
    g.add_argument("--n", default="200,800,3200", help="comma-separated scales (default 200,800,3200)")
    g.add_argument("--reps", type=int, default=100, help="replicates per scale (default 100)")
    g.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    g.add_argument("--limit-horizon", type=float, default=2000.0, help="stationary horizon for the limit")
    g.add_argument("--limit-reps", type=int, default=20, help="stationary replicates per node for the limit")
    g.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or all cores)")
    g.add_argument("--out", default="ergodic_out", help="output directory (default ergodic_out)")
    g.add_argument("--force", action="store_true", help="replace an existing output directory")
    g.set_defaults(func=cmd_ergodic)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except DataError as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_DATA
    except NumericFailure as exc:
        diag = {"error": type(exc).__name__, "message": str(exc), "achieved": exc.achieved}
        sys.stdout.write(dumps17(diag) + "\n")
        sys.stderr.write(f"numeric failure: {exc}\n")
        return EXIT_NUMERIC
    except (InvalidParameterError, DomainError) as exc:
        sys.stderr.write(f"invalid input: {exc}\n")
        return EXIT_USAGE
    except HawkesError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
