"""Replication study: simulate, fit, summarise.

Replicate ``i`` at the ``j``-th scale draws its path from stream
``(master_seed, j, i)`` and its multistart jitter from stream
``(master_seed, j, i, 1)``, so results do not depend on scheduling. Workers are
threads; the heavy loops are numba code that releases the GIL, and results are
gathered in replicate order.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

from ._parallel import ordered_map, resolve_threads
from .errors import DomainError, HawkesError, InvalidParameterError, StudyFailure
from .estimator import FitOptions, fit_mle
from .likelihood import loglik
from .model import ModelSpec, fmt, reference_model
from .simulator import simulate_hawkes, stream_seed

KS_MIN_SAMPLES = 8
_KS_TERM_TOL = 1e-12


# ---------------------------------------------------------------------------
# statistics

def kolmogorov_sf(x: float) -> float:
    """``P(K > x)`` for the Kolmogorov limit law.

    The alternating series ``2 sum (-1)^(k-1) exp(-2 k^2 x^2)`` is summed until
    a term drops below 1e-12. Below ``x = 0.6`` that series converges slowly,
    so the equivalent Jacobi-theta form of the CDF is used instead.
    """
    if x <= 0.0:
        return 1.0
    if x < 0.6:
        s = 0.0
        k = 1
        c = math.pi ** 2 / (8.0 * x * x)
        while True:
            term = math.exp(-(2 * k - 1) ** 2 * c)
            s += term
            if term < _KS_TERM_TOL:
                break
            k += 1
        return min(1.0, max(0.0, 1.0 - math.sqrt(2.0 * math.pi) / x * s))
    s = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * x * x)
        s += term if k % 2 else -term
        if term < _KS_TERM_TOL:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * s))


def ks_normal_test(samples) -> tuple[float, float]:
    """One-sample KS statistic against ``Normal(mean, sd)`` with sample moments, and its asymptotic p-value.

    No Lilliefors correction is applied, so the p-value is anti-conservative.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    m = len(x)
    if m < KS_MIN_SAMPLES:
        raise DomainError(f"KS test needs at least {KS_MIN_SAMPLES} samples, got {m}")
    sd = x.std(ddof=1)
    if not sd > 0:
        raise DomainError("KS test on constant samples is degenerate")
    F = special.ndtr((x - x.mean()) / sd)
    i = np.arange(1, m + 1)
    D = float(max(np.max(i / m - F), np.max(F - (i - 1) / m)))
    return D, kolmogorov_sf(math.sqrt(m) * D)


def qq_points(samples) -> np.ndarray:
    """``(Phi^{-1}((i - 0.5) / m), x_(i))`` pairs, shape ``(m, 2)``."""
    x = np.sort(np.asarray(samples, dtype=float))
    m = len(x)
    if m < 2:
        raise DomainError("QQ points need at least two samples")
    q = special.ndtri((np.arange(1, m + 1) - 0.5) / m)
    return np.column_stack([q, x])


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class StudyConfig:
    model: ModelSpec
    n_list: tuple
    replicates: int
    master_seed: int = 0
    fit: FitOptions = field(default_factory=FitOptions)
    output_dir: str | None = None
    exclude_boundary: bool = True
    max_fail_fraction: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "n_list", tuple(float(n) for n in self.n_list))
        if self.replicates < 2:
            raise InvalidParameterError("a study needs at least two replicates")
        if not self.n_list or any(not n > 0 for n in self.n_list):
            raise InvalidParameterError("n_list must be a nonempty list of positive scales")

    @classmethod
    def from_dict(cls, doc: dict) -> "StudyConfig":
        doc = dict(doc)
        m = doc.pop("model")
        if isinstance(m, int) or (isinstance(m, str) and m.isdigit()):
            model = reference_model(int(m))
        else:
            model = ModelSpec.parse(m["baseline"], m["kernel"])
        fit = FitOptions(**doc.pop("fit", {}))
        known = {"n_list", "replicates", "master_seed", "output_dir", "exclude_boundary", "max_fail_fraction"}
        extra = set(doc) - known
        if extra:
            raise InvalidParameterError(f"unknown study config keys: {sorted(extra)}")
        return cls(model=model, fit=fit, **doc)

    def to_dict(self) -> dict:
        return {"model": {"baseline": str(self.model.baseline), "kernel": str(self.model.kernel)},
                "n_list": list(self.n_list), "replicates": self.replicates, "master_seed": self.master_seed,
                "fit": asdict(self.fit), "output_dir": self.output_dir, "exclude_boundary": self.exclude_boundary,
                "max_fail_fraction": self.max_fail_fraction}


@dataclass(frozen=True)
class ReplicateResult:
    index: int
    count: int
    theta_hat: np.ndarray
    std_errors: np.ndarray | None
    converged: bool
    boundary: bool
    loglik_hat: float
    loglik_true: float
    error: str | None = None


@dataclass(frozen=True)
class SummaryRow:
    n: float
    param: str
    true: float
    mean_est: float
    emp_se: float
    emp_se_over_sqrt_reps: float
    median_plugin_se: float
    ks_D: float
    ks_p: float
    ks_reliable: bool
    used: int
    failed: int
    boundary: int
    mean_count: float


@dataclass(frozen=True, eq=False)
class StudyReport:
    config: StudyConfig
    rows: list
    replicates: dict      # n -> list[ReplicateResult]

    def row(self, n: float, param: str) -> SummaryRow:
        for r in self.rows:
            if r.n == float(n) and r.param == param:
                return r
        raise KeyError((n, param))

    def estimates(self, n: float, used_only: bool = True) -> np.ndarray:
        reps = self.replicates[float(n)]
        return np.array([r.theta_hat for r in reps if (not used_only) or _usable(r, self.config)])


def _usable(r: ReplicateResult, cfg: StudyConfig) -> bool:
    return r.error is None and r.converged and not (cfg.exclude_boundary and r.boundary)


def _one_replicate(cfg: StudyConfig, j: int, i: int) -> ReplicateResult:
    n = cfg.n_list[j]
    ev = simulate_hawkes(cfg.model, n, stream_seed(cfg.master_seed, j, i))
    fit_seed = int(stream_seed(cfg.master_seed, j, i, 1).generate_state(1)[0])
    opts = FitOptions(**{**asdict(cfg.fit), "seed": fit_seed})
    ll_true = loglik(cfg.model, ev, opts.horizon_eps)
    try:
        res = fit_mle(ev, cfg.model, opts)
    except HawkesError as exc:
        d = cfg.model.d
        return ReplicateResult(i, ev.count, np.full(d, np.nan), None, False, False, np.nan, ll_true,
                               error=f"{type(exc).__name__}: {exc}")
    return ReplicateResult(i, ev.count, res.theta_hat, res.std_errors, res.converged, res.boundary,
                           res.loglik_at_opt, ll_true)


def run_study(config: StudyConfig, threads: int | None = None, progress=None) -> StudyReport:
    """Run every replicate at every scale and summarise.

    Replicates whose fit fails, does not converge or (by default) lands on the
    boundary are excluded from the summary and counted. Raises
    :class:`StudyFailure` if more than ``max_fail_fraction`` are excluded at
    some scale.
    """
    threads = resolve_threads(threads)
    reps: dict = {}
    rows = []
    names = config.model.param_names
    truth = config.model.theta
    for j, n in enumerate(config.n_list):
        results = ordered_map(lambda i: _one_replicate(config, j, i), range(config.replicates), threads)
        reps[n] = results
        if progress is not None:
            progress(n, results)
        usable = [r for r in results if _usable(r, config)]
        failed = len(results) - len(usable)
        if failed > config.max_fail_fraction * len(results):
            raise StudyFailure(f"{failed} of {len(results)} fits unusable at n={n:g}", achieved=failed)
        est = np.array([r.theta_hat for r in usable])
        ses = np.array([r.std_errors if r.std_errors is not None else np.full(len(truth), np.nan) for r in usable])
        n_boundary = sum(r.boundary for r in results)
        mean_count = float(np.mean([r.count for r in results]))
        for k, name in enumerate(names):
            col = est[:, k]
            sd = float(col.std(ddof=1)) if len(col) > 1 else float("nan")
            reliable = len(col) >= KS_MIN_SAMPLES
            D = p = float("nan")
            if reliable:
                try:
                    D, p = ks_normal_test(col)
                except DomainError:
                    reliable = False
            rows.append(SummaryRow(n=n, param=name, true=float(truth[k]), mean_est=float(col.mean()), emp_se=sd,
                                   emp_se_over_sqrt_reps=sd / math.sqrt(len(col)),
                                   median_plugin_se=float(np.nanmedian(ses[:, k])) if np.any(np.isfinite(ses[:, k]))
                                   else float("nan"),
                                   ks_D=D, ks_p=p, ks_reliable=reliable, used=len(usable), failed=failed,
                                   boundary=int(n_boundary), mean_count=mean_count))
    report = StudyReport(config, rows, reps)
    if config.output_dir:
        write_report(report, config.output_dir)
    return report


# ---------------------------------------------------------------------------
# output

def _ntag(n: float) -> str:
    return "%g" % n


REPORT_COLUMNS = ["n", "mean_count", "param", "true", "mean_est", "emp_se", "emp_se_over_sqrt_reps",
                  "median_plugin_se", "ks_p", "ks_D", "ks_reliable", "used", "failed", "boundary"]


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt(float(v))
    return str(v)


def write_report(report: StudyReport, out_dir) -> None:
    """``report.csv``, ``estimates_<n>.csv``, ``qq_<n>_<param>.csv/.svg`` and ``config.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in report.rows:
            w.writerow([_cell(getattr(r, c)) for c in REPORT_COLUMNS])
    names = report.config.model.param_names
    for n, reps in report.replicates.items():
        with open(out / f"estimates_{_ntag(n)}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replicate", "count", "converged", "boundary", "used", "loglik_hat", "loglik_true"]
                       + names + [f"se_{p}" for p in names] + ["error"])
            for r in reps:
                se = r.std_errors if r.std_errors is not None else [float("nan")] * len(names)
                w.writerow([r.index, r.count, _cell(r.converged), _cell(r.boundary),
                            _cell(_usable(r, report.config)), _cell(r.loglik_hat), _cell(r.loglik_true)]
                           + [_cell(float(v)) for v in r.theta_hat] + [_cell(float(v)) for v in se]
                           + [r.error or ""])
        est = report.estimates(n)
        if len(est) < 2:
            continue
        for k, p in enumerate(names):
            pts = qq_points(est[:, k])
            with open(out / f"qq_{_ntag(n)}_{p}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["theoretical", "sample"])
                for a, b in pts:
                    w.writerow([fmt(a), fmt(b)])
            (out / f"qq_{_ntag(n)}_{p}.svg").write_text(qq_svg(pts, f"{p}, n={_ntag(n)}"))
    (out / "config.json").write_text(json.dumps(report.config.to_dict(), indent=1))


def qq_svg(points: np.ndarray, title: str = "", size: int = 360) -> str:
    """Normal QQ scatter with the moment-matched reference line as a standalone SVG."""
    q, x = points[:, 0], points[:, 1]
    mu, sd = float(x.mean()), float(x.std(ddof=1)) if len(x) > 1 else 0.0
    pad = 40
    qlo, qhi = float(q.min()), float(q.max())
    ylo, yhi = float(min(x.min(), mu + sd * qlo)), float(max(x.max(), mu + sd * qhi))
    if yhi == ylo:
        yhi, ylo = yhi + 1.0, ylo - 1.0
    if qhi == qlo:
        qhi, qlo = qhi + 1.0, qlo - 1.0

    def px(v):
        return pad + (v - qlo) / (qhi - qlo) * (size - 2 * pad)

    def py(v):
        return size - pad - (v - ylo) / (yhi - ylo) * (size - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>',
             f'<text x="{size / 2:.1f}" y="20" text-anchor="middle" font-size="13">{title}</text>',
             f'<line x1="{pad}" y1="{size - pad}" x2="{size - pad}" y2="{size - pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{size - pad}" stroke="black"/>',
             f'<text x="{size / 2:.1f}" y="{size - 8}" text-anchor="middle" font-size="11">normal quantile</text>',
             f'<line x1="{px(qlo):.2f}" y1="{py(mu + sd * qlo):.2f}" x2="{px(qhi):.2f}" y2="{py(mu + sd * qhi):.2f}" '
             f'stroke="red" stroke-width="1"/>']
    for a, b in points:
        parts.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="2" fill="none" stroke="navy"/>')
    parts.append("</svg>\n")
    return "\n".join(parts)
