"""Acceptance criteria 1-8 at their stated tolerances.

Each test records a one-line verdict that is printed in the terminal summary.
Replication studies are expensive (about an hour on one core), so their raw
per-replicate results are cached under ``tests/.acceptance_cache``. The cache
key hashes the package sources and the study configuration, so a cached entry
is exactly what the current code would compute. Set
``HAWKES_NSK_ACCEPTANCE_CACHE=0`` to force recomputation.
"""
import hashlib
import json
import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate, stats

import hawkes_nsk
from hawkes_nsk import (ConstantBaseline, EventSequence, FitOptions, KernelFamily, KernelParams, ModelSpec,
                        REFERENCE_BASELINE, StudyConfig, fit_mle, ks_normal_test, loglik,
                        observed_information, reference_model, rescaled_residuals, run_study, score, simulate_hawkes,
                        stream_seed)
from hawkes_nsk.ergodicity import ergodicity_report
from hawkes_nsk.kernel import cdf_tilde, density

from conftest import ACCEPTANCE
from oracles import central_gradient

CACHE_DIR = Path(__file__).parent / ".acceptance_cache"
STUDY_REPS = 200
STUDY_FIT = FitOptions(starts=3)
PI = 35 / 6


def record(k: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[k] = (bool(ok), detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}")


# ---------------------------------------------------------------------------
# cached replication studies

def _source_digest() -> str:
    h = hashlib.sha256()
    for p in sorted(Path(hawkes_nsk.__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def study(which: int, n: float, seed: int) -> dict:
    """Raw replicate results of a ``STUDY_REPS``-replicate study (cached)."""
    cfg = StudyConfig(model=reference_model(which), n_list=(n,), replicates=STUDY_REPS, master_seed=seed,
                      fit=STUDY_FIT)
    key = hashlib.sha256((_source_digest() + json.dumps(cfg.to_dict(), sort_keys=True)).encode()).hexdigest()[:24]
    path = CACHE_DIR / f"study_m{which}_n{n:g}_{key}.npz"
    use_cache = os.environ.get("HAWKES_NSK_ACCEPTANCE_CACHE", "1") != "0"
    if use_cache and path.exists():
        with np.load(path) as z:
            return {k: z[k] for k in z.files}
    rep = run_study(cfg)
    reps = rep.replicates[float(n)]
    d = cfg.model.d
    out = {"theta": np.array([r.theta_hat for r in reps]),
           "se": np.array([r.std_errors if r.std_errors is not None else np.full(d, np.nan) for r in reps]),
           "converged": np.array([r.converged for r in reps]),
           "boundary": np.array([r.boundary for r in reps]),
           "failed": np.array([r.error is not None for r in reps]),
           "count": np.array([r.count for r in reps])}
    if use_cache:
        CACHE_DIR.mkdir(exist_ok=True)
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, **out)
        os.replace(tmp, path)
    return out


def usable(res: dict) -> np.ndarray:
    return res["converged"] & ~res["boundary"] & ~res["failed"]


@pytest.fixture(scope="module")
def m3_n100():
    return study(3, 100.0, 9100)


@pytest.fixture(scope="module")
def m3_n400():
    return study(3, 400.0, 9400)


@pytest.fixture(scope="module")
def m3_n1600():
    return study(3, 1600.0, 9600)


@pytest.fixture(scope="module")
def m2_n400():
    return study(2, 400.0, 8400)


# ---------------------------------------------------------------------------

def test_criterion_1_mean_event_counts():
    targets = {1: (100.0, 581.0), 2: (400.0, 2331.0), 3: (1600.0, 9332.0)}
    parts, ok = [], True
    for which, (n, target) in targets.items():
        m = reference_model(which)
        counts = np.array([simulate_hawkes(m, n, stream_seed(7000 + which, i)).count for i in range(500)])
        rel = counts.mean() / target - 1
        ok &= abs(rel) <= 0.02
        parts.append(f"M{which} n={n:g}: {counts.mean():.1f} vs {target:g} ({100 * rel:+.2f}%)")
    record(1, ok, "; ".join(parts) + " [tol 2%, 500 paths]")
    assert ok


def test_criterion_2_mle_means_model3_n1600(m3_n1600):
    est = m3_n1600["theta"][usable(m3_n1600)]
    mean = est.mean(axis=0)
    checks = [("eta", mean[3], 0.496, 0.01), ("alpha", mean[4], 2.028, 0.06), ("beta", mean[5], 1.128, 0.02)]
    ok = all(abs(v - t) <= tol for _, v, t, tol in checks)
    detail = ", ".join(f"{p}={v:.4f} (target {t}+-{tol})" for p, v, t, tol in checks)
    record(2, ok, f"{detail}; used {len(est)}/{STUDY_REPS}")
    assert ok


def test_criterion_3_se_scaling_model3(m3_n100, m3_n400):
    sd100 = m3_n100["theta"][usable(m3_n100), 3].std(ddof=1)
    sd400 = m3_n400["theta"][usable(m3_n400), 3].std(ddof=1)
    ratio = sd100 / sd400
    ok = 1.6 <= ratio <= 2.4
    record(3, ok, f"SD(eta) n=100 {sd100:.4f}, n=400 {sd400:.4f}, ratio {ratio:.3f} (target [1.6, 2.4])")
    assert ok


def test_criterion_4_ks_normality_model3_n1600(m3_n1600):
    est = m3_n1600["theta"][usable(m3_n1600)]
    ps = [ks_normal_test(est[:, k])[1] for k in range(est.shape[1])]
    names = reference_model(3).param_names
    ok = min(ps) > 0.01
    record(4, ok, ", ".join(f"{p}: p={v:.3f}" for p, v in zip(names, ps)) + " (all > 0.01)")
    assert ok


def test_criterion_5_plugin_covariance(m2_n400, m3_n400):
    parts, ok = [], True
    for which, res in ((2, m2_n400), (3, m3_n400)):
        u = usable(res)
        emp = res["theta"][u].std(axis=0, ddof=1)
        plug = np.nanmedian(res["se"][u], axis=0)
        rel = plug / emp - 1
        ok &= bool(np.all(np.abs(rel) <= 0.30))
        parts.append(f"M{which}: " + " ".join(f"{p}{100 * r:+.0f}%" for p, r in zip(reference_model(which).param_names, rel)))
    record(5, ok, "; ".join(parts) + " (median plug-in SE vs empirical SD, tol 30%)")
    assert ok


def test_criterion_6_ergodic_limit():
    m = reference_model(1)
    pi, rows, raw = ergodicity_report(m, "identity", (200.0, 800.0, 1600.0, 3200.0), replicates=100, seed=6100,
                                      deviations=True)
    assert pi == pytest.approx(PI, rel=1e-14)
    at1600 = raw[1600.0].mean()
    within = abs(at1600 / PI - 1) <= 0.03
    devs = [r.mean_abs_dev for r in rows if r.n != 1600.0]
    decreasing = all(a > b for a, b in zip(devs, devs[1:]))
    ok = within and decreasing
    record(6, ok, f"mean time average at n=1600 {at1600:.4f} vs {PI:.4f} ({100 * (at1600 / PI - 1):+.2f}%); "
                  f"mean |dev| at n=200/800/3200: " + "/".join(f"{d:.4f}" for d in devs))
    assert ok


def test_criterion_7_property_suite():
    fails = []
    fams = [(KernelFamily.EXPONENTIAL, KernelParams(eta=0.4, beta=1.7)),
            (KernelFamily.GENERALIZED_PARETO, KernelParams(eta=0.55, alpha=0.3, beta=0.8)),
            (KernelFamily.GAMMA, KernelParams(eta=0.45, alpha=1.7, beta=0.6)),
            (KernelFamily.WEIBULL, KernelParams(eta=0.6, alpha=1.6, beta=1.3))]
    worst_s = worst_h = worst_cdf = 0.0
    for i, (fam, p) in enumerate(fams):
        model = ModelSpec(REFERENCE_BASELINE, fam, p)
        ev = simulate_hawkes(model, 20.0, 500 + i)
        theta = model.theta * np.linspace(0.9, 1.1, model.d)
        m = model.with_theta(theta)
        s_fd = central_gradient(lambda th: loglik(model.with_theta(th), ev), theta, rel=1e-5)
        worst_s = max(worst_s, np.max(np.abs(score(m, ev) - s_fd)) / np.max(np.abs(s_fd)))
        H_fd = np.column_stack([central_gradient(lambda th, j=j: score(model.with_theta(th), ev)[j], theta, rel=1e-5)
                                for j in range(model.d)])
        worst_h = max(worst_h, np.max(np.abs(observed_information(m, ev) + H_fd)) / np.max(np.abs(H_fd)))
        for t in (0.05, 0.5, 1.0, 3.0, 10.0):
            q, _ = integrate.quad(lambda u: float(density(fam, KernelParams(eta=1.0, alpha=p.alpha, beta=p.beta), np.array([u]))[0]),
                                  0.0, t, epsabs=1e-13, epsrel=1e-12, limit=200)
            worst_cdf = max(worst_cdf, abs(q - float(cdf_tilde(fam, p, np.array([t]))[0])))
    if worst_s >= 1e-5:
        fails.append("score")
    if worst_h >= 1e-4:
        fails.append("information")
    if worst_cdf >= 1e-8:
        fails.append("density/CDF")
    ks = []
    for which in (1, 2, 3):
        m = reference_model(which)
        pooled = np.concatenate([rescaled_residuals(m, simulate_hawkes(m, 200.0, stream_seed(7700, which, i)))
                                 for i in range(30)])
        ks.append(stats.kstest(pooled, "expon").pvalue)
    if min(ks) <= 0.01:
        fails.append("residual KS")
    t = np.linspace(0.0, 20.0, 2001)
    ex = density(KernelFamily.EXPONENTIAL, KernelParams(eta=0.5, beta=0.8), t)
    ident = max(np.max(np.abs(density(KernelFamily.GAMMA, KernelParams(eta=0.5, alpha=1.0, beta=0.8), t) - ex)),
                np.max(np.abs(density(KernelFamily.WEIBULL, KernelParams(eta=0.5, alpha=1.0, beta=0.8), t) - ex)))
    if ident > 1e-12:
        fails.append("alpha=1 identities")
    times = np.sort(np.random.default_rng(1).uniform(0, 1, 803))
    ev = EventSequence(times, 400.0)
    template = ModelSpec(ConstantBaseline(1.0), KernelFamily.EXPONENTIAL, KernelParams(eta=0.2, beta=1.0))
    fit = fit_mle(ev, template, fix={"eta": 0.0})
    nu = 803 / 400.0
    poisson_ok = fit.theta_hat[0] == pytest.approx(nu, rel=1e-12) and \
        fit.std_errors[0] == pytest.approx(math.sqrt(nu / 400.0), rel=1e-12)
    if not poisson_ok:
        fails.append("Poisson MLE/SE")
    ok = not fails
    record(7, ok, f"score {worst_s:.1e}, information {worst_h:.1e}, density/CDF {worst_cdf:.1e}, "
                  f"residual KS min p {min(ks):.3f}, alpha=1 identities {ident:.1e}, Poisson exact {poisson_ok}"
                  + (f"; failing: {', '.join(fails)}" if fails else ""))
    assert ok


def _cli(args, threads, cwd):
    env = {**os.environ, "HAWKES_NSK_THREADS": str(threads)}
    res = subprocess.run([sys.executable, "-m", "hawkes_nsk", *map(str, args)], capture_output=True, env=env, cwd=cwd)
    assert res.returncode == 0, res.stderr.decode()
    return res.stdout


def _tree(d: Path) -> dict:
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_criterion_8_determinism_across_threads(tmp_path):
    cfg = tmp_path / "study.json"
    cfg.write_text(json.dumps({"model": 2, "n_list": [30, 60], "replicates": 6, "master_seed": 5,
                               "fit": {"starts": 2}, "max_fail_fraction": 1.0}))
    outputs = {}
    for threads in (1, 4):
        run_dir = tmp_path / f"t{threads}"
        run_dir.mkdir()
        _cli(["simulate", "--reference-model", 1, "--n", 80, "--seed", 3, "--out", "events.csv"], threads, run_dir)
        _cli(["simulate", "--reference-model", 1, "--n", 80, "--seed", 3, "--out", "events.json"], threads, run_dir)
        _cli(["eval", "--events", "events.csv", "--n", 80, "--reference-model", 1, "--information", "--residuals",
              "--out", "eval.json"], threads, run_dir)
        _cli(["fit", "--events", "events.json", "--reference-model", 1, "--seed", 2, "--starts", 3, "--out", "fit.json"],
             threads, run_dir)
        _cli(["study", "--config", cfg, "--out", "study", "--threads", threads], threads, run_dir)
        _cli(["ergodic-check", "--model", 3, "--n", "20,40", "--reps", 6, "--seed", 4, "--limit-reps", 2,
              "--out", "ergodic", "--threads", threads], threads, run_dir)
        outputs[threads] = _tree(run_dir)
    a, b = outputs[1], outputs[4]
    differing = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    ok = not differing and len(a) >= 8
    record(8, ok, f"{len(a)} output files from simulate/eval/fit/study/ergodic-check, 1 vs 4 threads: "
                  + ("bit-identical" if ok else f"differ: {differing}"))
    assert ok
