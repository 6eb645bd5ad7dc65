import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from hawkes_nsk import (DomainError, FitOptions, InvalidParameterError, StudyConfig, StudyFailure, kolmogorov_sf,
                        ks_normal_test, reference_model, qq_points, run_study, simulate_hawkes, stream_seed,
                        write_report)


# --- Kolmogorov distribution -------------------------------------------------

@pytest.mark.parametrize("x", [0.05, 0.2, 0.35, 0.5, 0.59, 0.6, 0.61, 0.8, 1.0, 1.358, 1.8, 2.5, 4.0])
def test_kolmogorov_sf_matches_scipy_on_both_branches(x):
    assert kolmogorov_sf(x) == pytest.approx(stats.kstwobign.sf(x), abs=1e-12)


def test_kolmogorov_examples():
    assert kolmogorov_sf(0.0) == 1.0
    assert kolmogorov_sf(-1.0) == 1.0
    assert kolmogorov_sf(1.358) == pytest.approx(0.05002679733444698, abs=1e-12)   # frozen scipy value
    assert kolmogorov_sf(1.358) == pytest.approx(0.05, abs=1e-4)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 5.0), st.floats(1e-4, 1.0))
def test_property_kolmogorov_sf_monotone(x, dx):
    assert kolmogorov_sf(x + dx) <= kolmogorov_sf(x)


# --- KS normality test -------------------------------------------------------

def test_ks_on_normal_quantiles_is_near_perfect():
    m = 200
    x = 3.0 + 2.0 * stats.norm.ppf((np.arange(1, m + 1) - 0.5) / m)
    D, p = ks_normal_test(x)
    # the sample SD of a quantile set is slightly below the scale, so D only approaches 0.5/m
    assert 0.5 / m <= D < 1.1 * 0.5 / m
    assert p == pytest.approx(1.0, abs=1e-12)


def test_ks_statistic_matches_scipy():
    rng = np.random.default_rng(3)
    x = rng.gamma(3.0, size=150)
    D, p = ks_normal_test(x)
    ref = stats.kstest(x, "norm", args=(x.mean(), x.std(ddof=1)))
    assert D == pytest.approx(ref.statistic, rel=1e-12)
    assert p == pytest.approx(kolmogorov_sf(math.sqrt(150) * D), rel=1e-15)


def test_ks_errors():
    with pytest.raises(DomainError):
        ks_normal_test(np.arange(7.0))
    with pytest.raises(DomainError):
        ks_normal_test(np.ones(20))


# --- QQ points ---------------------------------------------------------------

def test_qq_examples():
    pts = qq_points([3.0, 1.0])
    np.testing.assert_allclose(pts[:, 0], [-0.6744897501960817, 0.6744897501960817], rtol=1e-15)
    np.testing.assert_array_equal(pts[:, 1], [1.0, 3.0])
    assert qq_points(np.arange(9.0))[4, 0] == 0.0
    with pytest.raises(DomainError):
        qq_points([1.0])


def test_qq_line_on_normal_samples():
    x = np.random.default_rng(11).standard_normal(10_000)
    pts = qq_points(x)
    slope, intercept = np.polyfit(pts[:, 0], pts[:, 1], 1)
    assert abs(slope - 1) < 0.05 and abs(intercept) < 0.05


# --- study runs --------------------------------------------------------------

def small_config(**kw):
    base = dict(model=reference_model(2), n_list=(30.0, 60.0), replicates=6, master_seed=21,
                fit=FitOptions(starts=2), max_fail_fraction=1.0)
    base.update(kw)
    return StudyConfig(**base)


@pytest.fixture(scope="module")
def small_report():
    return run_study(small_config(), threads=1)


def test_config_validation_and_round_trip():
    with pytest.raises(InvalidParameterError):
        small_config(replicates=1)
    with pytest.raises(InvalidParameterError):
        small_config(n_list=())
    cfg = small_config()
    back = StudyConfig.from_dict(cfg.to_dict())
    assert back.to_dict() == cfg.to_dict()
    assert StudyConfig.from_dict({"model": 3, "n_list": [100], "replicates": 2}).model == reference_model(3)
    with pytest.raises(InvalidParameterError):
        StudyConfig.from_dict({"model": 1, "n_list": [100], "replicates": 2, "bogus": 1})


def test_replicate_paths_use_derived_streams(small_report):
    ev = simulate_hawkes(reference_model(2), 60.0, stream_seed(21, 1, 4))
    assert small_report.replicates[60.0][4].count == ev.count


def test_report_closure(small_report):
    """Every summary number is recomputable from the raw replicate estimates."""
    names = reference_model(2).param_names
    for n in (30.0, 60.0):
        est = small_report.estimates(n)
        for k, p in enumerate(names):
            row = small_report.row(n, p)
            assert row.used == len(est)
            assert row.mean_est == float(est[:, k].mean())
            assert row.emp_se == float(est[:, k].std(ddof=1))
            assert row.emp_se_over_sqrt_reps == row.emp_se / math.sqrt(len(est))
        counts = [r.count for r in small_report.replicates[n]]
        assert small_report.row(n, "eta").mean_count == float(np.mean(counts))


def test_rows_only_from_usable_fits(small_report):
    for n, reps in small_report.replicates.items():
        usable = [r for r in reps if r.converged and not r.boundary and r.error is None]
        row = small_report.row(n, "beta")
        assert row.used == len(usable) and row.failed == len(reps) - len(usable)


def test_determinism_across_thread_counts(small_report):
    other = run_study(small_config(), threads=3)
    for n in (30.0, 60.0):
        np.testing.assert_array_equal(small_report.estimates(n, used_only=False), other.estimates(n, used_only=False))
    assert [r.__dict__ for r in small_report.rows] == [r.__dict__ for r in other.rows] or \
        all(_rows_equal(a, b) for a, b in zip(small_report.rows, other.rows))


def _rows_equal(a, b):
    for k, v in a.__dict__.items():
        w = getattr(b, k)
        if isinstance(v, float) and math.isnan(v):
            if not math.isnan(w):
                return False
        elif v != w:
            return False
    return True


def test_two_replicates_marks_ks_unreliable():
    rep = run_study(small_config(n_list=(30.0,), replicates=2), threads=1)
    for row in rep.rows:
        assert not row.ks_reliable and math.isnan(row.ks_p)


def test_study_failure_threshold():
    with pytest.raises(StudyFailure):
        run_study(small_config(n_list=(30.0,), replicates=2, max_fail_fraction=-1.0), threads=1)


def test_write_report_files(small_report, tmp_path):
    write_report(small_report, tmp_path)
    with open(tmp_path / "report.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * 6 and rows[0]["param"] == "theta_nu1"
    with open(tmp_path / "estimates_60.csv") as fh:
        est = list(csv.DictReader(fh))
    assert len(est) == 6
    for r, rec in zip(small_report.replicates[60.0], est):
        assert float(rec["beta"]) == r.theta_hat[5]          # 17-digit round trip
    assert (tmp_path / "qq_30_eta.csv").exists() and (tmp_path / "qq_30_eta.svg").read_text().startswith("<svg")
    cfg = json.loads((tmp_path / "config.json").read_text())
    assert cfg["replicates"] == 6 and cfg["n_list"] == [30.0, 60.0]
