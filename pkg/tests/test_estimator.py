import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from hawkes_nsk import (ConstantBaseline, DataError, DomainError, EventSequence, FitOptions, IllConditionedError,
                        InvalidParameterError, KernelFamily, KernelParams, ModelSpec,
                        QuadraticExpBaseline, covariance_estimate, fit_mle, loglik, reference_model, param_transform,
                        param_untransform, score, simulate_hawkes, stream_seed)
from hawkes_nsk.likelihood import LikelihoodWorkspace


def poisson_template():
    return ModelSpec(ConstantBaseline(1.0), KernelFamily.EXPONENTIAL, KernelParams(eta=0.2, beta=1.0))


@pytest.fixture(scope="module")
def poisson_data():
    truth = ModelSpec(ConstantBaseline(2.0), KernelFamily.EXPONENTIAL, KernelParams(eta=0.0, beta=1.0))
    return simulate_hawkes(truth, 400.0, 11)


@pytest.fixture(scope="module")
def model3_fit():
    m = reference_model(3)
    ev = simulate_hawkes(m, 100.0, stream_seed(5, 0))
    return m, ev, fit_mle(ev, m, FitOptions(starts=3, seed=1))


# --- transforms ------------------------------------------------------------

def test_transform_examples():
    m = reference_model(2)
    z = param_transform(m.theta, m)
    assert z[3] == 0.0                                    # logit(0.5)
    np.testing.assert_allclose(z[:3], np.log([5.0, 1.25, 2.5]), rtol=1e-15)
    mb = m.with_kernel(KernelParams(eta=0.3, alpha=2.0, beta=1.0))
    assert param_transform(mb.theta, mb)[5] == 0.0        # log(1)
    np.testing.assert_allclose(param_untransform(param_transform(m.theta, m), m), m.theta, rtol=1e-15)
    q = ModelSpec(QuadraticExpBaseline(-0.3, 0.2, 1.1), KernelFamily.EXPONENTIAL, KernelParams(eta=0.4, beta=2.0))
    np.testing.assert_array_equal(param_transform(q.theta, q)[:3], q.theta[:3])   # identity coordinates


def test_transform_boundary_errors():
    m = reference_model(1)
    with pytest.raises(DomainError):
        param_transform(np.array([5, 1.25, 2.5, 0.0, 0.25, 0.75]), m)
    with pytest.raises(DomainError):
        param_transform(np.array([5, 0.0, 2.5, 0.5, 0.25, 0.75]), m)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 50.0), min_size=3, max_size=3), st.floats(0.001, 0.999),
       st.floats(0.05, 5.0), st.floats(0.05, 5.0))
def test_property_transform_round_trip(nu, eta, alpha, beta):
    m = reference_model(2)
    th = np.array(nu + [eta, alpha, beta])
    back = param_untransform(param_transform(th, m), m)
    np.testing.assert_allclose(back, th, rtol=1e-12)


# --- Poisson submodel ------------------------------------------------------

def test_poisson_submodel_closed_form(poisson_data):
    ev = poisson_data
    fit = fit_mle(ev, poisson_template(), fix={"eta": 0.0})
    nu_hat = ev.count / ev.scale_n
    assert fit.converged
    assert fit.theta_hat[0] == pytest.approx(nu_hat, rel=1e-12)
    assert fit.std_errors[0] == pytest.approx(math.sqrt(nu_hat / ev.scale_n), rel=1e-12)
    assert fit.std_errors[1] == 0.0 and fit.std_errors[2] == 0.0
    assert fit.diagnostics["fixed"]["eta"] == 0.0


def test_poisson_se_example():
    # nu_hat = 2 at n = 400: SE = sqrt(2/400)
    ev = EventSequence(np.linspace(0.5 / 800, 1 - 0.5 / 800, 800), 400.0)
    fit = fit_mle(ev, poisson_template(), fix={"eta": 0.0})
    assert fit.theta_hat[0] == pytest.approx(2.0, rel=1e-13)
    assert fit.std_errors[0] == pytest.approx(0.0707107, abs=5e-7)


def test_free_eta_on_poisson_data(poisson_data):
    ev = poisson_data
    fit = fit_mle(ev, poisson_template(), FitOptions(starts=3))
    assert fit.converged and not fit.boundary
    nu, eta = fit.theta_hat[0], fit.theta_hat[1]
    se_nu, se_eta = fit.std_errors[0], fit.std_errors[1]
    assert abs(nu - 2.0) < 3 * se_nu
    assert eta < 3 * se_eta


@pytest.mark.parametrize("seed", [12, 15])
def test_poisson_data_boundary_fits_are_flagged(seed):
    """With eta* = 0 the excitation is weakly identified; some samples drive the fit to the boundary."""
    truth = ModelSpec(ConstantBaseline(2.0), KernelFamily.EXPONENTIAL, KernelParams(eta=0.0, beta=1.0))
    ev = simulate_hawkes(truth, 400.0, seed)
    fit = fit_mle(ev, poisson_template(), FitOptions(starts=3))
    assert fit.boundary
    assert fit.theta_hat[1] < 1e-6 or fit.theta_hat[1] > 1 - 1e-6


# --- fitting the reference models ---------------------------------------------

def test_converged_fit_properties(model3_fit):
    m, ev, fit = model3_fit
    assert fit.converged and not fit.boundary
    assert fit.gradient_norm < 1e-7
    # natural-coordinate score, chain-rule transported to the optimisation coordinates
    from hawkes_nsk.estimator import ParamTransform
    tr = ParamTransform(m)
    j1, _ = tr.jacobian(tr.forward(fit.theta_hat))
    assert np.linalg.norm(score(fit.model, ev) * j1) < 10 * 1e-7
    assert fit.loglik_at_opt >= loglik(m, ev)
    assert fit.loglik_at_opt == pytest.approx(loglik(fit.model, ev), rel=1e-14)
    assert len(fit.starts_used) == 3 and fit.param_names == m.param_names
    assert np.all(np.isfinite(fit.std_errors)) and np.all(fit.std_errors > 0)
    d = fit.as_dict()
    assert d["converged"] is True and len(d["theta_hat"]) == 6


def test_covariance_is_inverse_information(model3_fit):
    _, ev, fit = model3_fit
    prod = fit.covariance @ (ev.scale_n * fit.information)
    np.testing.assert_allclose(prod, np.eye(6), atol=1e-8)
    np.testing.assert_allclose(fit.std_errors, np.sqrt(np.diag(fit.covariance)), rtol=1e-15)


def test_covariance_estimate_errors():
    with pytest.raises(IllConditionedError) as exc:
        covariance_estimate(np.array([[1.0, 1.0], [1.0, 1.0 + 1e-15]]), 10.0)
    assert exc.value.condition_number > 1e12
    cov, se = covariance_estimate(np.diag([4.0, 1.0]), 4.0)
    np.testing.assert_allclose(se, [0.25, 0.5])


def test_reparameterisation_invariance(model3_fit):
    """A different monotone map (squares and a tanh-based map for eta) finds the same maximiser."""
    m, ev, fit = model3_fit
    ws = LikelihoodWorkspace(m, ev)

    def nat(u):
        th = u ** 2
        th[3] = 0.5 * (1 + math.tanh(u[3]))
        return th

    def f(u):
        th = nat(u)
        ll, sc, _ = ws.evaluate(th, order=1)
        dth = 2 * u
        dth[3] = 0.5 * (1 - math.tanh(u[3]) ** 2)
        return -ll, -sc * dth

    u0 = np.sqrt(fit.theta_hat * np.array([1.1, 0.9, 1.05, 1, 0.95, 1.1]))
    u0[3] = math.atanh(2 * 0.45 - 1)
    res = optimize.minimize(f, u0, jac=True, method="BFGS", options={"gtol": 1e-11, "maxiter": 2000})
    np.testing.assert_allclose(nat(res.x), fit.theta_hat, rtol=1e-6, atol=1e-6)


def test_determinism_of_starts():
    m = reference_model(2)
    ev = simulate_hawkes(m, 40.0, 3)
    a = fit_mle(ev, m, FitOptions(starts=3, seed=4))
    b = fit_mle(ev, m, FitOptions(starts=3, seed=4))
    np.testing.assert_array_equal(a.theta_hat, b.theta_hat)
    for x, y in zip(a.starts_used, b.starts_used):
        np.testing.assert_array_equal(x, y)


def test_moment_start_values():
    from hawkes_nsk.estimator import moment_start
    ev = EventSequence(np.linspace(0.01, 0.99, 100), 50.0)
    th = moment_start(reference_model(1), ev)
    np.testing.assert_allclose(th, [1.0, 1.0, 1.0, 0.5, 0.2, 0.5])
    th = moment_start(reference_model(3), ev)
    np.testing.assert_allclose(th[3:], [0.5, 1.0, 0.5])


def test_fit_errors():
    m = reference_model(1)
    with pytest.raises(DataError):
        fit_mle(EventSequence(np.array([0.1, 0.2]), 10.0), m)
    with pytest.raises(InvalidParameterError):
        fit_mle(simulate_hawkes(m, 10.0, 1), m, fix={"gamma": 1.0})


def test_fix_pins_coordinates():
    m = reference_model(2)
    ev = simulate_hawkes(m, 60.0, 8)
    fit = fit_mle(ev, m, FitOptions(starts=2), fix={"alpha": 2.0})
    assert fit.theta_hat[4] == 2.0 and fit.std_errors[4] == 0.0
    assert fit.converged


def test_soft_conditions_reported():
    m = reference_model(1)
    ev = simulate_hawkes(m, 60.0, 12)
    fit = fit_mle(ev, m, FitOptions(starts=2))
    names = {c["name"] for c in fit.diagnostics["conditions"]}
    assert {"C1-eta", "C3(2)", "C4(2)"} <= names
