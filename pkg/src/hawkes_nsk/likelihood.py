"""Normalised log-likelihood, score, observed information, compensator and residuals.

Everything is computed on the stretched scale ``[0, n]`` where the intensity is

    lambda(s) = nu(s / n) + sum_{s_i < s} g(s - s_i).

The normalised log-likelihood is ``(1/n) [sum_i log lambda(s_i-) - Lambda(n)]``.
It differs from the unit-window version by the additive constant
``-log(n) N / n``, which does not move the maximiser and is not included.
"""
from __future__ import annotations

import math

import numpy as np

from . import _core
from .baseline import baseline_bounds
from .errors import DomainError, InvalidParameterError, NumericFailure
from .kernel import cdf_tilde_derivs, gt_mode, gt_value, tail_quantile
from .model import EventSequence, ModelSpec


def truncation_horizon(model: ModelSpec, eps: float) -> float:
    """Elapsed stretched time beyond which kernel terms may be dropped.

    ``eps = 0`` means exact evaluation (infinite horizon). Otherwise the
    horizon lies beyond the ``1 - eps`` kernel quantile and beyond the point
    where ``g`` falls under ``eps * nu_low``.
    """
    if eps <= 0:
        return math.inf
    fam, p = model.family, model.kernel_params
    if p.eta == 0.0:
        return 0.0
    nu_low, _ = baseline_bounds(model.baseline)
    c = model.kernel_constants()
    m = gt_mode(fam.value, c)
    h = max(tail_quantile(fam, p, eps), m)
    while p.eta * gt_value(fam.value, c, h) > eps * nu_low:
        h *= 2.0
    return h


class LikelihoodWorkspace:
    """Per-dataset cache for repeated likelihood evaluations.

    Spline baselines are linear in their coefficients, so the basis matrix at
    the event times is computed once. Results of the latest evaluation are
    kept keyed by ``theta``; any other ``theta`` recomputes.
    """

    def __init__(self, model: ModelSpec, events: EventSequence, horizon_eps: float = 0.0):
        self.model = model
        self.events = events
        self.horizon_eps = float(horizon_eps)
        self.n = events.scale_n
        self.s = events.stretched
        self.src = events.all_stretched()
        self._basis = None
        if model.baseline.linear:
            _, self._basis, _ = model.baseline.derivs(events.times, order=1)
        self._cache_key = None
        self._cache = None

    # -- pieces -------------------------------------------------------------

    def _baseline_at_events(self, model: ModelSpec, order: int):
        if self._basis is not None:
            B = self._basis
            v = B @ model.baseline.params
            h = np.zeros((len(v), B.shape[1], B.shape[1])) if order >= 2 else None
            return v, B, h
        return model.baseline.derivs(self.events.times, order=max(order, 1))

    def _compensator_parts(self, model: ModelSpec, order: int):
        """``Lambda(n)`` and its gradient/Hessian over theta."""
        d_nu, d = model.d_nu, model.d
        n = self.n
        I, gI, hI = model.baseline.integral_derivs(0.0, 1.0)
        fam, kp = model.family, model.kernel_params
        # remaining kernel mass inside the window for every source event
        r_end = n - self.src
        r_start = np.maximum(-self.src, 0.0)
        G, da, db, daa, dbb, dab = cdf_tilde_derivs(fam, kp, r_end, order=max(order, 1))
        if len(self.events.history):
            G0, da0, db0, daa0, dbb0, dab0 = cdf_tilde_derivs(fam, kp, r_start, order=max(order, 1))
            G, da, db = G - G0, da - da0, db - db0
            if order >= 2:
                daa, dbb, dab = daa - daa0, dbb - dbb0, dab - dab0
        eta = kp.eta
        value = n * I + eta * G.sum()
        if order == 0:
            return value, None, None
        grad = np.zeros(d)
        grad[:d_nu] = n * gI
        grad[d_nu] = G.sum()
        if fam.has_shape:
            grad[d_nu + 1] = eta * da.sum()
            grad[d_nu + 2] = eta * db.sum()
        else:
            grad[d_nu + 1] = eta * db.sum()
        if order < 2:
            return value, grad, None
        hess = np.zeros((d, d))
        hess[:d_nu, :d_nu] = n * hI
        k = d_nu
        if fam.has_shape:
            Sa, Sb = da.sum(), db.sum()
            hess[k, k + 1] = hess[k + 1, k] = Sa
            hess[k, k + 2] = hess[k + 2, k] = Sb
            hess[k + 1, k + 1] = eta * daa.sum()
            hess[k + 2, k + 2] = eta * dbb.sum()
            hess[k + 1, k + 2] = hess[k + 2, k + 1] = eta * dab.sum()
        else:
            Sb = db.sum()
            hess[k, k + 1] = hess[k + 1, k] = Sb
            hess[k + 1, k + 1] = eta * dbb.sum()
        return value, grad, hess

    def event_intensities(self, model: ModelSpec, order: int = 0):
        """``lambda(s_i-)`` at every window event, with gradient/Hessian stacks if requested."""
        fam = model.family
        c = model.kernel_constants()
        eta = model.kernel_params.eta
        horizon = truncation_horizon(model, self.horizon_eps)
        mode = gt_mode(fam.value, c)
        sums = _core.kernel_sums(fam.value, c, self.src, self.s, order, horizon, mode)
        nu, gnu, hnu = self._baseline_at_events(model, order)
        lam = nu + eta * sums[:, 0]
        if order == 0:
            return lam, None, None
        N, d_nu, d = len(lam), model.d_nu, model.d
        grad = np.zeros((N, d))
        grad[:, :d_nu] = gnu
        k = d_nu
        grad[:, k] = sums[:, 0]
        if fam.has_shape:
            grad[:, k + 1] = eta * sums[:, 1]
            grad[:, k + 2] = eta * sums[:, 2]
        else:
            grad[:, k + 1] = eta * sums[:, 2]
        if order < 2:
            return lam, grad, None
        hess = np.zeros((N, d, d))
        if hnu is not None:
            hess[:, :d_nu, :d_nu] = hnu
        if fam.has_shape:
            hess[:, k, k + 1] = hess[:, k + 1, k] = sums[:, 1]
            hess[:, k, k + 2] = hess[:, k + 2, k] = sums[:, 2]
            hess[:, k + 1, k + 1] = eta * sums[:, 3]
            hess[:, k + 2, k + 2] = eta * sums[:, 4]
            hess[:, k + 1, k + 2] = hess[:, k + 2, k + 1] = eta * sums[:, 5]
        else:
            hess[:, k, k + 1] = hess[:, k + 1, k] = sums[:, 2]
            hess[:, k + 1, k + 1] = eta * sums[:, 4]
        return lam, grad, hess

    # -- main entry ---------------------------------------------------------

    def evaluate(self, theta=None, order: int = 1):
        """Return ``(loglik, score, information)``; entries beyond ``order`` are ``None``."""
        model = self.model if theta is None else self.model.with_theta(theta)
        key = (model.theta.tobytes(), order)
        if self._cache_key is not None and self._cache_key[0] == key[0] and self._cache_key[1] >= order:
            ll, sc, info = self._cache
            return ll, (sc if order >= 1 else None), (info if order >= 2 else None)
        lam, glam, hlam = self.event_intensities(model, order)
        if len(lam) and not np.all(lam > 0):
            raise InvalidParameterError("intensity is not positive at some event time")
        Lam, gLam, hLam = self._compensator_parts(model, order)
        n = self.n
        ll = (np.log(lam).sum() - Lam) / n
        sc = info = None
        if order >= 1:
            ratio = glam / lam[:, None]
            sc = (ratio.sum(axis=0) - gLam) / n
        if order >= 2:
            second = np.einsum("i,ijk->jk", 1.0 / lam, hlam) - ratio.T @ ratio
            info = -(second - hLam) / n
            info = 0.5 * (info + info.T)
        self._cache_key = key
        self._cache = (ll, sc, info)
        return ll, sc, info


def _workspace(model, events, horizon_eps=0.0) -> LikelihoodWorkspace:
    return LikelihoodWorkspace(model, events, horizon_eps)


def loglik(model: ModelSpec, events: EventSequence, horizon_eps: float = 0.0) -> float:
    return float(_workspace(model, events, horizon_eps).evaluate(order=0)[0])


def score(model: ModelSpec, events: EventSequence, horizon_eps: float = 0.0) -> np.ndarray:
    return _workspace(model, events, horizon_eps).evaluate(order=1)[1]


def observed_information(model: ModelSpec, events: EventSequence, horizon_eps: float = 0.0) -> np.ndarray:
    return _workspace(model, events, horizon_eps).evaluate(order=2)[2]


# ---------------------------------------------------------------------------
# compensator and residuals

def _compensator_at(model: ModelSpec, events: EventSequence, q_unit: np.ndarray, horizon: float) -> np.ndarray:
    """``Lambda(n q)`` for sorted unit-domain query times, history included."""
    n = events.scale_n
    fam, c, eta = model.family, model.kernel_constants(), model.kernel_params.eta
    base = np.array([model.baseline.integral_derivs(0.0, float(x))[0] for x in q_unit]) * n \
        if not model.baseline.linear else n * _linear_integrals(model, q_unit)
    src = events.all_stretched()
    qs = n * q_unit
    cnt, surv = _core.survival_sums(fam.value, c, src, qs, horizon)
    exc = cnt - surv
    hist = events.history
    if len(hist):
        # mass already spent before the window opened
        h_s = n * hist
        _, s0 = _core.survival_sums(fam.value, c, h_s, np.zeros(1), horizon)
        exc = exc - (len(hist) - s0[0])
    return base + eta * exc


def _linear_integrals(model: ModelSpec, q_unit: np.ndarray) -> np.ndarray:
    spec = model.baseline
    out = np.empty(len(q_unit))
    prev_x, acc = 0.0, 0.0
    for i, x in enumerate(q_unit):
        acc += spec.integral_derivs(prev_x, float(x))[0]
        prev_x = float(x)
        out[i] = acc
    return out


def compensator(model: ModelSpec, events: EventSequence, t, horizon_eps: float = 0.0):
    """Expected count ``Lambda(n t) = n int_0^t nu + sum_{t_i < t} G(n (t - t_i))``."""
    ta = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any((ta < 0) | (ta > 1)):
        raise DomainError("compensator time must lie in [0, 1]")
    order = np.argsort(ta, kind="stable")
    res = np.empty(len(ta))
    res[order] = _compensator_at(model, events, ta[order], truncation_horizon(model, horizon_eps))
    return float(res[0]) if np.ndim(t) == 0 else res


def rescaled_residuals(model: ModelSpec, events: EventSequence, horizon_eps: float = 0.0) -> np.ndarray:
    """Compensator increments between consecutive events (``t_0 = 0``).

    Under the data-generating model these are i.i.d. unit exponentials.
    """
    if events.count < 1:
        raise DomainError("residuals need at least one event")
    lam = _compensator_at(model, events, events.times, truncation_horizon(model, horizon_eps))
    res = np.diff(np.concatenate([[0.0], lam]))
    if np.any(res < -1e-9 * max(1.0, lam[-1])):
        raise NumericFailure("compensator is not monotone")
    return np.maximum(res, 0.0)

