"""Exact simulation by Ogata thinning.

The envelope at time ``s`` is ``nu_high + sum_i sup_{u >= s - s_i} g(u)``;
because each term dominates its kernel over the whole future it stays valid
until the next accepted event, so it only needs refreshing for efficiency.
It is recomputed at every candidate point, and whenever ``REFRESH_WAITS / M``
passes without a candidate (``M`` the current envelope); by memorylessness of
the exponential proposal gaps this leaves the algorithm exact.

For long-memory kernels the contribution of old events is bracketed rather
than summed at every candidate (see :func:`_thin`); acceptance decisions are
still those of the exact intensity.
"""
from __future__ import annotations

import math

import numba
import numpy as np
from scipy.interpolate import BSpline, PPoly

from .baseline import BaselineSpec, BSplineBaseline, ConstantBaseline, QuadraticExpBaseline, baseline_bounds
from .errors import DomainError, EnvelopeViolation, ExplosionError, InvalidParameterError
from .kernel import (EXP, GAMMA, GPD, KernelFamily, KernelParams, check_params, gt_mode, gt_sup_after, gt_value,
                     kernel_constants, kernel_mean, survival_tilde, tail_quantile)
from .model import EventSequence, ModelSpec

EXPLOSION_FACTOR = 50.0
# the envelope is refreshed after this many expected waiting times without a candidate
REFRESH_WAITS = 0.5
# relative slack allowed between intensity and envelope (rounding only)
_ENVELOPE_RTOL = 1e-12


def rng_for(seed) -> np.random.Generator:
    """Counter-based generator: Philox keyed by a seed or a ``SeedSequence``."""
    if isinstance(seed, np.random.Generator):
        return seed
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


def stream_seed(master: int, *key: int) -> np.random.SeedSequence:
    """Independent stream for ``(master, key...)``; identical regardless of execution order."""
    return np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key))


def baseline_ppoly(spec: BaselineSpec) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise-polynomial form ``(breaks, coef[power, piece])`` for evaluation inside numba."""
    if isinstance(spec, BSplineBaseline):
        pp = PPoly.from_spline(BSpline(spec.knots, spec.params, spec.degree, extrapolate=False))
        keep = pp.x[1:] > pp.x[:-1]
        brk = np.concatenate([pp.x[:-1][keep], [pp.x[1:][keep][-1]]])
        return np.ascontiguousarray(brk), np.ascontiguousarray(pp.c[:, keep])
    if isinstance(spec, QuadraticExpBaseline):
        e1, a, b = (math.exp(v) for v in spec.params)
        return np.array([0.0, 1.0]), np.array([[(a + b) ** 2], [-2 * a * (a + b)], [e1 + a * a]])
    if isinstance(spec, ConstantBaseline):
        return np.array([0.0, 1.0]), np.array([[spec.nu]])
    raise TypeError(f"unsupported baseline {type(spec).__name__}")


@numba.njit(cache=True, nogil=True)
def _pp_eval(brk, coef, x):
    m = brk.shape[0] - 2
    k = 0
    while k < m and x >= brk[k + 1]:
        k += 1
    dx = x - brk[k]
    v = 0.0
    for p in range(coef.shape[0]):
        v = v * dx + coef[p, k]
    return v


@numba.njit(cache=True, nogil=True)
def _tail_ratio(code, c, lag, delta):
    """Lower bound of ``gt(a + delta) / gt(a)`` over all ages ``a >= lag`` (``lag`` past the mode)."""
    a = c[1]
    b = c[2]
    if delta <= 0.0:
        return 1.0
    if code == EXP:
        return math.exp(-delta / b)
    if code == GPD:
        return math.exp(-(1.0 / a + 1.0) * math.log1p(a * delta / (b + a * lag)))
    if code == GAMMA:
        r = math.exp(-delta / b)
        if a < 1.0:
            r *= math.exp((1.0 - a) * (math.log(lag) - math.log(lag + delta)))
        return r
    # Weibull: the ratio decreases without bound in the age when the shape exceeds one
    if a > 1.0:
        return 0.0
    g0 = gt_value(code, c, lag)
    if g0 == 0.0:
        return 0.0
    return gt_value(code, c, lag + delta) / g0


@numba.njit(cache=True, nogil=True)
def _far_sum(code, c, ev, lo, hi, t):
    s = 0.0
    for j in range(lo, hi):
        s += gt_value(code, c, t - ev[j])
    return s


@numba.njit(cache=True, nogil=True)
def _thin(code, c, mode, brk, coef, n, t_end, nu_high, refresh, rng, cap, const_x, lag):
    """Thinning on ``[0, t_end]`` (stretched). Returns (events, status, violations, candidates).

    ``const_x >= 0`` freezes the baseline at that unit position (stationary use).
    status: 0 ok, 1 explosion guard hit.

    Events older than ``lag`` (beyond the mode, so their terms are decreasing)
    form the far set ``ev[first:split]``; its excitation is kept as the exact
    sum ``far`` at the snapshot time ``ts``. At a later time ``t`` the far sum
    lies in ``[far * rho, far]`` with ``rho`` from :func:`_tail_ratio`, which
    decides most candidates; the exact far sum is computed only when the
    uniform draw falls inside that band, so acceptance is exact.
    """
    eta = c[0]
    ev = np.empty(cap)
    k = 0
    first = 0
    split = 0
    far = 0.0
    ts = 0.0
    t = 0.0
    violations = 0
    candidates = 0
    envelope = nu_high
    while True:
        w = rng.exponential(1.0 / envelope)
        if w > refresh / envelope:
            t += refresh / envelope
            if t >= t_end:
                break
        else:
            t += w
            if t >= t_end:
                break
        if t - ts > 0.5 * lag:
            # new snapshot: move aged events into the far set, recompute its sum exactly
            while split < k and t - ev[split] >= lag:
                split += 1
            while first < split and gt_value(code, c, t - ev[first]) == 0.0:
                first += 1
            far = eta * _far_sum(code, c, ev, first, split, t)
            ts = t
        near = 0.0
        env = nu_high + far
        for j in range(split, k):
            dt = t - ev[j]
            g = gt_value(code, c, dt)
            if mode > 0.0:
                sv = gt_sup_after(code, c, dt, mode)
            else:
                sv = g
            near += eta * g
            env += eta * sv
        if w > refresh / envelope:
            envelope = env
            continue
        candidates += 1
        x = const_x if const_x >= 0.0 else t / n
        base = _pp_eval(brk, coef, x) + near
        if base + far > envelope * (1.0 + _ENVELOPE_RTOL):
            violations += 1
        u = rng.random() * envelope
        if u <= base + far * _tail_ratio(code, c, lag, t - ts):
            accept = True
        elif u > base + far:
            accept = False
        else:
            accept = u <= base + eta * _far_sum(code, c, ev, first, split, t)
        if accept:
            if k >= cap:
                return ev[:k], 1, violations, candidates
            ev[k] = t
            k += 1
            env += eta * gt_sup_after(code, c, 0.0, mode)
        envelope = env
    return ev[:k].copy(), 0, violations, candidates


def _squeeze_lag(family: KernelFamily, params: KernelParams, c: np.ndarray, mode: float) -> float:
    """Age beyond which events enter the bounded far set: past the mode and the 1e-3 tail quantile."""
    return float(max(tail_quantile(family, params, 1e-3), 2.0 * mode, 1e-3 * kernel_mean(family, params)))


def _guard_cap(scale: float, nu_high: float, eta: float) -> int:
    return int(max(EXPLOSION_FACTOR * scale * nu_high / (1.0 - eta), 100.0))


def _check_simulable(family: KernelFamily, params: KernelParams) -> None:
    check_params(family, params)
    c = kernel_constants(family, params)
    if math.isinf(gt_sup_after(family.value, c, 0.0, gt_mode(family.value, c))):
        raise InvalidParameterError(
            "kernel density is unbounded at the origin (shape < 1); thinning needs a bounded kernel")


def simulate_hawkes(model: ModelSpec, n: float, seed, refresh: float = REFRESH_WAITS) -> EventSequence:
    """One realisation on the stretched window ``[0, n]``, returned on the unit window.

    ``seed`` is an integer, a ``SeedSequence`` or a ``Generator``; identical
    inputs give identical output.
    """
    if not n > 0:
        raise DomainError(f"scale n must be positive, got {n}")
    fam, p = model.family, model.kernel_params
    _check_simulable(fam, p)
    _, nu_high = baseline_bounds(model.baseline)
    brk, coef = baseline_ppoly(model.baseline)
    c = kernel_constants(fam, p)
    mode = gt_mode(fam.value, c)
    if not refresh > 0:
        raise InvalidParameterError("refresh must be positive")
    cap = _guard_cap(n, nu_high, p.eta)
    ev, status, viol, cand = _thin(fam.value, c, mode, brk, coef, float(n), float(n), nu_high,
                                   float(refresh), rng_for(seed), cap, -1.0, _squeeze_lag(fam, p, c, mode))
    if status == 1:
        raise ExplosionError(f"event count exceeded {cap} (explosion guard); check eta < 1 and the baseline")
    if viol:
        raise EnvelopeViolation(f"{viol} candidate points exceeded the thinning envelope")
    times = ev / n
    return EventSequence(times, float(n), meta={"candidates": int(cand), "envelope_violations": 0,
                                                "seed": _seed_repr(seed)})


def _seed_repr(seed):
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": seed.entropy, "spawn_key": list(seed.spawn_key)}
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    return None


def default_burn_in(nu_const: float, family, params: KernelParams, tol: float = 1e-6) -> float:
    """Burn-in after which ``eta (1 - Gt(B)) / (1 - eta)`` drops below ``tol * nu``.

    Never shorter than ``20 / (1 - eta)`` kernel means.
    """
    eta = params.eta
    floor = 20.0 / (1.0 - eta) * kernel_mean(family, params) if eta > 0 else 0.0
    if eta == 0:
        return 0.0
    target = tol * nu_const * (1.0 - eta) / eta
    if target >= 1.0:
        return floor
    b = tail_quantile(family, params, target)
    while eta * float(survival_tilde(family, params, b)) / (1.0 - eta) > tol * nu_const:
        b *= 1.5
    return max(b, floor)


def simulate_stationary(nu_const: float, family, params: KernelParams, horizon: float, seed,
                        burn_in: float | None = None) -> EventSequence:
    """Constant-baseline Hawkes process started empty at ``-burn_in``; events on ``[0, horizon]``.

    The result is an :class:`EventSequence` with ``scale_n = horizon``; burn-in
    events are kept in ``history`` (negative unit times) so intensities inside
    the window see the full past.
    """
    if not nu_const > 0:
        raise InvalidParameterError("stationary baseline must be positive")
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    family = family if isinstance(family, KernelFamily) else KernelFamily[family.upper()]
    _check_simulable(family, params)
    if burn_in is None:
        burn_in = default_burn_in(nu_const, family, params)
    c = kernel_constants(family, params)
    mode = gt_mode(family.value, c)
    total = burn_in + horizon
    refresh = REFRESH_WAITS
    cap = _guard_cap(total, nu_const, params.eta)
    brk, coef = np.array([0.0, 1.0]), np.array([[float(nu_const)]])
    ev, status, viol, cand = _thin(family.value, c, mode, brk, coef, float(total), float(total), float(nu_const),
                                   float(refresh), rng_for(seed), cap, 0.0,
                                   _squeeze_lag(family, params, c, mode))
    if status == 1:
        raise ExplosionError(f"event count exceeded {cap} (explosion guard)")
    if viol:
        raise EnvelopeViolation(f"{viol} candidate points exceeded the thinning envelope")
    shifted = ev - burn_in
    # keep only the window; drop events that land exactly on 0 into history
    inside = shifted >= 0.0
    times = shifted[inside] / horizon
    hist = shifted[~inside] / horizon
    return EventSequence(times, float(horizon), history=hist,
                         meta={"burn_in": float(burn_in), "nu": float(nu_const), "candidates": int(cand)})


def intensity_at(model: ModelSpec, events: EventSequence, t) -> float:
    """``nu(t) + sum_{t_i < t} g(n (t - t_i))``; left limit, so an event at ``t`` is excluded."""
    from . import _core

    ta = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any((ta < 0) | (ta > 1)):
        raise DomainError("intensity time must lie in [0, 1]")
    order = np.argsort(ta, kind="stable")
    c = model.kernel_constants()
    fam = model.family
    sums = np.empty(len(ta))
    sums[order] = _core.kernel_sums(fam.value, c, events.all_stretched(), events.scale_n * ta[order], 0,
                                    math.inf, gt_mode(fam.value, c))[:, 0]
    lam = model.baseline.derivs(ta)[0] + model.kernel_params.eta * sums
    return float(lam[0]) if np.ndim(t) == 0 else lam
