"""numba inner loops shared by the likelihood, simulator and ergodicity code.

All loops walk backwards from the most recent earlier event and stop once a
term is exactly zero beyond the kernel mode (every later term is then zero
too), or once the elapsed time exceeds an optional truncation horizon.
"""
import math

import numba
import numpy as np

from .kernel import EXP, GAMMA, GPD, gt_logderivs1, gt_logderivs2, gt_value

_GAMMAINC_EPS = 1e-16
_GAMMAINC_MAXIT = 1000


@numba.njit(cache=True, nogil=True)
def gammaincc(a, x, lgam):
    """Regularized upper incomplete gamma ``Q(a, x)`` given ``lgam = log Gamma(a)``.

    Power series for ``x < a + 1``, modified Lentz continued fraction otherwise.
    """
    if x <= 0.0:
        return 1.0
    pref = a * math.log(x) - x - lgam
    if x < a + 1.0:
        ap = a
        term = 1.0 / a
        s = term
        for _ in range(_GAMMAINC_MAXIT):
            ap += 1.0
            term *= x / ap
            s += term
            if abs(term) < abs(s) * _GAMMAINC_EPS:
                break
        return 1.0 - s * math.exp(pref)
    tiny = 1e-300
    b = x + 1.0 - a
    cc = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMAINC_MAXIT):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        cc = b + an / cc
        if abs(cc) < tiny:
            cc = tiny
        d = 1.0 / d
        delta = d * cc
        h *= delta
        if abs(delta - 1.0) < _GAMMAINC_EPS:
            break
    return math.exp(pref) * h


@numba.njit(cache=True, nogil=True)
def survival_value(code, c, t):
    """``1 - Gt(t)`` for ``t >= 0``."""
    a = c[1]
    b = c[2]
    if code == EXP:
        return math.exp(-t / b)
    if code == GPD:
        return math.exp(-math.log1p(a * t / b) / a)
    if code == GAMMA:
        return gammaincc(a, t / b, c[3])
    return math.exp(-((t / b) ** a))


@numba.njit(cache=True, nogil=True)
def kernel_sums(code, c, src, qry, order, horizon, mode):
    """Sums of ``gt`` and its log-derivative combinations over ``src < q`` for each query.

    Columns: ``sum gt, sum d_a gt, sum d_b gt, sum d_aa gt, sum d_bb gt, sum d_ab gt``.
    ``src`` and ``qry`` are sorted stretched times; the comparison is strict
    (left limit) so a query coinciding with an event excludes it.
    """
    nq = qry.shape[0]
    out = np.zeros((nq, 6))
    p = 0
    ns = src.shape[0]
    for i in range(nq):
        q = qry[i]
        while p < ns and src[p] < q:
            p += 1
        s0 = sa = sb = saa = sbb = sab = 0.0
        for j in range(p - 1, -1, -1):
            dt = q - src[j]
            if dt > horizon:
                break
            if order == 0:
                g = gt_value(code, c, dt)
                if g == 0.0:
                    if dt > mode:
                        break
                    continue
                s0 += g
            elif order == 1:
                g, la, lb = gt_logderivs1(code, c, dt)
                if g == 0.0:
                    if dt > mode:
                        break
                    continue
                s0 += g
                sa += g * la
                sb += g * lb
            else:
                g, la, lb, laa, lbb, lab = gt_logderivs2(code, c, dt)
                if g == 0.0:
                    if dt > mode:
                        break
                    continue
                s0 += g
                sa += g * la
                sb += g * lb
                saa += g * (laa + la * la)
                sbb += g * (lbb + lb * lb)
                sab += g * (lab + la * lb)
        out[i, 0] = s0
        out[i, 1] = sa
        out[i, 2] = sb
        out[i, 3] = saa
        out[i, 4] = sbb
        out[i, 5] = sab
    return out


@numba.njit(cache=True, nogil=True)
def survival_sums(code, c, src, qry, horizon):
    """For each query: (number of ``src < q``, sum of ``1 - Gt(q - s)`` over those)."""
    nq = qry.shape[0]
    cnt = np.zeros(nq)
    tot = np.zeros(nq)
    p = 0
    ns = src.shape[0]
    for i in range(nq):
        q = qry[i]
        while p < ns and src[p] < q:
            p += 1
        cnt[i] = p
        s = 0.0
        for j in range(p - 1, -1, -1):
            dt = q - src[j]
            if dt > horizon:
                break
            v = survival_value(code, c, dt)
            if v == 0.0:
                break
            s += v
        tot[i] = s
    return cnt, tot


@numba.njit(cache=True, nogil=True)
def intensity_path(code, c, src, qry, horizon, mode):
    """``sum gt(q - s)`` over ``src < q`` (no derivatives)."""
    return kernel_sums(code, c, src, qry, 0, horizon, mode)[:, 0]
