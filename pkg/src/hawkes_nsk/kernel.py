"""Excitation kernels ``g(t) = eta * gt(t)`` and their parameter derivatives.

Four families are supported, all parameterised by a branching ratio ``eta``
and a scale ``beta`` (time units); the three two-parameter families also carry
a shape ``alpha``:

=================  =====================================================
exponential        gt(t) = exp(-t/beta) / beta
generalised Pareto gt(t) = (1 + alpha t / beta)^-(1/alpha + 1) / beta
gamma              gt(t) = t^(alpha-1) exp(-t/beta) / (Gamma(alpha) beta^alpha)
Weibull            gt(t) = (alpha/beta) (t/beta)^(alpha-1) exp(-(t/beta)^alpha)
=================  =====================================================

Derivatives are taken through the log-density ``l = log gt`` so that every
first and second derivative is ``gt`` times a closed-form factor; this keeps
the numba inner loops short and makes underflowed terms exactly zero.
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass

import numba
import numpy as np
from scipy import integrate, special

from .errors import DomainError, InvalidParameterError, NumericFailure

EXP, GPD, GAMMA, WEIBULL = 0, 1, 2, 3

# |z| below which the generalised Pareto alpha-derivatives switch to series
_GPD_SERIES_Z = 0.05
_GPD_SERIES_TERMS = 14


class KernelFamily(enum.Enum):
    EXPONENTIAL = EXP
    GENERALIZED_PARETO = GPD
    GAMMA = GAMMA
    WEIBULL = WEIBULL

    @property
    def has_shape(self) -> bool:
        return self is not KernelFamily.EXPONENTIAL

    @property
    def param_names(self) -> tuple[str, ...]:
        return ("eta", "alpha", "beta") if self.has_shape else ("eta", "beta")

    @property
    def short_name(self) -> str:
        return _SHORT[self]


_SHORT = {
    KernelFamily.EXPONENTIAL: "exp",
    KernelFamily.GENERALIZED_PARETO: "gpd",
    KernelFamily.GAMMA: "gamma",
    KernelFamily.WEIBULL: "weibull",
}
_BY_NAME = {v: k for k, v in _SHORT.items()}
_BY_NAME.update({"exponential": KernelFamily.EXPONENTIAL, "pareto": KernelFamily.GENERALIZED_PARETO,
                 "gp": KernelFamily.GENERALIZED_PARETO})


@dataclass(frozen=True)
class KernelParams:
    """Natural kernel parameters. ``alpha`` is ignored for the exponential family."""

    eta: float
    beta: float
    alpha: float = 1.0

    def as_vector(self, family: KernelFamily) -> np.ndarray:
        if family.has_shape:
            return np.array([self.eta, self.alpha, self.beta])
        return np.array([self.eta, self.beta])

    @classmethod
    def from_vector(cls, family: KernelFamily, vec) -> "KernelParams":
        vec = [float(v) for v in vec]
        if family.has_shape:
            return cls(eta=vec[0], alpha=vec[1], beta=vec[2])
        return cls(eta=vec[0], beta=vec[1])


def check_params(family: KernelFamily, params: KernelParams, subcritical: bool = True) -> None:
    """Hard constraints: positive shape and scale, ``0 <= eta < 1``.

    Plain kernel evaluation passes ``subcritical=False`` and accepts ``eta = 1``
    (the normalised density itself); models always require ``eta < 1``.
    """
    eta_ok = (0.0 <= params.eta < 1.0) if subcritical else (0.0 <= params.eta <= 1.0)
    if not (eta_ok and math.isfinite(params.eta)):
        raise InvalidParameterError(f"branching ratio must lie in [0, 1), got eta={params.eta}")
    if not (params.beta > 0.0 and math.isfinite(params.beta)):
        raise InvalidParameterError(f"scale must be positive, got beta={params.beta}")
    if family.has_shape and not (params.alpha > 0.0 and math.isfinite(params.alpha)):
        raise InvalidParameterError(f"shape must be positive, got alpha={params.alpha}")


def kernel_constants(family: KernelFamily, params: KernelParams) -> np.ndarray:
    """Parameter array consumed by the numba routines.

    Layout: ``[eta, alpha, beta, log Gamma(alpha), digamma(alpha), trigamma(alpha),
    log normaliser, log(beta) + digamma(alpha)]``; entries 3-5 and 7 are only
    meaningful for the gamma family. The log normaliser is the additive
    constant of ``log gt`` (``-log beta``, ``-lgamma(a) - a log beta`` or
    ``log(a / beta)``).
    """
    a = params.alpha if family.has_shape else 1.0
    b = params.beta
    c = np.zeros(8)
    c[0], c[1], c[2] = params.eta, a, b
    c[6] = -math.log(b)
    if family is KernelFamily.GAMMA:
        c[3] = special.gammaln(a)
        c[4] = special.digamma(a)
        c[5] = special.polygamma(1, a)
        c[6] = -c[3] - a * math.log(b)
        c[7] = math.log(b) + c[4]
    elif family is KernelFamily.WEIBULL:
        c[6] = math.log(a / b)
    return c


# ---------------------------------------------------------------------------
# numba scalar core

@numba.njit(cache=True, nogil=True)
def _gpd_h(z):
    # log1p(z) - z/(1+z)
    if abs(z) < _GPD_SERIES_Z:
        s = 0.0
        zk = z
        for k in range(2, _GPD_SERIES_TERMS + 2):
            zk = zk * z
            term = (k - 1) * zk / k
            s += term if k % 2 == 0 else -term
        return s
    return math.log1p(z) - z / (1.0 + z)


@numba.njit(cache=True, nogil=True)
def _gpd_k(z):
    # z^2/(1+z)^2 - 2 h(z)
    if abs(z) < _GPD_SERIES_Z:
        s = 0.0
        zk = z * z
        for k in range(3, _GPD_SERIES_TERMS + 3):
            zk = zk * z
            term = (k - 1) * (k - 2) * zk / k
            s += term if k % 2 == 0 else -term
        return s
    return z * z / ((1.0 + z) * (1.0 + z)) - 2.0 * _gpd_h(z)


@numba.njit(cache=True, nogil=True, inline="always")
def gt_logderivs1(code, c, t):
    """``(gt, l_a, l_b)`` at elapsed time ``t > 0``; ``l`` is the log normalised density."""
    a = c[1]
    b = c[2]
    if code == EXP:
        return math.exp(-t / b) / b, 0.0, -1.0 / b + t / (b * b)
    if code == GPD:
        z = a * t / b
        g = math.exp(-(1.0 / a + 1.0) * math.log1p(z)) / b
        return g, _gpd_h(z) / (a * a) - t / (b + a * t), (t - b) / (b * (b + a * t))
    if code == GAMMA:
        lt = math.log(t)
        g = math.exp(c[6] + (a - 1.0) * lt - t / b)
        return g, lt - c[7], -a / b + t / (b * b)
    r = math.log(t / b)
    w = math.exp(a * r)
    g = math.exp(c[6] + (a - 1.0) * r - w)
    return g, 1.0 / a + r * (1.0 - w), a * (w - 1.0) / b


@numba.njit(cache=True, nogil=True, inline="always")
def gt_logderivs2(code, c, t):
    """``(gt, l_a, l_b, l_aa, l_bb, l_ab)`` at elapsed time ``t > 0``.

    Derivative entries are meaningless when ``gt`` is zero or infinite.
    """
    a = c[1]
    b = c[2]
    if code == EXP:
        return (math.exp(-t / b) / b, 0.0, -1.0 / b + t / (b * b),
                0.0, 1.0 / (b * b) - 2.0 * t / (b * b * b), 0.0)
    if code == GPD:
        z = a * t / b
        bz = b + a * t
        g = math.exp(-(1.0 / a + 1.0) * math.log1p(z)) / b
        return (g, _gpd_h(z) / (a * a) - t / bz, (t - b) / (b * bz),
                _gpd_k(z) / (a * a * a) + z * z / ((1.0 + z) * (1.0 + z) * a * a),
                1.0 / (b * b) - (1.0 + a) * t * (2.0 * b + a * t) / (b * b * bz * bz),
                t * (b - t) / (b * bz * bz))
    if code == GAMMA:
        lt = math.log(t)
        g = math.exp(c[6] + (a - 1.0) * lt - t / b)
        return (g, lt - c[7], -a / b + t / (b * b),
                -c[5], a / (b * b) - 2.0 * t / (b * b * b), -1.0 / b)
    r = math.log(t / b)
    w = math.exp(a * r)
    g = math.exp(c[6] + (a - 1.0) * r - w)
    return (g, 1.0 / a + r * (1.0 - w), a * (w - 1.0) / b,
            -1.0 / (a * a) - w * r * r, a / (b * b) - a * (a + 1.0) * w / (b * b),
            (w - 1.0 + a * w * r) / b)


@numba.njit(cache=True, nogil=True)
def gt_logderivs(code, c, t, out):
    """Array-filling form of :func:`gt_logderivs2`."""
    v = gt_logderivs2(code, c, t)
    for k in range(6):
        out[k] = v[k]


@numba.njit(cache=True, nogil=True)
def gt_value(code, c, t):
    """Normalised density at ``t >= 0`` (``inf`` at the origin when singular)."""
    a = c[1]
    b = c[2]
    if code == EXP:
        return math.exp(-t / b) / b
    if code == GPD:
        return math.exp(-(1.0 / a + 1.0) * math.log1p(a * t / b)) / b
    if t == 0.0:
        if a < 1.0:
            return math.inf
        if a > 1.0:
            return 0.0
        return 1.0 / b
    if code == GAMMA:
        return math.exp(c[6] + (a - 1.0) * math.log(t) - t / b)
    r = math.log(t / b)
    return math.exp(c[6] + (a - 1.0) * r - math.exp(a * r))


@numba.njit(cache=True, nogil=True)
def gt_mode(code, c):
    """Location of the maximum of ``gt`` (zero for monotone kernels)."""
    a = c[1]
    b = c[2]
    if code == GAMMA and a > 1.0:
        return b * (a - 1.0)
    if code == WEIBULL and a > 1.0:
        return b * ((a - 1.0) / a) ** (1.0 / a)
    return 0.0


@numba.njit(cache=True, nogil=True)
def gt_sup_after(code, c, s, mode):
    """``sup_{u >= s} gt(u)`` given the precomputed mode."""
    return gt_value(code, c, s if s > mode else mode)


# ---------------------------------------------------------------------------
# public scalar API

def _family(family) -> KernelFamily:
    if isinstance(family, KernelFamily):
        return family
    if isinstance(family, str):
        try:
            return _BY_NAME[family.lower()]
        except KeyError:
            raise InvalidParameterError(f"unknown kernel family {family!r}") from None
    return KernelFamily(family)


@dataclass(frozen=True)
class KernelDerivs:
    """Kernel value with gradient and Hessian over ``(eta, alpha, beta)``.

    For the exponential family the coordinates are ``(eta, beta)``.
    ``singular`` marks an unbounded density at the origin.
    """

    value: float
    grad: np.ndarray | None = None
    hess: np.ndarray | None = None
    singular: bool = False


def density_derivs(family, params: KernelParams, t: float, order: int = 0) -> KernelDerivs:
    family = _family(family)
    check_params(family, params, subcritical=False)
    if t < 0:
        raise DomainError(f"kernel evaluated at negative time {t}")
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    c = kernel_constants(family, params)
    code = family.value
    eta = params.eta
    d = 3 if family.has_shape else 2
    if t == 0.0 and family in (KernelFamily.GAMMA, KernelFamily.WEIBULL) and params.alpha <= 1.0:
        g0 = gt_value(code, c, 0.0)
        if math.isinf(g0):
            grad = np.full(d, np.nan) if order >= 1 else None
            hess = np.full((d, d), np.nan) if order >= 2 else None
            return KernelDerivs(math.inf, grad, hess, singular=True)
    out = np.zeros(6)
    if t == 0.0 and not (family in (KernelFamily.EXPONENTIAL, KernelFamily.GENERALIZED_PARETO)):
        # alpha > 1 (or the alpha == 1 value): derivative factors blow up at 0 but gt -> 0 faster
        gt = gt_value(code, c, 0.0)
        if gt == 0.0:
            out[:] = 0.0
        else:
            gt_logderivs(code, c, 1e-300, out)
            out[0] = gt
    else:
        gt_logderivs(code, c, t, out)
    return _assemble(family, eta, out, order)


def _assemble(family: KernelFamily, eta: float, out: np.ndarray, order: int) -> KernelDerivs:
    gt, la, lb, laa, lbb, lab = out
    value = eta * gt
    if order == 0:
        return KernelDerivs(value)
    if gt == 0.0:
        da = db = daa = dbb = dab = 0.0
    else:
        da, db = gt * la, gt * lb
        daa, dbb, dab = gt * (laa + la * la), gt * (lbb + lb * lb), gt * (lab + la * lb)
    if family.has_shape:
        grad = np.array([gt, eta * da, eta * db])
    else:
        grad = np.array([gt, eta * db])
    if order == 1:
        return KernelDerivs(value, grad)
    if family.has_shape:
        hess = np.array([[0.0, da, db],
                         [da, eta * daa, eta * dab],
                         [db, eta * dab, eta * dbb]])
    else:
        hess = np.array([[0.0, db], [db, eta * dbb]])
    return KernelDerivs(value, grad, hess)


def density(family, params: KernelParams, t) -> np.ndarray:
    """Vectorised ``g(t)``; accepts scalars or arrays of nonnegative times."""
    family = _family(family)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("kernel evaluated at negative time")
    c = kernel_constants(family, params)
    return params.eta * _gt_array(family.value, c, t.ravel()).reshape(t.shape)


@numba.njit(cache=True, nogil=True)
def _gt_array(code, c, t):
    res = np.empty(t.shape[0])
    for i in range(t.shape[0]):
        res[i] = gt_value(code, c, t[i])
    return res


def survival_tilde(family, params: KernelParams, t) -> np.ndarray:
    """Upper-tail mass ``1 - Gt(t)`` of the normalised kernel (vectorised)."""
    family = _family(family)
    t = np.asarray(t, dtype=float)
    a, b = params.alpha, params.beta
    if family is KernelFamily.EXPONENTIAL:
        return np.exp(-t / b)
    if family is KernelFamily.GENERALIZED_PARETO:
        return np.exp(-np.log1p(a * t / b) / a)
    if family is KernelFamily.GAMMA:
        return special.gammaincc(a, t / b)
    with np.errstate(over="ignore"):          # (t/b)**a -> inf is the correct limit
        return np.exp(-((t / b) ** a))


def cdf_tilde(family, params: KernelParams, t) -> np.ndarray:
    family = _family(family)
    t = np.asarray(t, dtype=float)
    a, b = params.alpha, params.beta
    if family is KernelFamily.EXPONENTIAL:
        return -np.expm1(-t / b)
    if family is KernelFamily.GENERALIZED_PARETO:
        return -np.expm1(-np.log1p(a * t / b) / a)
    if family is KernelFamily.GAMMA:
        return special.gammainc(a, t / b)
    with np.errstate(over="ignore"):          # (t/b)**a -> inf is the correct limit
        return -np.expm1(-((t / b) ** a))


def cdf(family, params: KernelParams, t):
    """``G(t) = eta * Gt(t)``, the kernel mass on ``[0, t]``."""
    family = _family(family)
    check_params(family, params, subcritical=False)
    ta = np.asarray(t, dtype=float)
    if np.any(ta < 0):
        raise DomainError("kernel CDF evaluated at negative time")
    res = params.eta * cdf_tilde(family, params, ta)
    return float(res) if np.ndim(t) == 0 else res


def kernel_mean(family, params: KernelParams) -> float:
    """Mean of the normalised kernel (``inf`` for generalised Pareto with ``alpha >= 1``)."""
    family = _family(family)
    a, b = params.alpha, params.beta
    if family is KernelFamily.EXPONENTIAL:
        return b
    if family is KernelFamily.GENERALIZED_PARETO:
        return b / (1.0 - a) if a < 1.0 else math.inf
    if family is KernelFamily.GAMMA:
        return a * b
    return b * math.gamma(1.0 + 1.0 / a)


def tail_quantile(family, params: KernelParams, tail: float) -> float:
    """Smallest ``t`` with ``1 - Gt(t) <= tail``."""
    family = _family(family)
    a, b = params.alpha, params.beta
    if family is KernelFamily.EXPONENTIAL:
        return -b * math.log(tail)
    if family is KernelFamily.GENERALIZED_PARETO:
        return b / a * math.expm1(-a * math.log(tail))
    if family is KernelFamily.GAMMA:
        return b * float(special.gammainccinv(a, tail))
    return b * (-math.log(tail)) ** (1.0 / a)


def mode(family, params: KernelParams) -> float:
    family = _family(family)
    return float(gt_mode(family.value, kernel_constants(family, params)))


def sup_after(family, params: KernelParams, s: float) -> float:
    """Exact ``sup_{u >= s} g(u)``; used as the thinning envelope term."""
    family = _family(family)
    check_params(family, params, subcritical=False)
    if s < 0:
        raise DomainError(f"negative elapsed time {s}")
    c = kernel_constants(family, params)
    return params.eta * float(gt_sup_after(family.value, c, float(s), gt_mode(family.value, c)))


# ---------------------------------------------------------------------------
# CDF derivatives

# sqrt(tail * trigamma) below this: the gamma alpha-derivatives of the CDF are zero to tolerance
_GAMMA_TAIL_NEGLIGIBLE = 1e-13
_QUAD_EPSABS = 1e-10


def _gamma_alpha_integrals(a: float, x: float, psi: float, psi1: float, lgam: float,
                           second: bool) -> tuple[float, float]:
    """``int_0^x (log u - psi) p(u) du`` and the second-order analogue for the unit-scale gamma density.

    The lower piece uses ``v = u^a`` which leaves only a log singularity at 0.
    Above the mean the complementary tail integral is used (both integrate to 0 over (0, inf)).
    """
    if x <= 0.0:
        return 0.0, 0.0
    tail = float(special.gammaincc(a, x))
    if math.sqrt(tail * max(psi1, 1.0)) * (1.0 + abs(psi) + math.log1p(x)) < _GAMMA_TAIL_NEGLIGIBLE:
        return 0.0, 0.0
    f1 = lambda u: (math.log(u) - psi) * math.exp((a - 1.0) * math.log(u) - u - lgam)
    f2 = lambda u: ((math.log(u) - psi) ** 2 - psi1) * math.exp((a - 1.0) * math.log(u) - u - lgam)

    def lower(f_log):
        def g(v):
            if v <= 0.0:
                return 0.0
            lv = math.log(v)
            return f_log(lv / a) * math.exp(-math.exp(lv / a) - lgam) / a
        return g

    def run(fun, lo, hi):
        val, err = integrate.quad(fun, lo, hi, epsabs=_QUAD_EPSABS, epsrel=1e-10, limit=200)
        if not (err <= 10 * _QUAD_EPSABS or err <= 1e-8 * abs(val)):
            raise NumericFailure(f"gamma CDF shape-derivative quadrature did not converge (err={err:.3g})",
                                 achieved=err)
        return val

    if x <= a and a < 2.0:
        i1 = run(lower(lambda lu: lu - psi), 0.0, x ** a)
        i2 = run(lower(lambda lu: (lu - psi) ** 2 - psi1), 0.0, x ** a) if second else 0.0
    elif x <= a:
        # integrand continuous and zero at the origin: no substitution needed (and x**a may overflow)
        g1 = lambda u: f1(u) if u > 0.0 else 0.0
        g2 = lambda u: f2(u) if u > 0.0 else 0.0
        i1 = run(g1, 0.0, x)
        i2 = run(g2, 0.0, x) if second else 0.0
    else:
        i1 = -run(f1, x, math.inf)
        i2 = -run(f2, x, math.inf) if second else 0.0
    return i1, i2


def cdf_tilde_derivs(family, params: KernelParams, t: np.ndarray, order: int = 1):
    """Derivatives of ``Gt(t)`` in (alpha, beta) for an array of times.

    Returns ``(Gt, d_a, d_b, d_aa, d_bb, d_ab)`` arrays (second-order entries
    are ``None`` when ``order == 1``).  Shape derivatives are zero for the
    exponential family.
    """
    family = _family(family)
    t = np.asarray(t, dtype=float)
    a, b = params.alpha, params.beta
    G = cdf_tilde(family, params, t)
    zeros = np.zeros_like(t)
    if family is KernelFamily.GAMMA:
        c = kernel_constants(family, params)
        gt = np.where(t > 0, _gt_array(GAMMA, c, np.where(t > 0, t, 1.0)), 0.0)
        lt = np.log(np.where(t > 0, t, 1.0))
        la = lt - math.log(b) - c[4]
        lb = -a / b + t / (b * b)
        d_b = -(t / b) * gt
        d_a = np.zeros_like(t)
        d_aa = np.zeros_like(t) if order >= 2 else None
        x = t / b
        bound = np.sqrt(special.gammaincc(a, x) * max(c[5], 1.0)) * (1.0 + abs(c[4]) + np.log1p(x))
        for i in np.nonzero((x > 0) & (bound >= _GAMMA_TAIL_NEGLIGIBLE))[0]:
            i1, i2 = _gamma_alpha_integrals(a, x[i], c[4], c[5], c[3], order >= 2)
            d_a[i] = i1
            if order >= 2:
                d_aa[i] = i2
        if order < 2:
            return G, d_a, d_b, None, None, None
        d_bb = (t / (b * b)) * gt - (t / b) * gt * lb
        d_ab = -(t / b) * gt * la
        return G, d_a, d_b, d_aa, d_bb, d_ab
    # survival S = 1 - Gt with closed-form log-derivatives
    S = survival_tilde(family, params, t)
    if family is KernelFamily.EXPONENTIAL:
        sa, sb = zeros, t / (b * b)
        saa, sbb, sab = zeros, -2.0 * t / b ** 3, zeros
    elif family is KernelFamily.GENERALIZED_PARETO:
        z = a * t / b
        bz = b + a * t
        sa = np.array([_gpd_h(zi) for zi in z]).reshape(t.shape) / (a * a)
        sb = t / (b * bz)
        saa = np.array([_gpd_k(zi) for zi in z]).reshape(t.shape) / a ** 3
        sbb = -t * (2 * b + a * t) / (b * bz) ** 2
        sab = -t * t / (b * bz * bz)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(t > 0, np.log(np.where(t > 0, t, 1.0) / b), 0.0)
        # far in the tail w overflows while S underflows to 0; there every derivative is 0
        w = np.where(S > 0, t / b, 0.0) ** a
        sa, sb = -w * r, a * w / b
        saa, sbb, sab = -w * r * r, -a * (a + 1) * w / (b * b), w / b + a * w * r / b
    d_a, d_b = -S * sa, -S * sb
    if order < 2:
        return G, d_a, d_b, None, None, None
    return G, d_a, d_b, -S * (saa + sa * sa), -S * (sbb + sb * sb), -S * (sab + sa * sb)


def cdf_grad(family, params: KernelParams, t: float) -> np.ndarray:
    """Gradient of ``G(t)`` over ``(eta, alpha, beta)`` (``(eta, beta)`` for exponential)."""
    family = _family(family)
    check_params(family, params, subcritical=False)
    if t < 0:
        raise DomainError("kernel CDF evaluated at negative time")
    G, da, db, *_ = cdf_tilde_derivs(family, params, np.array([float(t)]), order=1)
    eta = params.eta
    if family.has_shape:
        return np.array([G[0], eta * da[0], eta * db[0]])
    return np.array([G[0], eta * db[0]])


def cdf_hess(family, params: KernelParams, t: float) -> np.ndarray:
    """Hessian of ``G(t)`` over the kernel coordinates."""
    family = _family(family)
    check_params(family, params, subcritical=False)
    G, da, db, daa, dbb, dab = cdf_tilde_derivs(family, params, np.array([float(t)]), order=2)
    eta = params.eta
    if family.has_shape:
        return np.array([[0.0, da[0], db[0]],
                         [da[0], eta * daa[0], eta * dab[0]],
                         [db[0], eta * dab[0], eta * dbb[0]]])
    return np.array([[0.0, db[0]], [db[0], eta * dbb[0]]])


# ---------------------------------------------------------------------------
# regularity conditions

@dataclass(frozen=True)
class Condition:
    name: str
    satisfied: bool
    detail: str


def validate_kernel(family, params: KernelParams, p_order: int = 2) -> list[Condition]:
    """Report the branching-ratio range and the integrability conditions of order ``p``.

    Violations of the integrability conditions are warnings: the likelihood and
    its maximiser remain computable.
    """
    family = _family(family)
    if p_order < 1:
        raise ValueError("p_order must be >= 1")
    a = params.alpha
    report = [Condition("C1-eta", 0.0 < params.eta < 1.0, f"0 < eta={params.eta} < 1")]
    if family is KernelFamily.EXPONENTIAL:
        report.append(Condition(f"C3({p_order})", True, "exponential kernel: all moments finite"))
        report.append(Condition(f"C4({p_order})", True, "exponential kernel: all moments finite"))
    elif family is KernelFamily.GENERALIZED_PARETO:
        report.append(Condition(f"C3({p_order})", a < 0.5, f"requires alpha < 1/2, alpha={a}"))
        report.append(Condition(f"C4({p_order})", a < 1.0 / 3.0, f"requires alpha < 1/3, alpha={a}"))
    else:
        bound = 1.0 - 1.0 / p_order
        note = (f"requires alpha > 1 - 1/p = {bound:.6g}, alpha={a} "
                f"(the weaker alpha > 1/p = {1.0 / p_order:.6g} is also quoted for this family; "
                f"the stricter bound is enforced)")
        report.append(Condition(f"C3({p_order})", a > bound, note))
        report.append(Condition(f"C4({p_order})", a > bound, note))
    return report


# ---------------------------------------------------------------------------
# text form

_SPEC_RE = re.compile(r"^\s*([A-Za-z_]+)\s*\((.*)\)\s*$")


@dataclass(frozen=True)
class Kernel:
    family: KernelFamily
    params: KernelParams

    def __str__(self) -> str:
        p = self.params
        if self.family.has_shape:
            return f"{self.family.short_name}({p.eta!r}, {p.alpha!r}, {p.beta!r})"
        return f"{self.family.short_name}({p.eta!r}, {p.beta!r})"


def parse_kernel(text: str) -> Kernel:
    """Parse ``family(eta, alpha, beta)`` / ``exp(eta, beta)``, e.g. ``gpd(0.5, 0.25, 0.75)``."""
    m = _SPEC_RE.match(text)
    if not m:
        raise InvalidParameterError(f"cannot parse kernel spec {text!r}")
    family = _family(m.group(1))
    try:
        vals = [float(v) for v in m.group(2).split(",") if v.strip()]
    except ValueError:
        raise InvalidParameterError(f"non-numeric kernel parameter in {text!r}") from None
    want = 3 if family.has_shape else 2
    if len(vals) != want:
        raise InvalidParameterError(f"{family.short_name} takes {want} parameters, got {len(vals)}")
    params = KernelParams.from_vector(family, vals)
    check_params(family, params, subcritical=False)
    return Kernel(family, params)

