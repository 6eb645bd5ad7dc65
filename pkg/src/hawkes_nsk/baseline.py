"""Baseline intensities ``nu(x; theta_nu)`` on the unit window ``x in [0, 1]``."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidSpecError

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_legendre(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on ``[0, 1]``."""
    if m not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(m)
        _GL_CACHE[m] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL_CACHE[m]


def _check_x(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any((x < 0.0) | (x > 1.0)) or np.any(~np.isfinite(x)):
        raise DomainError("baseline evaluated outside [0, 1]")
    return x


class BaselineSpec:
    """Common interface; see :class:`BSplineBaseline`, :class:`QuadraticExpBaseline`, :class:`ConstantBaseline`."""

    linear: bool = False

    @property
    def params(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def n_params(self) -> int:
        return len(self.params)

    @property
    def param_names(self) -> list[str]:
        return [f"theta_nu{i + 1}" for i in range(self.n_params)]

    @property
    def positive_mask(self) -> np.ndarray:
        """Coordinates constrained to be positive (log-transformed when fitting)."""
        raise NotImplementedError

    def with_params(self, theta) -> "BaselineSpec":
        raise NotImplementedError

    def derivs(self, x: np.ndarray, order: int = 0):
        raise NotImplementedError

    def integral_derivs(self, x0: float, x1: float):
        raise NotImplementedError

    def bounds(self) -> tuple[float, float]:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# B-splines

def clamped_knots(degree: int, interior) -> np.ndarray:
    interior = np.asarray(interior, dtype=float)
    return np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])


def bspline_basis(x, degree: int, knots: np.ndarray) -> np.ndarray:
    """Evaluate all B-spline basis functions at ``x`` (Cox-de Boor recursion).

    ``knots`` is the full clamped knot vector. Returns an array of shape
    ``(len(x), len(knots) - degree - 1)``. The right end of the domain belongs
    to the last nonempty span so that the basis sums to one on the closed interval.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    nb = len(knots) - degree - 1
    # last nonempty span index
    last = np.nonzero(knots[:-1] < knots[1:])[0][-1]
    span = np.clip(np.searchsorted(knots, x, side="right") - 1, degree, last)
    out = np.zeros((len(x), nb))
    N = np.zeros((len(x), degree + 1))
    N[:, 0] = 1.0
    left = np.zeros((len(x), degree + 1))
    right = np.zeros((len(x), degree + 1))
    for j in range(1, degree + 1):
        left[:, j] = x - knots[span + 1 - j]
        right[:, j] = knots[span + j] - x
        saved = np.zeros(len(x))
        for r in range(j):
            temp = N[:, r] / (right[:, r + 1] + left[:, j - r])
            N[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        N[:, j] = saved
    rows = np.arange(len(x))
    for r in range(degree + 1):
        out[rows, span - degree + r] = N[:, r]
    return out


@dataclass(frozen=True)
class BSplineBaseline(BaselineSpec):
    """``nu(x) = sum_i coef_i B_i(x)`` on a clamped knot vector over ``[0, 1]``.

    With no interior knots this is the Bernstein basis of the given degree.
    Only the coefficients are parameters; knots are fixed.
    """

    degree: int
    interior_knots: tuple[float, ...]
    coefficients: tuple[float, ...]
    linear = True

    def __post_init__(self):
        object.__setattr__(self, "interior_knots", tuple(float(k) for k in self.interior_knots))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if self.degree < 1:
            raise InvalidSpecError("spline degree must be >= 1")
        k = np.asarray(self.interior_knots)
        if np.any((k <= 0.0) | (k >= 1.0)) or np.any(np.diff(k) < 0):
            raise InvalidSpecError("interior knots must be sorted and lie in (0, 1)")
        need = self.degree + 1 + len(self.interior_knots)
        if len(self.coefficients) != need:
            raise InvalidSpecError(f"spline needs {need} coefficients, got {len(self.coefficients)}")

    @property
    def knots(self) -> np.ndarray:
        return clamped_knots(self.degree, self.interior_knots)

    @property
    def params(self) -> np.ndarray:
        return np.array(self.coefficients)

    @property
    def positive_mask(self) -> np.ndarray:
        return np.ones(self.n_params, dtype=bool)

    def with_params(self, theta) -> "BSplineBaseline":
        return BSplineBaseline(self.degree, self.interior_knots, tuple(np.asarray(theta, dtype=float)))

    def basis(self, x) -> np.ndarray:
        return bspline_basis(x, self.degree, self.knots)

    def derivs(self, x, order=0):
        B = self.basis(x)
        value = B @ self.params
        d = self.n_params
        return value, B, (np.zeros((len(value), d, d)) if order >= 2 else None)

    def basis_integrals(self, x0: float, x1: float) -> np.ndarray:
        """Exact ``int_{x0}^{x1} B_i`` via per-span Gauss-Legendre of sufficient order."""
        d = self.n_params
        if x1 <= x0:
            return np.zeros(d)
        breaks = np.unique(np.concatenate([[x0, x1], [k for k in self.interior_knots if x0 < k < x1]]))
        nodes, weights = gauss_legendre(self.degree // 2 + 2)
        total = np.zeros(d)
        for lo, hi in zip(breaks[:-1], breaks[1:]):
            xs = lo + (hi - lo) * nodes
            total += (hi - lo) * (weights @ self.basis(xs))
        return total

    def integral_derivs(self, x0, x1):
        g = self.basis_integrals(x0, x1)
        return float(g @ self.params), g, np.zeros((len(g), len(g)))

    def bounds(self):
        c = self.params
        if c.min() <= 0:
            raise InvalidSpecError("spline coefficients must be positive")
        return float(c.min()), float(c.max())

    def refine(self, knot: float) -> "BSplineBaseline":
        """Insert a knot (Boehm's algorithm); the represented function is unchanged."""
        p = self.degree
        t = self.knots
        c = self.params
        k = int(np.searchsorted(t, knot, side="right") - 1)
        new = np.empty(len(c) + 1)
        for i in range(len(new)):
            if i <= k - p:
                new[i] = c[i]
            elif i >= k + 1:
                new[i] = c[i - 1]
            else:
                a = (knot - t[i]) / (t[i + p] - t[i])
                new[i] = (1 - a) * c[i - 1] + a * c[i]
        interior = tuple(sorted(self.interior_knots + (float(knot),)))
        return BSplineBaseline(p, interior, tuple(new))

    def __str__(self):
        knots = ",".join(repr(k) for k in self.interior_knots)
        coef = ",".join(repr(c) for c in self.coefficients)
        return f"bspline(degree={self.degree},knots=[{knots}],coef=[{coef}])"


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticExpBaseline(BaselineSpec):
    """``nu(x) = e^t1 + (e^t2 + e^t3)^2 (x - e^t2 / (e^t2 + e^t3))^2``.

    Written as ``e^t1 + u^2`` with ``u = (e^t2 + e^t3) x - e^t2``, which is
    positive by construction and has all coordinates unconstrained.
    """

    theta1: float
    theta2: float
    theta3: float

    @property
    def params(self):
        return np.array([self.theta1, self.theta2, self.theta3])

    @property
    def positive_mask(self):
        return np.zeros(3, dtype=bool)

    def with_params(self, theta):
        return QuadraticExpBaseline(*(float(v) for v in theta))

    def derivs(self, x, order=0):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        e1, a, b = math.exp(self.theta1), math.exp(self.theta2), math.exp(self.theta3)
        u = (a + b) * x - a
        u2, u3 = a * (x - 1.0), b * x
        value = e1 + u * u
        grad = np.column_stack([np.full_like(x, e1), 2 * u * u2, 2 * u * u3])
        if order < 2:
            return value, grad, None
        hess = np.zeros((len(x), 3, 3))
        hess[:, 0, 0] = e1
        hess[:, 1, 1] = 2 * u2 * u2 + 2 * u * u2
        hess[:, 2, 2] = 2 * u3 * u3 + 2 * u * u3
        hess[:, 1, 2] = hess[:, 2, 1] = 2 * u2 * u3
        return value, grad, hess

    def integral_derivs(self, x0, x1):
        if x1 <= x0:
            return 0.0, np.zeros(3), np.zeros((3, 3))
        nodes, weights = gauss_legendre(20)
        xs = x0 + (x1 - x0) * nodes
        v, g, h = self.derivs(xs, order=2)
        w = (x1 - x0) * weights
        return float(w @ v), w @ g, np.einsum("i,ijk->jk", w, h)

    def bounds(self):
        e1, a, b = math.exp(self.theta1), math.exp(self.theta2), math.exp(self.theta3)
        # u is linear in x, from -a at x=0 to b at x=1, with a root inside
        return e1, e1 + max(a, b) ** 2

    def __str__(self):
        return f"quadexp({self.theta1!r},{self.theta2!r},{self.theta3!r})"


@dataclass(frozen=True)
class ConstantBaseline(BaselineSpec):
    nu: float
    linear = True

    def __post_init__(self):
        if not self.nu > 0:
            raise InvalidSpecError(f"constant baseline must be positive, got {self.nu}")

    @property
    def params(self):
        return np.array([self.nu])

    @property
    def param_names(self):
        return ["nu"]

    @property
    def positive_mask(self):
        return np.ones(1, dtype=bool)

    def with_params(self, theta):
        return ConstantBaseline(float(np.asarray(theta).ravel()[0]))

    def derivs(self, x, order=0):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return (np.full(len(x), self.nu), np.ones((len(x), 1)),
                np.zeros((len(x), 1, 1)) if order >= 2 else None)

    def integral_derivs(self, x0, x1):
        w = max(x1 - x0, 0.0)
        return self.nu * w, np.array([w]), np.zeros((1, 1))

    def bounds(self):
        return self.nu, self.nu

    def __str__(self):
        return f"const({self.nu!r})"


# ---------------------------------------------------------------------------
# functional API

def baseline_derivs(spec: BaselineSpec, x, order: int = 0):
    """Value, gradient and Hessian over ``theta_nu`` at ``x``.

    Scalar ``x`` gives a scalar value, a ``(d,)`` gradient and a ``(d, d)``
    Hessian; array ``x`` stacks along a leading axis.
    """
    scalar = np.ndim(x) == 0
    xa = _check_x(x)
    v, g, h = spec.derivs(np.atleast_1d(xa), order=max(order, 1) if order else 0)
    if order == 0:
        return float(v[0]) if scalar else v
    if scalar:
        return float(v[0]), g[0], (h[0] if h is not None else None)
    return v, g, h


def baseline_integral_derivs(spec: BaselineSpec, x0: float, x1: float):
    """``int_{x0}^{x1} nu(x) dx`` with its gradient and Hessian over ``theta_nu``."""
    if x0 > x1:
        raise DomainError(f"empty integration range [{x0}, {x1}]")
    _check_x([x0, x1])
    return spec.integral_derivs(float(x0), float(x1))


def baseline_bounds(spec: BaselineSpec) -> tuple[float, float]:
    lo, hi = spec.bounds()
    if not lo > 0:
        raise InvalidSpecError(f"baseline lower bound must be positive, got {lo}")
    return lo, hi


REFERENCE_BASELINE = BSplineBaseline(2, (), (5.0, 1.25, 2.5))


# ---------------------------------------------------------------------------
# text form

_CALL = re.compile(r"^\s*([A-Za-z_]+)\s*\((.*)\)\s*$", re.S)


def _floats(text: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidSpecError(f"non-numeric value in {text!r}") from None


def parse_baseline(text: str) -> BaselineSpec:
    """Parse ``bspline(degree=2, knots=[], coef=[5,1.25,2.5])``, ``quadexp(a,b,c)`` or ``const(nu)``."""
    m = _CALL.match(text)
    if not m:
        raise InvalidSpecError(f"cannot parse baseline spec {text!r}")
    name, body = m.group(1).lower(), m.group(2)
    if name in ("bspline", "spline", "bernstein"):
        deg = re.search(r"degree\s*=\s*(\d+)", body)
        knots = re.search(r"knots\s*=\s*\[([^\]]*)\]", body)
        coef = re.search(r"coef\s*=\s*\[([^\]]*)\]", body)
        if not coef:
            raise InvalidSpecError("bspline spec needs coef=[...]")
        coefs = _floats(coef.group(1))
        interior = _floats(knots.group(1)) if knots else []
        degree = int(deg.group(1)) if deg else len(coefs) - 1 - len(interior)
        return BSplineBaseline(degree, tuple(interior), tuple(coefs))
    vals = _floats(body)
    if name == "quadexp":
        if len(vals) != 3:
            raise InvalidSpecError("quadexp takes 3 parameters")
        return QuadraticExpBaseline(*vals)
    if name in ("const", "constant"):
        if len(vals) != 1:
            raise InvalidSpecError("const takes 1 parameter")
        return ConstantBaseline(vals[0])
    raise InvalidSpecError(f"unknown baseline family {name!r}")
