"""Time averages of intensity functionals and their stationary (ergodic) limits.

For a path observed at scale ``n`` the time average is

    (1/n) int_0^n psi(Y_s) ds,     Y_s = (lambda_theta(s), d_theta lambda_theta(s), lambda_star(s)).

Its limit is ``pi = int_0^1 pi_dot(x) dx`` where ``pi_dot(x)`` is the
expectation of ``psi`` under the stationary process with constant baseline
``nu(x)``; ``pi_dot`` is estimated by simulating that process.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _core
from ._parallel import ordered_map
from .baseline import BSplineBaseline, gauss_legendre
from .errors import InvalidParameterError, NumericFailure
from .kernel import gt_mode
from .likelihood import compensator
from .model import EventSequence, ModelSpec
from .simulator import simulate_hawkes, simulate_stationary, stream_seed

PSI_NAMES = ("identity", "log", "square", "gamma", "consistency")


@dataclass(frozen=True)
class FunctionalSpec:
    """A named functional of the intensity tuple.

    ``identity``, ``log`` and ``square`` act on ``lambda_theta``; ``gamma`` is the
    matrix ``(d lambda)(d lambda)^T / lambda`` whose limit is the asymptotic
    information; ``consistency`` is ``log(l / l*) l* - l + l*``, which needs a
    second parameter point and vanishes identically when both points agree.
    """

    name: str

    def __post_init__(self):
        if self.name not in PSI_NAMES:
            raise InvalidParameterError(f"unknown functional {self.name!r}; choose from {PSI_NAMES}")

    @property
    def needs_grad(self) -> bool:
        return self.name == "gamma"

    @property
    def two_point(self) -> bool:
        return self.name == "consistency"

    def width(self, d: int) -> int:
        return d * d if self.name == "gamma" else 1

    def apply(self, lam, grad=None, lam_star=None) -> np.ndarray:
        """Integrand values, shape ``(N, width)``."""
        if self.name == "identity":
            v = lam
        elif self.name == "log":
            v = np.log(lam)
        elif self.name == "square":
            v = lam * lam
        elif self.name == "consistency":
            v = np.log(lam / lam_star) * lam_star - lam + lam_star
        else:
            return (grad[:, :, None] * grad[:, None, :] / lam[:, None, None]).reshape(len(lam), -1)
        return v[:, None]


def _psi(psi) -> FunctionalSpec:
    return psi if isinstance(psi, FunctionalSpec) else FunctionalSpec(str(psi))


@dataclass(frozen=True)
class BlockPlan:
    """``a_n`` equal blocks of width ``b_n = n / a_n`` starting at ``tau_i = i b_n``."""

    n: float
    a_n: int

    @classmethod
    def default(cls, n: float) -> "BlockPlan":
        return cls(float(n), int(math.ceil(math.sqrt(n))))

    def __post_init__(self):
        if not (self.n > 0 and self.a_n >= 1):
            raise InvalidParameterError("block plan needs n > 0 and at least one block")

    @property
    def b_n(self) -> float:
        return self.n / self.a_n

    @property
    def tau(self) -> np.ndarray:
        return np.arange(self.a_n) * self.b_n

    @property
    def edges(self) -> np.ndarray:
        e = np.arange(self.a_n + 1) * self.b_n
        e[-1] = self.n
        return e


# ---------------------------------------------------------------------------
# intensity tuple on a path

def _tuple_at(model: ModelSpec, src: np.ndarray, s: np.ndarray, n: float, const_x, order: int):
    """``lambda(s)`` (and gradient over theta) at sorted stretched points ``s``."""
    fam = model.family
    c = model.kernel_constants()
    eta = model.kernel_params.eta
    sums = _core.kernel_sums(fam.value, c, src, s, order, math.inf, gt_mode(fam.value, c))
    x = np.full(len(s), float(const_x)) if const_x is not None else np.clip(s / n, 0.0, 1.0)
    nu, gnu, _ = model.baseline.derivs(x, order=order)
    lam = nu + eta * sums[:, 0]
    if order == 0:
        return lam, None
    grad = np.zeros((len(s), model.d))
    k = model.d_nu
    grad[:, :k] = gnu
    grad[:, k] = sums[:, 0]
    if fam.has_shape:
        grad[:, k + 1] = eta * sums[:, 1]
        grad[:, k + 2] = eta * sums[:, 2]
    else:
        grad[:, k + 1] = eta * sums[:, 2]
    return lam, grad


def _integrand(model, star, psi: FunctionalSpec, src, s, n, const_x):
    order = np.argsort(s, kind="stable")
    ss = s[order]
    lam, grad = _tuple_at(model, src, ss, n, const_x, 1 if psi.needs_grad else 0)
    lam_star = _tuple_at(star, src, ss, n, const_x, 0)[0] if psi.two_point else None
    vals = psi.apply(lam, grad, lam_star)
    out = np.empty_like(vals)
    out[order] = vals
    return out


def _interval_integrals(model, star, psi, events: EventSequence, const_x, extra_breaks=(), tol=1e-8,
                        m: int = 8, max_depth: int = 50, grade: int = 3):
    """Adaptive composite Gauss-Legendre of ``psi`` between consecutive breakpoints.

    Each interval ``[a, a + h]`` is mapped from ``u in [0, 1]`` by
    ``s = a + h u^grade``: kernel terms of a fresh event behave like
    ``t^(alpha-1)`` or ``t log t`` near their own event time, and the grading
    makes them smooth in ``u``. Pieces in ``u`` are bisected until the
    ``m``-point rule on a piece and on its halves differ by at most ``tol``
    times the piece's length in ``s``, so the time average carries an
    absolute error of order ``tol``.

    Returns ``(left, right, integrals[width])`` per breakpoint interval.
    """
    n = events.scale_n
    src = events.all_stretched()
    pts = [np.array([0.0, n]), events.stretched, np.asarray(extra_breaks, dtype=float)]
    if const_x is None and isinstance(model.baseline, BSplineBaseline):
        pts.append(n * np.asarray(model.baseline.interior_knots, dtype=float))
    brk = np.unique(np.clip(np.concatenate(pts), 0.0, n))
    left, right = brk[:-1], brk[1:]
    keep = right > left
    left, right = left[keep], right[keep]
    width = psi.width(model.d)
    totals = np.zeros((len(left), width))
    xg, wg = gauss_legendre(m)
    p = float(grade)
    # active pieces: interval index and u-range
    idx = np.arange(len(left))
    ua = np.zeros(len(left))
    ub = np.ones(len(left))
    depth = 0
    while len(idx):
        if depth > max_depth:
            raise NumericFailure(f"time-average quadrature did not reach tolerance {tol}")
        a, h = left[idx], right[idx] - left[idx]
        du = ub - ua
        um = 0.5 * (ua + ub)
        u_full = ua[:, None] + du[:, None] * xg[None, :]
        u_left = ua[:, None] + 0.5 * du[:, None] * xg[None, :]
        u_right = um[:, None] + 0.5 * du[:, None] * xg[None, :]
        u = np.concatenate([u_full, u_left, u_right], axis=1)
        q = a[:, None] + h[:, None] * u ** p
        jac = h[:, None] * p * u ** (p - 1.0)
        f = _integrand(model, star, psi, src, q.ravel(), n, const_x).reshape(len(idx), 3 * m, width)
        f = f * jac[:, :, None]
        i1 = du[:, None] * np.einsum("j,ijw->iw", wg, f[:, :m])
        i2 = 0.5 * du[:, None] * (np.einsum("j,ijw->iw", wg, f[:, m:2 * m]) + np.einsum("j,ijw->iw", wg, f[:, 2 * m:]))
        if not np.all(np.isfinite(i2)):
            raise NumericFailure("non-finite integrand in time average")
        err = np.sqrt(((i1 - i2) ** 2).sum(axis=1))
        span = h * (ub ** p - ua ** p)
        ok = err <= np.maximum(tol * span, 1e-14 * np.sqrt((i2 ** 2).sum(axis=1)))
        np.add.at(totals, idx[ok], i2[ok])
        bad = ~ok
        idx = np.concatenate([idx[bad], idx[bad]])
        ua, ub = np.concatenate([ua[bad], um[bad]]), np.concatenate([um[bad], ub[bad]])
        depth += 1
    return left, right, totals


def _shape(total: np.ndarray, psi: FunctionalSpec, d: int):
    if psi.name == "gamma":
        m = total.reshape(d, d)
        return 0.5 * (m + m.T)
    return float(total[0])


def _star_model(model: ModelSpec, theta_alt) -> ModelSpec:
    return model if theta_alt is None else model.with_theta(theta_alt)


def time_average(model: ModelSpec, events: EventSequence, psi="identity", theta_alt=None, tol: float = 1e-8,
                 method: str = "auto", const_x=None):
    """``(1/n) int_0^n psi(Y_s) ds`` along the observed path.

    ``model`` gives ``lambda_theta``; ``theta_alt`` (default: the same point)
    gives the reference intensity ``lambda_star`` used by two-point functionals.
    For ``identity`` the integral is the compensator, used directly unless
    ``method='quadrature'``. ``const_x`` freezes the baseline at that unit
    position (stationary paths).
    """
    psi = _psi(psi)
    if method not in ("auto", "quadrature"):
        raise InvalidParameterError("method must be 'auto' or 'quadrature'")
    n = events.scale_n
    if psi.name == "identity" and method == "auto":
        if const_x is None:
            return compensator(model, events, 1.0) / n
        from .baseline import ConstantBaseline
        nu = float(model.baseline.derivs(np.array([float(const_x)]))[0][0])
        flat = ModelSpec(ConstantBaseline(nu), model.family, model.kernel_params)
        return compensator(flat, events, 1.0) / n
    star = _star_model(model, theta_alt)
    _, _, vals = _interval_integrals(model, star, psi, events, const_x, tol=tol)
    return _shape(vals.sum(axis=0) / n, psi, model.d)


def block_averages(model: ModelSpec, events: EventSequence, psi="identity", plan: BlockPlan | None = None,
                   theta_alt=None, tol: float = 1e-8) -> np.ndarray:
    """Time average of ``psi`` over each block of ``plan`` (diagnostic output)."""
    psi = _psi(psi)
    plan = plan or BlockPlan.default(events.scale_n)
    if plan.n != events.scale_n:
        raise InvalidParameterError("block plan scale differs from the event scale")
    star = _star_model(model, theta_alt)
    left, _, vals = _interval_integrals(model, star, psi, events, None, plan.edges, tol)
    idx = np.clip(np.searchsorted(plan.edges, left, side="right") - 1, 0, plan.a_n - 1)
    out = np.zeros((plan.a_n, vals.shape[1]))
    np.add.at(out, idx, vals)
    out /= plan.b_n
    return out[:, 0] if psi.width(model.d) == 1 else out.reshape(plan.a_n, model.d, model.d)


# ---------------------------------------------------------------------------
# stationary limit

@dataclass(frozen=True)
class MCOptions:
    horizon: float = 2000.0
    burn_in: float | None = None
    replicates: int = 20
    seed: int = 0
    tol: float = 1e-8


@dataclass(frozen=True, eq=False)
class ErgodicLimit:
    x: np.ndarray
    weights: np.ndarray
    pi_dot: np.ndarray
    pi_dot_se: np.ndarray
    pi: float | np.ndarray
    pi_se: float | np.ndarray
    options: MCOptions


def ergodic_limit(model: ModelSpec, psi="identity", theta_alt=None, nodes: int = 16,
                  mc: MCOptions | None = None, threads: int | None = None) -> ErgodicLimit:
    """Monte-Carlo estimate of ``pi_dot(x)`` at Gauss-Legendre nodes and ``pi = int pi_dot``.

    ``model`` carries ``theta`` (the functional's first argument);
    ``theta_alt`` is the data-generating ``theta*`` (default: ``theta``). At each
    node the stationary process with baseline ``nu(x; theta*)`` is simulated
    ``replicates`` times on ``[0, horizon]`` after a burn-in; replicate ``r`` at
    node ``k`` uses stream ``(seed, k, r)``.
    """
    psi = _psi(psi)
    mc = mc or MCOptions()
    if mc.replicates < 1:
        raise InvalidParameterError("need at least one replicate")
    star = _star_model(model, theta_alt)
    if not star.kernel_params.eta < 1:
        raise InvalidParameterError("stationary limit needs eta < 1")
    x, w = gauss_legendre(nodes)
    width = psi.width(model.d)
    mean = np.zeros((nodes, width))
    se = np.zeros((nodes, width))

    def one(job):
        k, r = job
        xk = float(x[k])
        nu_k = float(star.baseline.derivs(np.array([xk]))[0][0])
        ev = simulate_stationary(nu_k, star.family, star.kernel_params, mc.horizon, stream_seed(mc.seed, k, r),
                                 burn_in=mc.burn_in)
        return np.ravel(time_average(model, ev, psi, theta_alt=star.theta, tol=mc.tol, const_x=xk))

    jobs = [(k, r) for k in range(nodes) for r in range(mc.replicates)]
    allv = np.array(ordered_map(one, jobs, threads)).reshape(nodes, mc.replicates, width)
    for k in range(nodes):
        vals = allv[k]
        mean[k] = vals.mean(axis=0)
        se[k] = vals.std(axis=0, ddof=1) / math.sqrt(mc.replicates) if mc.replicates > 1 else np.nan
    pi = w @ mean
    pi_se = np.sqrt((w ** 2) @ (se ** 2))
    if width == 1:
        return ErgodicLimit(x, w, mean[:, 0], se[:, 0], float(pi[0]), float(pi_se[0]), mc)
    d = model.d
    pm = pi.reshape(d, d)
    return ErgodicLimit(x, w, mean.reshape(nodes, d, d), se.reshape(nodes, d, d), 0.5 * (pm + pm.T),
                        pi_se.reshape(d, d), mc)


def identity_limit(model: ModelSpec) -> float:
    """Closed form ``pi`` for ``psi = identity``: ``int nu / (1 - eta)``."""
    return float(model.baseline.integral_derivs(0.0, 1.0)[0]) / (1.0 - model.kernel_params.eta)


@dataclass(frozen=True, eq=False)
class ErgodicityRow:
    n: float
    replicates: int
    mean_average: float
    mean_abs_dev: float
    sd_dev: float
    mean_count: float
    rate_abs_dev: float
    rate_sd_dev: float


def ergodicity_report(model: ModelSpec, psi="identity", n_list=(200, 800, 3200), replicates: int = 100,
                      seed: int = 0, pi=None, theta_alt=None, limit: MCOptions | None = None,
                      deviations: bool = False, threads: int | None = None):
    """Convergence table of ``|time_average - pi|`` across scales.

    ``pi`` defaults to the closed form for ``identity`` and to
    :func:`ergodic_limit` otherwise. Replicate ``r`` at the ``j``-th scale uses
    stream ``(seed, j, r)``. Scalar functionals only. The ``rate_*`` columns give
    the deviation of the empirical rate ``N(n)/n`` from ``int nu* / (1 - eta*)``;
    unlike the intensity average they stay random when ``eta* = 0``.
    With ``deviations=True``
    the raw per-replicate time averages are returned as well.
    """
    psi = _psi(psi)
    if psi.name == "gamma":
        raise InvalidParameterError("the convergence table supports scalar functionals only")
    if replicates < 2:
        raise InvalidParameterError("need at least two replicates")
    star = _star_model(model, theta_alt)
    if pi is None:
        if psi.name == "identity":
            pi = identity_limit(star) if theta_alt is None else \
                ergodic_limit(model, psi, theta_alt, mc=limit, threads=threads).pi
        else:
            pi = ergodic_limit(model, psi, theta_alt, mc=limit, threads=threads).pi
    rate = identity_limit(star)
    rows, raw = [], {}
    for j, n in enumerate(n_list):

        def one(r, j=j, n=n):
            ev = simulate_hawkes(star, n, stream_seed(seed, j, r))
            return time_average(model, ev, psi, theta_alt=star.theta if psi.two_point else None), ev.count

        out = ordered_map(one, range(replicates), threads)
        avg = np.array([o[0] for o in out])
        cnt = np.array([o[1] for o in out], dtype=float)
        dev = np.abs(avg - pi)
        rdev = np.abs(cnt / n - rate)
        rows.append(ErgodicityRow(float(n), replicates, float(avg.mean()), float(dev.mean()),
                                  float(dev.std(ddof=1)), float(cnt.mean()), float(rdev.mean()),
                                  float(rdev.std(ddof=1))))
        raw[float(n)] = avg
    if deviations:
        return float(pi), rows, raw
    return float(pi), rows
