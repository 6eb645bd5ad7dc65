"""Maximum-likelihood fitting with smooth reparameterisation and multistart.

The optimiser works in free coordinates ``z``: log for positive coordinates,
logit for the branching ratio, identity otherwise. BFGS (scipy, Wolfe line
search with cubic interpolation) runs from every start; the best run is then
polished by a few Newton steps using the analytic observed information, which
is needed for the covariance anyway.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import DataError, DomainError, HawkesError, IllConditionedError, InvalidParameterError
from .kernel import KernelFamily, validate_kernel
from .likelihood import LikelihoodWorkspace
from .model import EventSequence, ModelSpec

LOG, LOGIT, IDENT = 0, 1, 2
BOUNDARY_Z = 12.0
COND_LIMIT = 1e12
_Z_CLIP = 60.0


class ParamTransform:
    """Bijection between natural parameters of ``model`` and free coordinates."""

    def __init__(self, model: ModelSpec):
        kinds = [LOG if pos else IDENT for pos in model.baseline.positive_mask]
        kinds.append(LOGIT)
        kinds += [LOG] * (model.d_g - 1)
        self.kinds = np.array(kinds)
        self.names = model.param_names

    def forward(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        z = theta.copy()
        for i, k in enumerate(self.kinds):
            v = theta[i]
            if k == LOG:
                if not v > 0:
                    raise DomainError(f"{self.names[i]}={v} is on or beyond the boundary (must be > 0)")
                z[i] = math.log(v)
            elif k == LOGIT:
                if not 0 < v < 1:
                    raise DomainError(f"{self.names[i]}={v} is on or beyond the boundary (must be in (0, 1))")
                z[i] = math.log(v) - math.log1p(-v)
        return z

    def inverse(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        theta = z.copy()
        lg = self.kinds == LOG
        theta[lg] = np.exp(np.clip(z[lg], -_Z_CLIP, _Z_CLIP))
        lt = self.kinds == LOGIT
        zc = np.clip(z[lt], -_Z_CLIP, _Z_CLIP)
        theta[lt] = 1.0 / (1.0 + np.exp(-zc))
        return theta

    def jacobian(self, z) -> tuple[np.ndarray, np.ndarray]:
        """Diagonal first and second derivatives of ``theta(z)``."""
        th = self.inverse(z)
        j1 = np.ones_like(th)
        j2 = np.zeros_like(th)
        lg = self.kinds == LOG
        j1[lg] = th[lg]
        j2[lg] = th[lg]
        lt = self.kinds == LOGIT
        e = th[lt]
        j1[lt] = e * (1 - e)
        j2[lt] = e * (1 - e) * (1 - 2 * e)
        return j1, j2


def param_transform(theta, model: ModelSpec) -> np.ndarray:
    return ParamTransform(model).forward(theta)


def param_untransform(z, model: ModelSpec) -> np.ndarray:
    return ParamTransform(model).inverse(z)


@dataclass(frozen=True)
class FitOptions:
    starts: int = 5
    max_iter: int = 500
    grad_tol: float = 1e-7
    seed: int = 0
    jitter: float = 0.3
    newton_steps: int = 20
    horizon_eps: float = 0.0


@dataclass(frozen=True, eq=False)
class FitResult:
    theta_hat: np.ndarray
    param_names: list
    loglik_at_opt: float
    information: np.ndarray | None
    covariance: np.ndarray | None
    std_errors: np.ndarray | None
    converged: bool
    iterations: int
    gradient_norm: float
    starts_used: list
    boundary: bool
    model: ModelSpec
    n: float
    count: int
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "param_names": list(self.param_names),
            "theta_hat": arr(self.theta_hat),
            "loglik": float(self.loglik_at_opt),
            "std_errors": arr(self.std_errors),
            "covariance": arr(self.covariance),
            "information": arr(self.information),
            "converged": bool(self.converged),
            "boundary": bool(self.boundary),
            "iterations": int(self.iterations),
            "gradient_norm": float(self.gradient_norm),
            "starts_used": [list(map(float, s)) for s in self.starts_used],
            "n": float(self.n),
            "count": int(self.count),
            "model": self.model.describe(),
            "diagnostics": self.diagnostics,
        }


def covariance_estimate(information: np.ndarray, n: float, free=None) -> tuple[np.ndarray, np.ndarray]:
    """Plug-in covariance ``I^{-1} / n`` restricted to ``free`` coordinates (others get zero).

    Raises :class:`IllConditionedError` when the condition number reaches 1e12.
    """
    info = np.asarray(information, dtype=float)
    d = info.shape[0]
    free = np.arange(d) if free is None else np.asarray(free)
    sub = info[np.ix_(free, free)]
    cond = np.linalg.cond(sub) if sub.size else 1.0
    if not np.isfinite(cond) or cond >= COND_LIMIT:
        raise IllConditionedError("observed information is singular or ill-conditioned", float(cond))
    cov_sub = np.linalg.inv(sub) / n
    cov_sub = 0.5 * (cov_sub + cov_sub.T)
    diag = np.diag(cov_sub)
    if np.any(diag <= 0):
        raise IllConditionedError("observed information is not positive definite", float(cond))
    cov = np.zeros((d, d))
    cov[np.ix_(free, free)] = cov_sub
    return cov, np.sqrt(np.diag(cov))


def moment_start(template: ModelSpec, events: EventSequence) -> np.ndarray:
    """Reproducible starting point from the event count and the mean gap.

    Baseline at the constant level ``count / (2n)``, ``eta = 1 - n int(nu0) / count``
    (= 1/2), shape 1 (0.2 for the heavy-tailed Pareto family), scale from the
    mean inter-event gap on the stretched scale.
    """
    n, cnt = events.scale_n, max(events.count, 1)
    level = cnt / (2.0 * n)
    base = template.baseline
    from .baseline import BSplineBaseline, ConstantBaseline, QuadraticExpBaseline

    if isinstance(base, BSplineBaseline):
        th_nu = np.full(base.n_params, level)      # partition of unity: nu == level
    elif isinstance(base, QuadraticExpBaseline):
        th_nu = np.array([math.log(level / 2), 0.5 * math.log(level / 2), 0.5 * math.log(level / 2)])
    elif isinstance(base, ConstantBaseline):
        th_nu = np.array([level])
    else:
        th_nu = base.params.copy()
    eta0 = 1.0 - n * level / cnt
    beta0 = n / cnt
    fam = template.family
    if fam.has_shape:
        alpha0 = 0.2 if fam is KernelFamily.GENERALIZED_PARETO else 1.0
        th_g = [eta0, alpha0, beta0]
    else:
        th_g = [eta0, beta0]
    return np.concatenate([th_nu, th_g])


def _resolve_fix(template: ModelSpec, fix) -> dict:
    if not fix:
        return {}
    names = template.param_names
    out = {}
    for k, v in dict(fix).items():
        if k not in names:
            raise InvalidParameterError(f"unknown parameter {k!r}; expected one of {names}")
        out[names.index(k)] = float(v)
    return out


class _Objective:
    """Negative normalised log-likelihood over the free coordinates."""

    def __init__(self, ws: LikelihoodWorkspace, tr: ParamTransform, free, fixed_theta):
        self.ws, self.tr = ws, tr
        self.free = free
        self.base = fixed_theta
        self.nev = 0

    def theta(self, zf) -> np.ndarray:
        th = self.base.copy()
        th[self.free] = self.tr.inverse(self._full_z(zf))[self.free]
        return th

    def _full_z(self, zf):
        z = np.zeros(len(self.base))
        z[self.free] = zf
        return z

    def value_grad(self, zf):
        self.nev += 1
        th = self.theta(zf)
        try:
            ll, sc, _ = self.ws.evaluate(th, order=1)
        except (HawkesError, FloatingPointError, ZeroDivisionError, OverflowError):
            return np.inf, np.zeros(len(zf))
        if not (np.isfinite(ll) and np.all(np.isfinite(sc))):
            return np.inf, np.zeros(len(zf))
        j1, _ = self.tr.jacobian(self._full_z(zf))
        return -ll, -(sc * j1)[self.free]

    def hessian(self, zf):
        th = self.theta(zf)
        ll, sc, info = self.ws.evaluate(th, order=2)
        j1, j2 = self.tr.jacobian(self._full_z(zf))
        f = np.ix_(self.free, self.free)
        h = (j1[:, None] * info * j1[None, :])[f] - np.diag((sc * j2)[self.free])
        return -ll, -(sc * j1)[self.free], h, info


def fit_mle(events: EventSequence, template: ModelSpec, options: FitOptions | None = None, fix=None,
            starts: list | None = None) -> FitResult:
    """Maximise the normalised log-likelihood over the free parameters of ``template``.

    ``template`` supplies the model structure (baseline type, knots, kernel
    family); its parameter values are ignored except for coordinates pinned
    by ``fix`` (``{name: value}``). Pinning ``eta`` to 0 gives the Poisson
    submodel; the kernel shape and scale are then pinned too, since they
    no longer enter the likelihood.
    """
    opt = options or FitOptions()
    d = template.d
    if events.count < d:
        raise DataError(f"need at least {d} events to fit {d} parameters, got {events.count}")
    fixed = _resolve_fix(template, fix)
    eta_i = template.eta_index
    if fixed.get(eta_i, None) == 0.0:
        for j in range(eta_i + 1, d):
            fixed.setdefault(j, template.theta[j])
    free = np.array([i for i in range(d) if i not in fixed], dtype=int)
    tr = ParamTransform(template)

    th0 = moment_start(template, events)
    for i, v in fixed.items():
        th0[i] = v
    start_list = [th0] if starts is None else [np.asarray(s, dtype=float) for s in starts]
    if starts is None and opt.starts > 1:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(opt.seed)))
        for _ in range(opt.starts - 1):
            s = th0 * rng.uniform(1 - opt.jitter, 1 + opt.jitter, size=d)
            for i, v in fixed.items():
                s[i] = v
            start_list.append(s)
    base = start_list[0].copy()

    ws = LikelihoodWorkspace(_model_at(template, base), events, opt.horizon_eps)
    obj = _Objective(ws, tr, free, base)

    best = None
    iters = 0
    runs = []
    for s in start_list:
        zf = tr.forward(_safe_interior(s, tr))[free] if len(free) else np.zeros(0)
        if len(free):
            res = optimize.minimize(obj.value_grad, zf, jac=True, method="BFGS",
                                    options={"gtol": opt.grad_tol, "maxiter": opt.max_iter, "norm": 2})
            zf, fval, nit = res.x, res.fun, res.nit
        else:
            fval, nit = obj.value_grad(zf)[0], 0
        iters += nit
        runs.append(float(-fval))
        if best is None or fval < best[1]:
            best = (zf, fval)
    zf, fval = best

    # Newton polish with the analytic information
    diagnostics = {"start_logliks": runs, "fixed": {template.param_names[i]: v for i, v in fixed.items()}}
    info = None
    gnorm = np.inf
    if len(free):
        for _ in range(opt.newton_steps):
            try:
                f, g, h, info = obj.hessian(zf)
            except HawkesError:
                break
            gnorm = float(np.linalg.norm(g))
            if gnorm < 1e-3 * opt.grad_tol:
                break
            try:
                step = -np.linalg.solve(h, g)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(step)) or g @ step >= 0:
                break
            t = 1.0
            accepted = False
            while t > 1e-6:
                fn, gn = obj.value_grad(zf + t * step)
                if fn <= f + 1e-4 * t * (g @ step) or (fn <= f + 1e-12 * abs(f) and np.linalg.norm(gn) < gnorm):
                    zf = zf + t * step
                    accepted = True
                    break
                t *= 0.5
            iters += 1
            if not accepted:
                break
        f, g, h, info = obj.hessian(zf)
        gnorm = float(np.linalg.norm(g))
    else:
        th = obj.theta(zf)
        f, _, info = ws.evaluate(th, order=2)
        f, gnorm = -f, 0.0

    theta_hat = obj.theta(zf)
    z_full = tr.forward(_safe_interior(theta_hat, tr))
    boundary = bool(np.any(np.abs(z_full[free][tr.kinds[free] != IDENT]) > BOUNDARY_Z))
    converged = bool(gnorm < opt.grad_tol and np.isfinite(f))
    cov = se = None
    try:
        cov, se = covariance_estimate(info, events.scale_n, free)
    except IllConditionedError as exc:
        diagnostics["covariance_error"] = str(exc)
        diagnostics["condition_number"] = exc.condition_number
    model_hat = _model_at(template, theta_hat)
    if model_hat.kernel_params.eta > 0:
        diagnostics["conditions"] = [
            {"name": c.name, "satisfied": c.satisfied, "detail": c.detail}
            for c in validate_kernel(model_hat.family, model_hat.kernel_params, 2)]
    diagnostics["evaluations"] = obj.nev
    return FitResult(theta_hat=theta_hat, param_names=template.param_names, loglik_at_opt=float(-f),
                     information=info, covariance=cov, std_errors=se, converged=converged, iterations=iters,
                     gradient_norm=gnorm, starts_used=[s.copy() for s in start_list], boundary=boundary,
                     model=model_hat, n=events.scale_n, count=events.count, diagnostics=diagnostics)


def _model_at(template: ModelSpec, theta) -> ModelSpec:
    return template.with_theta(theta)


def _safe_interior(theta, tr: ParamTransform) -> np.ndarray:
    """Pinned boundary values (eta = 0) are mapped to a finite free coordinate; they are never optimised."""
    th = np.array(theta, dtype=float)
    lt = tr.kinds == LOGIT
    th[lt] = np.clip(th[lt], 1e-300, 1 - 1e-16)
    lg = tr.kinds == LOG
    th[lg] = np.maximum(th[lg], 1e-300)
    return th
