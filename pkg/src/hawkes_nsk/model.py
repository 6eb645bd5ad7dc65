"""Model specification, parameter packing and event-sequence containers."""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baseline import BaselineSpec, parse_baseline
from .errors import DataError, InvalidParameterError
from .kernel import Kernel, KernelFamily, KernelParams, check_params, kernel_constants, parse_kernel


@dataclass(frozen=True)
class ModelSpec:
    """Baseline plus kernel with the packing ``theta = (theta_nu, eta, alpha, beta)``.

    ``alpha`` is absent for the exponential family.
    """

    baseline: BaselineSpec
    family: KernelFamily
    kernel_params: KernelParams

    def __post_init__(self):
        check_params(self.family, self.kernel_params)

    @classmethod
    def parse(cls, baseline: str, kernel: str) -> "ModelSpec":
        k = parse_kernel(kernel)
        return cls(parse_baseline(baseline), k.family, k.params)

    @property
    def kernel(self) -> Kernel:
        return Kernel(self.family, self.kernel_params)

    @property
    def d_nu(self) -> int:
        return self.baseline.n_params

    @property
    def d_g(self) -> int:
        return 3 if self.family.has_shape else 2

    @property
    def d(self) -> int:
        return self.d_nu + self.d_g

    @property
    def eta_index(self) -> int:
        return self.d_nu

    @property
    def param_names(self) -> list[str]:
        return list(self.baseline.param_names) + list(self.family.param_names)

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.baseline.params, self.kernel_params.as_vector(self.family)])

    def with_theta(self, theta) -> "ModelSpec":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.d,):
            raise InvalidParameterError(f"expected {self.d} parameters, got shape {theta.shape}")
        return ModelSpec(self.baseline.with_params(theta[:self.d_nu]), self.family,
                         KernelParams.from_vector(self.family, theta[self.d_nu:]))

    def with_kernel(self, params: KernelParams) -> "ModelSpec":
        return replace(self, kernel_params=params)

    def kernel_constants(self) -> np.ndarray:
        return kernel_constants(self.family, self.kernel_params)

    def describe(self) -> dict:
        return {"baseline": str(self.baseline), "kernel": str(self.kernel),
                "theta": dict(zip(self.param_names, map(float, self.theta)))}


def reference_model(which: int) -> ModelSpec:
    """The three simulation-study models: 1 generalised Pareto, 2 gamma, 3 Weibull."""
    from .baseline import REFERENCE_BASELINE

    if which == 1:
        fam, p = KernelFamily.GENERALIZED_PARETO, KernelParams(eta=0.5, alpha=0.25, beta=0.75)
    elif which == 2:
        fam, p = KernelFamily.GAMMA, KernelParams(eta=0.5, alpha=2.0, beta=0.5)
    elif which == 3:
        fam, p = KernelFamily.WEIBULL, KernelParams(eta=0.5, alpha=2.0, beta=1.0 / math.gamma(1.5))
    else:
        raise ValueError("reference models are numbered 1-3")
    return ModelSpec(REFERENCE_BASELINE, fam, p)


@dataclass(frozen=True, eq=False)
class EventSequence:
    """Strictly increasing event times on the unit window, observed at scale ``n``.

    Stretched times are ``n * times``. ``history`` optionally holds earlier
    events (negative unit times) that excite the window but are not part of
    the observation; the stationary simulator fills it with its burn-in.
    """

    times: np.ndarray
    scale_n: float
    history: np.ndarray = field(default_factory=lambda: np.empty(0))
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.ascontiguousarray(self.times, dtype=float)
        h = np.ascontiguousarray(self.history, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "history", h)
        if t.ndim != 1:
            raise DataError("event times must be one-dimensional")
        if not (self.scale_n > 0 and math.isfinite(self.scale_n)):
            raise DataError(f"scale n must be positive, got {self.scale_n}")
        if len(t) and (t[0] < 0.0 or t[-1] > 1.0 or not np.all(np.isfinite(t))):
            raise DataError("event times must lie in [0, 1]")
        if np.any(np.diff(t) <= 0):
            raise DataError("event times must be strictly increasing (simultaneous events are not allowed)")
        if len(h) and (np.any(np.diff(h) <= 0) or h[-1] >= 0.0):
            raise DataError("history must be strictly increasing and negative")

    @property
    def count(self) -> int:
        return len(self.times)

    @property
    def stretched(self) -> np.ndarray:
        return self.scale_n * self.times

    def all_stretched(self) -> np.ndarray:
        """History followed by window events, on the stretched scale."""
        return self.scale_n * np.concatenate([self.history, self.times])

    def __eq__(self, other):
        return (isinstance(other, EventSequence) and self.scale_n == other.scale_n
                and np.array_equal(self.times, other.times) and np.array_equal(self.history, other.history))

    def __len__(self):
        return self.count


# ---------------------------------------------------------------------------
# serialisation

def fmt(x: float) -> str:
    return "%.17g" % x


def write_events_csv(events: EventSequence, path) -> None:
    Path(path).write_text("".join(fmt(t) + "\n" for t in events.times))


_FLOAT_MARK = re.compile(r'"@f:([^"]*)"')


def dumps17(doc, indent=1) -> str:
    """JSON text with every float written as ``%.17g`` (non-finite values become null)."""
    def conv(o):
        if isinstance(o, dict):
            return {str(k): conv(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [conv(v) for v in o]
        if isinstance(o, np.ndarray):
            return conv(o.tolist())
        if isinstance(o, (bool, np.bool_)):
            return bool(o)
        if isinstance(o, (np.integer, int)):
            return int(o)
        if isinstance(o, (np.floating, float)):
            v = float(o)
            return "@f:" + fmt(v) if math.isfinite(v) else None
        return o

    return _FLOAT_MARK.sub(r"\1", json.dumps(conv(doc), indent=indent))


def events_to_json(events: EventSequence, seed=None, model: ModelSpec | None = None) -> str:
    doc = {"n": events.scale_n, "times": events.times, "seed": seed,
           "model": model.describe() if model is not None else None}
    return dumps17(doc)


def write_events_json(events: EventSequence, path, seed=None, model=None) -> None:
    Path(path).write_text(events_to_json(events, seed, model))


def read_events(path, n: float | None = None) -> EventSequence:
    """Load events from the CSV or JSON format; ``n`` overrides / supplies the scale."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read event file {path}: {exc}") from exc
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
            times = np.array(doc["times"], dtype=float)
        except (ValueError, KeyError, TypeError) as exc:
            raise DataError(f"malformed event JSON {path}: {exc}") from exc
        scale = n if n is not None else doc.get("n")
    else:
        vals = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                vals.append(float(line.split(",")[0]))
            except ValueError:
                raise DataError(f"{path}:{lineno}: not a number: {line!r}") from None
        times = np.array(vals, dtype=float)
        scale = n
    if scale is None:
        raise DataError(f"scale n unknown for {path}; pass it explicitly")
    return EventSequence(times, float(scale))
