"""Domain types and the core productivity equation.

An event's probability is the product of an experience term and an
information-conditioned processing term. Everything else in the package
(regimes, learning, simulation) is built on the immutable value types below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import DataError, DomainError, NormalizationError
from .quadrature import adaptive_simpson

DENSITY_TOL = 1e-6
TABLE_TOL = 1e-12


def _check_prob(value: float, name: str) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise DomainError(f"{name}={value!r} is not a probability in [0, 1]")
    return value


class _ParseEnum(Enum):
    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("-", "_")
        for member in cls:
            if key in (member.value.lower(), member.name.lower()):
                return member
        choices = ", ".join(m.value for m in cls)
        raise DomainError(f"unknown {cls.__name__} {text!r} (expected one of {choices})")


class SupportKind(_ParseEnum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


class RegimeKind(_ParseEnum):
    A_BERNOULLI = "A"
    B_DETERMINISTIC = "B"
    C_DISCRETE_DECREASING = "C"
    D_DISCRETE_INCREASING = "D"
    E_CONTINUOUS_DECREASING = "E"
    F_CONTINUOUS_INCREASING = "F"
    G_JOINT_EXTERNAL = "G"


class TimeKind(_ParseEnum):
    FIXED = "fixed"
    GEOMETRIC_RETRIES = "geometric"
    EXPONENTIAL_SERVICE = "exponential"


class DensityKind(_ParseEnum):
    UNIFORM = "uniform"
    TRIANGULAR_DECREASING = "triangular_decreasing"
    TRIANGULAR_INCREASING = "triangular_increasing"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class InfoSource:
    """Information content of a task.

    ``spread`` is the relative half-width of per-trial jitter: each trial
    sees ``magnitude * (1 + spread * (2u - 1))``. Zero means a fixed task.
    """

    magnitude: float
    support: SupportKind = SupportKind.DISCRETE
    dimension: int = 1
    spread: float = 0.0

    def __post_init__(self):
        if not (self.magnitude >= 0.0) or math.isinf(self.magnitude):
            raise DomainError(f"info magnitude must be finite and >= 0, got {self.magnitude!r}")
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise DomainError(f"info dimension must be a positive integer, got {self.dimension!r}")
        if not (0.0 <= self.spread < 1.0):
            raise DomainError(f"info spread must lie in [0, 1), got {self.spread!r}")
        object.__setattr__(self, "support", SupportKind.parse(self.support))


@dataclass(frozen=True)
class Experience:
    """Accumulated experience of an agent: a cumulative weight ladder."""

    magnitude: float
    weights: tuple = ()
    trials_completed: int = 0

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "weights", weights)
        if not (self.magnitude >= 0.0) or math.isinf(self.magnitude):
            raise DomainError(f"experience magnitude must be finite and >= 0, got {self.magnitude!r}")
        if self.trials_completed < 0:
            raise DomainError("trials_completed must be >= 0")
        if any(w < 0.0 for w in weights):
            raise DataError("experience weights must be nonnegative")
        if any(b < a for a, b in zip(weights, weights[1:])):
            raise DataError("experience weights must be nondecreasing")
        if weights and weights[-1] != self.magnitude:
            raise DataError(
                f"experience magnitude {self.magnitude!r} differs from last weight {weights[-1]!r}"
            )


@dataclass(frozen=True)
class DensitySpec:
    """A bounded 1-D probability density.

    ``params`` is ``(lo, hi)`` for the uniform and triangular kinds;
    triangular-decreasing peaks at ``lo``, triangular-increasing at ``hi``.
    ``table`` holds ``(x, f(x))`` knots of a piecewise-linear density.
    """

    kind: DensityKind
    params: tuple = ()
    table: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", DensityKind.parse(self.kind))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind is DensityKind.TABULATED:
            if self.table is None or len(self.table) < 2:
                raise DataError("tabulated density needs at least two (x, f) knots")
            table = tuple((float(x), float(f)) for x, f in self.table)
            object.__setattr__(self, "table", table)
            xs = np.array([t[0] for t in table])
            fs = np.array([t[1] for t in table])
            if np.any(np.diff(xs) <= 0):
                raise DataError("tabulated density abscissae must be strictly increasing")
            if np.any(fs < 0):
                raise DataError("tabulated density ordinates must be >= 0")
            seg = 0.5 * (fs[1:] + fs[:-1]) * np.diff(xs)
            cum = np.concatenate(([0.0], np.cumsum(seg)))
            object.__setattr__(self, "_xs", xs)
            object.__setattr__(self, "_fs", fs)
            object.__setattr__(self, "_cum", cum)
            total = float(cum[-1])
        else:
            if len(self.params) != 2 or not (self.params[0] < self.params[1]):
                raise DataError(f"{self.kind.value} density needs params (lo, hi) with lo < hi")
            if not all(math.isfinite(p) for p in self.params):
                raise DataError("density bounds must be finite")
            lo, hi = self.params
            total = adaptive_simpson(self.pdf, lo, hi)
        if abs(total - 1.0) > DENSITY_TOL:
            raise NormalizationError(total, DENSITY_TOL)

    @property
    def support(self) -> tuple:
        if self.kind is DensityKind.TABULATED:
            return (self.table[0][0], self.table[-1][0])
        return self.params

    def pdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        lo, hi = self.support
        inside = (x_arr >= lo) & (x_arr <= hi)
        if self.kind is DensityKind.TABULATED:
            out = np.interp(x_arr, self._xs, self._fs, left=0.0, right=0.0)
        else:
            w = hi - lo
            if self.kind is DensityKind.UNIFORM:
                out = np.full_like(x_arr, 1.0 / w)
            elif self.kind is DensityKind.TRIANGULAR_DECREASING:
                out = 2.0 * (hi - x_arr) / (w * w)
            else:
                out = 2.0 * (x_arr - lo) / (w * w)
        out = np.where(inside, out, 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        x_arr = np.clip(np.asarray(x, dtype=float), *self.support)
        lo, hi = self.support
        w = hi - lo
        if self.kind is DensityKind.UNIFORM:
            out = (x_arr - lo) / w
        elif self.kind is DensityKind.TRIANGULAR_DECREASING:
            out = 1.0 - ((hi - x_arr) / w) ** 2
        elif self.kind is DensityKind.TRIANGULAR_INCREASING:
            out = ((x_arr - lo) / w) ** 2
        else:
            xs, fs, cum = self._xs, self._fs, self._cum
            i = np.clip(np.searchsorted(xs, x_arr, side="right") - 1, 0, len(xs) - 2)
            t = x_arr - xs[i]
            slope = (fs[i + 1] - fs[i]) / (xs[i + 1] - xs[i])
            out = cum[i] + fs[i] * t + 0.5 * slope * t * t
        return float(out) if out.ndim == 0 else out

    def ppf(self, u):
        """Inverse CDF on [0, 1]."""
        u_arr = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        lo, hi = self.support
        w = hi - lo
        if self.kind is DensityKind.UNIFORM:
            out = lo + u_arr * w
        elif self.kind is DensityKind.TRIANGULAR_DECREASING:
            out = hi - w * np.sqrt(1.0 - u_arr)
        elif self.kind is DensityKind.TRIANGULAR_INCREASING:
            out = lo + w * np.sqrt(u_arr)
        else:
            xs, fs, cum = self._xs, self._fs, self._cum
            target = u_arr * cum[-1]
            i = np.clip(np.searchsorted(cum, target, side="right") - 1, 0, len(xs) - 2)
            r = target - cum[i]
            slope = (fs[i + 1] - fs[i]) / (xs[i + 1] - xs[i])
            disc = np.sqrt(np.maximum(fs[i] * fs[i] + 2.0 * slope * r, 0.0))
            denom = fs[i] + disc
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(denom > 0, 2.0 * r / denom, 0.0)
            out = np.minimum(xs[i] + t, xs[i + 1])
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ExternalSource:
    """Multi-dimensional environmental source: independent densities and a box."""

    densities: tuple
    bounds: tuple

    def __post_init__(self):
        object.__setattr__(self, "densities", tuple(self.densities))
        object.__setattr__(self, "bounds", tuple((float(a), float(b)) for a, b in self.bounds))
        if len(self.densities) < 1 or len(self.densities) != len(self.bounds):
            raise DataError(
                f"external source needs equally many densities and bounds (>= 1), "
                f"got {len(self.densities)} and {len(self.bounds)}"
            )
        for k, (a, b) in enumerate(self.bounds):
            if not (a <= b):
                raise DataError(f"bounds[{k}] = ({a}, {b}) is not a closed interval")

    @property
    def dimension(self) -> int:
        return len(self.densities)


@dataclass(frozen=True)
class JointTable:
    """Finite joint distribution: ``((index_vector, probability), ...)``."""

    outcomes: tuple

    def __post_init__(self):
        outcomes = tuple((tuple(int(i) for i in idx), float(p)) for idx, p in self.outcomes)
        object.__setattr__(self, "outcomes", outcomes)
        if not outcomes:
            raise DataError("joint table must have at least one outcome")
        probs = [p for _, p in outcomes]
        if any(not (p >= 0.0) for p in probs):
            raise DataError("joint table probabilities must be nonnegative")
        total = math.fsum(probs)
        if abs(total - 1.0) > TABLE_TOL:
            raise NormalizationError(total, TABLE_TOL)

    @property
    def probabilities(self) -> tuple:
        return tuple(p for _, p in self.outcomes)

    def is_point_mass(self) -> bool:
        return len(self.outcomes) == 1


@dataclass(frozen=True)
class TimeModel:
    """How long processing takes.

    ``param`` is ignored for FIXED, is the per-attempt resolution probability
    for GEOMETRIC_RETRIES, and the service rate for EXPONENTIAL_SERVICE.
    """

    kind: TimeKind = TimeKind.FIXED
    base_time: float = 1.0
    param: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", TimeKind.parse(self.kind))
        if not (self.base_time > 0.0) or math.isinf(self.base_time):
            raise DomainError(f"base_time must be > 0, got {self.base_time!r}")
        if self.kind is TimeKind.GEOMETRIC_RETRIES and not (0.0 < self.param <= 1.0):
            raise DomainError(f"retry probability must lie in (0, 1], got {self.param!r}")
        if self.kind is TimeKind.EXPONENTIAL_SERVICE and not (self.param > 0.0):
            raise DomainError(f"service rate must be > 0, got {self.param!r}")

    @property
    def mean(self) -> float:
        if self.kind is TimeKind.FIXED:
            return self.base_time
        if self.kind is TimeKind.GEOMETRIC_RETRIES:
            return self.base_time / self.param
        return 1.0 / self.param


@dataclass(frozen=True)
class RegimeSpec:
    """Which regime governs an event plus the parameters that regime needs.

    Besides ``base_precision`` (the untilted processing probability) the
    deterministic regime needs ``table``/``success_index``, the continuous
    decreasing regime ``density``/``lower``/``upper``, and the continuous
    increasing regime ``cdf_points``/``at``/``rate``.
    """

    kind: RegimeKind
    base_precision: float = 0.5
    time_model: TimeModel = field(default_factory=TimeModel)
    table: Optional[JointTable] = None
    success_index: int = 0
    density: Optional[DensitySpec] = None
    lower: Optional[float] = None
    upper: Optional[float] = None
    cdf_points: Optional[tuple] = None
    at: Optional[float] = None
    rate: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", RegimeKind.parse(self.kind))
        _check_prob(self.base_precision, "base_precision")
        kind = self.kind
        if kind is RegimeKind.B_DETERMINISTIC:
            if self.table is None:
                raise DataError("regime B needs a joint table")
            if not (0 <= self.success_index < len(self.table.outcomes)):
                raise DataError(f"success_index {self.success_index} outside the table")
        if kind is RegimeKind.E_CONTINUOUS_DECREASING:
            if self.density is None or self.lower is None or self.upper is None:
                raise DataError("regime E needs density, lower and upper")
        if kind is RegimeKind.F_CONTINUOUS_INCREASING:
            if self.cdf_points is None or self.at is None or self.rate is None:
                raise DataError("regime F needs cdf_points, at and rate")
            object.__setattr__(
                self, "cdf_points", tuple((float(x), float(y)) for x, y in self.cdf_points)
            )


@dataclass(frozen=True)
class EventOutcome:
    precision_hit: bool
    precision_value: float
    time_spent: float
    regime: RegimeKind
    target: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.precision_value <= 1.0):
            raise DomainError(f"precision_value {self.precision_value!r} outside [0, 1]")
        if not (self.time_spent > 0.0):
            raise DomainError(f"time_spent must be > 0, got {self.time_spent!r}")
        if self.precision_hit and self.precision_value < self.target:
            raise DataError("a hit must reach the precision target")


def event_probability(prob_experience: float, prob_conditional: float) -> float:
    """Probability of an event: experience term times processing term."""
    a = _check_prob(prob_experience, "prob_experience")
    b = _check_prob(prob_conditional, "prob_conditional")
    return a * b


def magnitude_ratio(numerator: float, denominator: float) -> float:
    """Ratio of two information-scale magnitudes; the denominator must be > 0."""
    if not (denominator > 0.0):
        raise DomainError(f"degenerate information: magnitude {denominator!r} must be > 0")
    return float(numerator) / float(denominator)


def experience_ratio(exp: Experience, info: InfoSource) -> float:
    """``exp.magnitude / info.magnitude``; above 1 means experience exceeds information."""
    return magnitude_ratio(exp.magnitude, info.magnitude)
