"""Evaluators for the seven precision regimes (A through G).

Each evaluator returns either a probability or an :class:`MDistribution`
summarising how likely an event is to reach its precision target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DataError,
    DomainError,
    ExtrapolationError,
    NormalizationError,
    RegimeMismatchError,
)
from .model import (
    TABLE_TOL,
    DensitySpec,
    Experience,
    ExternalSource,
    InfoSource,
    JointTable,
    RegimeKind,
    RegimeSpec,
    _check_prob,
    experience_ratio,
)
from .quadrature import DEFAULT_MAX_DEPTH, DEFAULT_TOL, adaptive_simpson

__all__ = [
    "JointTable",
    "MDistribution",
    "SupportDescription",
    "build_distribution",
    "eval_bernoulli",
    "eval_continuous_decreasing",
    "eval_continuous_increasing",
    "eval_deterministic",
    "eval_joint_external",
    "eval_monotone",
    "tilt_precision",
]

DETERMINISTIC_TOL = 1e-9
MIN_MC_SAMPLES = 100


class SupportDescription(Enum):
    POINT_MASS = "point_mass"
    TWO_POINT = "two_point"
    TABULATED = "tabulated"
    CONTINUOUS_TAIL = "continuous_tail"


@dataclass(frozen=True)
class MDistribution:
    kind: RegimeKind
    precision_prob: float
    support_description: SupportDescription
    tabulated: Optional[tuple] = None
    stderr: Optional[float] = None

    def __post_init__(self):
        _check_prob(self.precision_prob, "precision_prob")
        if self.tabulated is not None:
            total = math.fsum(p for _, p in self.tabulated)
            if abs(total - 1.0) > TABLE_TOL:
                raise NormalizationError(total, TABLE_TOL)


def eval_bernoulli(p: float) -> MDistribution:
    """Two-point distribution: success with mass ``p``, failure with ``1 - p``."""
    p = _check_prob(p, "p")
    return MDistribution(
        RegimeKind.A_BERNOULLI, p, SupportDescription.TWO_POINT, ((1, p), (0, 1.0 - p))
    )


def eval_deterministic(table: JointTable, success_index: int = 0) -> MDistribution:
    total = math.fsum(table.probabilities)
    if abs(total - 1.0) > DETERMINISTIC_TOL:
        raise NormalizationError(total, DETERMINISTIC_TOL)
    if not (0 <= success_index < len(table.outcomes)):
        raise DomainError(f"success_index {success_index} outside table of {len(table.outcomes)}")
    if table.is_point_mass():
        return MDistribution(
            RegimeKind.B_DETERMINISTIC,
            1.0,
            SupportDescription.POINT_MASS,
            ((table.outcomes[0][0], 1.0),),
        )
    return MDistribution(
        RegimeKind.B_DETERMINISTIC,
        table.outcomes[success_index][1],
        SupportDescription.TABULATED,
        table.outcomes,
    )


def tilt_precision(base, ratio):
    """Experience tilt ``base ** (1 / ratio)``.

    Ratios above one push the probability toward 1, ratios below one toward 0,
    and ``ratio == 1`` is the identity. ``base`` of exactly 0 or 1 is
    absorbing. Accepts scalars or arrays of ratios.
    """
    base = _check_prob(base, "base")
    r = np.asarray(ratio, dtype=float)
    if np.any(~(r > 0)):
        raise DomainError(f"tilt ratio must be > 0, got {ratio!r}")
    if base in (0.0, 1.0):
        out = np.full_like(r, base)
    else:
        out = np.power(base, 1.0 / r)
    return float(out) if out.ndim == 0 else out


def _check_monotone_ratio(kind: RegimeKind, ratio) -> None:
    r = np.asarray(ratio, dtype=float)
    if kind is RegimeKind.C_DISCRETE_DECREASING and np.any(r <= 1.0):
        bad = float(r.min())
        raise RegimeMismatchError(
            f"regime C requires experience > information (I^i > I); ratio {bad:g} <= 1"
        )
    if kind is RegimeKind.D_DISCRETE_INCREASING and np.any(r >= 1.0):
        bad = float(r.max())
        raise RegimeMismatchError(
            f"regime D requires experience < information (I^i < I); ratio {bad:g} >= 1"
        )


def eval_monotone(spec: RegimeSpec, exp: Experience, info: InfoSource) -> MDistribution:
    """Tilt the base precision by the experience/information ratio (regimes C, D)."""
    if spec.kind not in (RegimeKind.C_DISCRETE_DECREASING, RegimeKind.D_DISCRETE_INCREASING):
        raise DomainError(f"eval_monotone handles regimes C and D, not {spec.kind.value}")
    ratio = experience_ratio(exp, info)
    _check_monotone_ratio(spec.kind, ratio)
    p = tilt_precision(spec.base_precision, ratio)
    return MDistribution(spec.kind, p, SupportDescription.TWO_POINT, ((1, p), (0, 1.0 - p)))


def eval_continuous_decreasing(
    density: DensitySpec,
    lower: float,
    upper: float,
    tol: float = DEFAULT_TOL,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> float:
    """Mass of ``density`` between the precision threshold and the experience ceiling."""
    lo, hi = density.support
    if not (lower < upper):
        raise DomainError(f"need lower < upper, got [{lower!r}, {upper!r}]")
    if lower < lo or upper > hi:
        raise DomainError(f"interval [{lower!r}, {upper!r}] outside density support [{lo!r}, {hi!r}]")
    mass = adaptive_simpson(density.pdf, float(lower), float(upper), tol, max_depth)
    # quadrature noise can step a hair outside [0, 1]
    return min(max(mass, 0.0), 1.0)


def eval_continuous_increasing(cdf_samples: Sequence, at: float, rate: float) -> float:
    """``rate * F(at)`` with ``F`` linearly interpolated from ``(x, F(x))`` pairs."""
    pts = np.asarray(cdf_samples, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise DataError("cdf_samples must be at least two (x, F(x)) pairs")
    xs, fs = pts[:, 0], pts[:, 1]
    if np.any(np.diff(xs) < 0) or np.any(np.diff(fs) < 0):
        raise DataError("cdf_samples must be nondecreasing in both coordinates")
    if np.any(fs < 0) or np.any(fs > 1):
        raise DataError("cdf values must lie in [0, 1]")
    if not (xs[0] <= at <= xs[-1]):
        raise ExtrapolationError(f"at={at!r} outside sampled range [{xs[0]!r}, {xs[-1]!r}]")
    return float(rate) * float(np.interp(at, xs, fs))


@lru_cache(maxsize=256)
def eval_joint_external(src: ExternalSource, samples: int = 10_000, seed: int = 0) -> tuple:
    """Monte Carlo mass of the joint density inside ``src.bounds``.

    Draws ``samples`` points from the product of the per-dimension densities
    and averages the box indicator. Returns ``(estimate, standard_error)``
    with the standard error from the sample standard deviation.
    """
    if samples < MIN_MC_SAMPLES:
        raise DomainError(f"need at least {MIN_MC_SAMPLES} samples, got {samples}")
    rng = np.random.default_rng(seed)
    u = rng.random((samples, src.dimension))
    inside = np.ones(samples, dtype=bool)
    for k, (dens, (a, b)) in enumerate(zip(src.densities, src.bounds)):
        x = dens.ppf(u[:, k])
        inside &= (x >= a) & (x <= b)
    hits = inside.astype(float)
    est = float(hits.mean())
    se = float(hits.std(ddof=1) / math.sqrt(samples))
    return est, se


def build_distribution(
    spec: RegimeSpec,
    exp: Experience,
    info: InfoSource,
    src: Optional[ExternalSource] = None,
    *,
    samples: int = 10_000,
    seed: int = 0,
) -> MDistribution:
    kind = spec.kind
    if kind is RegimeKind.G_JOINT_EXTERNAL:
        if src is None:
            raise DataError("regime G needs an external source")
        p, se = eval_joint_external(src, samples, seed)
        return MDistribution(kind, p, SupportDescription.CONTINUOUS_TAIL, stderr=se)
    if src is not None:
        raise DataError(f"an external source is only valid for regime G, not {kind.value}")
    if kind is RegimeKind.A_BERNOULLI:
        return eval_bernoulli(spec.base_precision)
    if kind is RegimeKind.B_DETERMINISTIC:
        return eval_deterministic(spec.table, spec.success_index)
    if kind in (RegimeKind.C_DISCRETE_DECREASING, RegimeKind.D_DISCRETE_INCREASING):
        return eval_monotone(spec, exp, info)
    if kind is RegimeKind.E_CONTINUOUS_DECREASING:
        p = eval_continuous_decreasing(spec.density, spec.lower, spec.upper)
    else:
        p = eval_continuous_increasing(spec.cdf_points, spec.at, spec.rate)
        if not (0.0 <= p <= 1.0):
            raise DomainError(f"rate-scaled CDF {p!r} is not a probability; lower the rate")
    return MDistribution(kind, p, SupportDescription.CONTINUOUS_TAIL)
