"""Experience dynamics: the cumulative weight ladder and its update rule."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import DataError, DomainError
from .model import EventOutcome, Experience

MISS_FACTOR = 0.1
EXPERIENCE_FLOOR = 1.0


@dataclass(frozen=True)
class WeightLadder:
    """Cumulative weights paired with consecutive trial ordinals 1..n."""

    entries: tuple

    def __post_init__(self):
        entries = tuple((float(w), int(i)) for w, i in self.entries)
        object.__setattr__(self, "entries", entries)
        for k, (w, i) in enumerate(entries, start=1):
            if i != k:
                raise DataError(f"trial indices must run 1..n consecutively; entry {k} has {i}")
            if w < 0:
                raise DataError("ladder weights must be nonnegative")
        if any(b[0] < a[0] for a, b in zip(entries, entries[1:])):
            raise DataError("ladder weights must be nondecreasing")

    @classmethod
    def from_weights(cls, weights: Sequence[float]) -> "WeightLadder":
        return cls(tuple((w, k) for k, w in enumerate(weights, start=1)))

    @classmethod
    def from_experience(cls, exp: Experience) -> "WeightLadder":
        return cls.from_weights(exp.weights)

    @property
    def total(self) -> float:
        return self.entries[-1][0]

    @property
    def last_increment(self) -> float:
        if len(self.entries) == 1:
            return self.entries[0][0]
        return self.entries[-1][0] - self.entries[-2][0]


def interpolate(ladder: WeightLadder, probe: float, i: float) -> float:
    """``(probe - total) / last_increment + i``.

    ``total`` is the ladder's cumulative weight and ``last_increment`` the
    step that produced it; ``i`` is the ordinal offset of the event.
    """
    if not ladder.entries:
        raise DataError("cannot interpolate on an empty ladder")
    step = ladder.last_increment
    if step == 0:
        raise DataError("degenerate ladder: last increment is zero")
    return (probe - ladder.total) / step + i


def pattern_response(responses: Sequence[float], precisions: Sequence[float]) -> float:
    """Linear pattern code ``sum(f_k * P_k)``."""
    if len(responses) != len(precisions):
        raise DataError(f"length mismatch: {len(responses)} responses vs {len(precisions)} precisions")
    if len(responses) == 0:
        raise DataError("pattern_response needs at least one term")
    for p in precisions:
        if not (0.0 <= p <= 1.0):
            raise DomainError(f"precision {p!r} outside [0, 1]")
    return math.fsum(f * p for f, p in zip(responses, precisions))


def grow(magnitude: float, hit: bool, gain: float) -> float:
    """One step of geometric growth; a miss counts ``MISS_FACTOR`` of a hit."""
    prev = magnitude if magnitude > 0 else EXPERIENCE_FLOOR
    inc = gain * prev
    if not hit:
        inc = inc * MISS_FACTOR
    return prev + inc


def update_experience(exp: Experience, outcome: EventOutcome, gain: float) -> Experience:
    if not (gain > 0):
        raise DomainError(f"gain must be > 0, got {gain!r}")
    prev = exp.magnitude if exp.magnitude > 0 else EXPERIENCE_FLOOR
    new = grow(exp.magnitude, outcome.precision_hit, gain)
    weights = exp.weights or (prev,)
    if weights[-1] != prev:
        # zero-magnitude ladder: record the floor seed as its own rung
        weights = weights + (prev,)
    return Experience(new, weights + (new,), exp.trials_completed + 1)
