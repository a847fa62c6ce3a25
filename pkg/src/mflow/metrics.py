"""Entropy, flow-regularity and saturation measurements."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, DomainError, InsufficientDataError

NORMALIZATION_TOL = 1e-9
MAX_BINS = 10_000


@dataclass(frozen=True)
class Histogram:
    edges: tuple
    counts: tuple

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "counts", counts)
        if len(counts) != len(edges) - 1:
            raise DataError(f"{len(edges)} edges need {len(edges) - 1} counts, got {len(counts)}")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise DataError("histogram edges must be strictly increasing")
        if any(c < 0 for c in counts):
            raise DataError("histogram counts must be nonnegative")

    @property
    def total(self) -> int:
        return sum(self.counts)

    def rows(self):
        """``(bin_lo, bin_hi, count)`` triples."""
        return [(lo, hi, c) for lo, hi, c in zip(self.edges, self.edges[1:], self.counts)]


def freedman_diaconis(values: Sequence[float]) -> Histogram:
    """Histogram with Freedman-Diaconis bin width.

    Falls back to Sturges' rule when the interquartile range is zero but the
    data are not constant; constant data land in a single unit-wide bin.
    """
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise InsufficientDataError(0, 1)
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        return Histogram((lo - 0.5, hi + 0.5), (x.size,))
    q75, q25 = np.percentile(x, [75, 25])
    method = "fd" if q75 > q25 else "sturges"
    edges = np.histogram_bin_edges(x, bins=method)
    if len(edges) - 1 > MAX_BINS:
        edges = np.linspace(lo, hi, MAX_BINS + 1)
    counts, edges = np.histogram(x, bins=edges)
    return Histogram(tuple(edges.tolist()), tuple(counts.tolist()))


def shannon_entropy(probs: Sequence[float]) -> float:
    """Entropy in bits, with ``0 log 0 = 0``."""
    p = [float(v) for v in probs]
    for v in p:
        if not (0.0 <= v <= 1.0):
            raise DomainError(f"probability {v!r} outside [0, 1]")
    total = math.fsum(p)
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise DataError(f"probabilities sum to {total!r}, not 1")
    h = -math.fsum(v * math.log2(v) for v in p if v > 0.0)
    return h if h > 0.0 else 0.0


def binary_entropy(p):
    """Bernoulli entropy in bits; vectorised over arrays."""
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr < 0) | (p_arr > 1)):
        raise DomainError("binary entropy needs probabilities in [0, 1]")
    q = 1.0 - p_arr
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(p_arr > 0, p_arr * np.log2(p_arr), 0.0) + np.where(q > 0, q * np.log2(q), 0.0))
    h = np.maximum(h, 0.0)
    return float(h) if h.ndim == 0 else h


def entropy_trajectory(trial_precisions: Sequence[float]) -> list:
    """Binary entropy of each per-trial success probability."""
    return [float(h) for h in np.atleast_1d(binary_entropy(np.asarray(trial_precisions, dtype=float)))]


def flow_regularity(completion_times: Sequence[float]) -> float:
    """Coefficient of variation (population) of the gaps between completions."""
    t = np.asarray(completion_times, dtype=float)
    if t.size < 3:
        raise InsufficientDataError(int(t.size), 3, "completions")
    gaps = np.diff(t)
    if np.any(gaps < 0):
        raise DataError("completion times must be nondecreasing")
    mean = gaps.mean()
    if mean == 0:
        raise DataError("degenerate flow: every completion at the same instant")
    return float(gaps.std() / mean)


def saturation_flag(arrival_rate: float, service_rate: float) -> tuple:
    """Utilization ``arrival/service`` and whether the step is saturated (>= 1)."""
    if not (service_rate > 0):
        raise DomainError(f"service_rate must be > 0, got {service_rate!r}")
    if arrival_rate < 0:
        raise DomainError(f"arrival_rate must be >= 0, got {arrival_rate!r}")
    rho = arrival_rate / service_rate
    return rho, rho >= 1.0
