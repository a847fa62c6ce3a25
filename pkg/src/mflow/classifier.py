"""Identify the precision regime behind a set of workflow observations.

The decision uses three pieces of evidence: the support of the precision
values (degenerate, two-valued, lattice or continuous), how experience
compares with information row by row, and a one-sided two-sample
Kolmogorov-Smirnov comparison of the min-max normalised precision and
information distributions. Confidence is the fraction of bootstrap
resamples that reproduce the full-sample decision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import rng
from .errors import DataError, InsufficientDataError
from .model import RegimeKind, SupportKind

MIN_ROWS = 30
DISTINCT_RATIO = 0.05
LATTICE_TOL = 1e-9
# a lattice finer than this fraction of the sample range is treated as continuous
MIN_LATTICE_STEP = 1e-6
EXPERIENCE_MAJORITY = 0.95
DEFAULT_ALPHA = 0.05
DEFAULT_BOOTSTRAP = 200
COVARIATE_BINS = 10


@dataclass(frozen=True)
class ObservationSet:
    info: np.ndarray
    precision: np.ndarray
    time: np.ndarray
    experience: Optional[np.ndarray] = None
    covariates: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("info", "precision", "time"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n = len(self.info)
        if len(self.precision) != n or len(self.time) != n:
            raise DataError("observation columns differ in length")
        if self.experience is not None:
            exp = np.asarray(self.experience, dtype=float)
            if len(exp) != n:
                raise DataError("experience column differs in length")
            object.__setattr__(self, "experience", exp)
        if self.covariates is not None:
            cov = np.asarray(self.covariates, dtype=float).reshape(n, -1)
            object.__setattr__(self, "covariates", cov if cov.shape[1] else None)
        if np.any((self.precision < 0) | (self.precision > 1)):
            raise DataError("precision values must lie in [0, 1]")
        if np.any(~(self.time > 0)):
            raise DataError("time values must be > 0")

    def __len__(self):
        return len(self.info)

    @classmethod
    def from_report(cls, report, node_id: str) -> "ObservationSet":
        """Rows of one node of a simulation report, one per trial."""
        report.node_summary(node_id)
        tr = report.traces[node_id]
        cov = tr.covariates if tr.covariates.shape[1] else None
        return cls(tr.info, tr.value, tr.service, tr.experience, cov)


class EmpiricalCdf:
    """Right-continuous step CDF ``F(x) = #{samples <= x} / n``.

    ``values`` are the distinct sorted samples and ``heights`` the CDF value
    at each of them.
    """

    def __init__(self, samples: Sequence[float]):
        x = np.asarray(samples, dtype=float).ravel()
        if x.size == 0:
            raise DataError("empirical CDF needs at least one sample")
        self.values, counts = np.unique(x, return_counts=True)
        self.n = int(x.size)
        self.heights = np.cumsum(counts) / self.n
        self.heights[-1] = 1.0

    def __call__(self, x):
        h0 = np.concatenate(([0.0], self.heights))
        out = h0[np.searchsorted(self.values, np.asarray(x, dtype=float), side="right")]
        return float(out) if np.ndim(out) == 0 else out


class Dominance(Enum):
    PRECISION_DOMINATES = "precision_dominates"
    INFO_DOMINATES = "info_dominates"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class DominanceResult:
    verdict: Dominance
    d_plus: float
    d_minus: float
    critical: float


def critical_value(n: int, m: int, alpha: float = DEFAULT_ALPHA) -> float:
    """Asymptotic one-sided two-sample Smirnov critical value."""
    return math.sqrt(-math.log(alpha) / 2.0) * math.sqrt((n + m) / (n * m))


def minmax(x: np.ndarray) -> np.ndarray:
    lo, hi = float(np.min(x)), float(np.max(x))
    if not hi > lo:
        raise DataError(f"cannot normalise a sample with degenerate range [{lo}, {hi}]")
    return (x - lo) / (hi - lo)


def _sup_diffs(xp, fp, xi, fi):
    """``sup(F_I - F_P)`` and ``sup(F_P - F_I)`` for step CDFs given at sorted jump points."""
    fp0 = np.concatenate(([0.0], fp))
    fi0 = np.concatenate(([0.0], fi))
    fp_at_i = fp0[np.searchsorted(xp, xi, side="right")]
    fi_at_p = fi0[np.searchsorted(xi, xp, side="right")]
    d_plus = max(0.0, float(np.max(fi - fp_at_i)), float(np.max(fi_at_p - fp)))
    d_minus = max(0.0, float(np.max(fp - fi_at_p)), float(np.max(fp_at_i - fi)))
    return d_plus, d_minus


def _verdict(d_plus, d_minus, crit) -> Dominance:
    if d_plus > crit and d_minus <= crit:
        return Dominance.PRECISION_DOMINATES
    if d_minus > crit and d_plus <= crit:
        return Dominance.INFO_DOMINATES
    return Dominance.INCONCLUSIVE


def dominance_test(
    precision_cdf: EmpiricalCdf,
    info_cdf: EmpiricalCdf,
    alpha: float = DEFAULT_ALPHA,
    normalize: bool = False,
) -> DominanceResult:
    """Which of two samples is stochastically larger.

    ``D+ = sup(F_I - F_P)`` measures precision lying above information;
    precision dominates when ``D+`` clears the critical value and ``D-`` does
    not, and symmetrically. With ``normalize`` both samples are first mapped
    onto [0, 1] by their own min and max.
    """
    xp, xi = precision_cdf.values, info_cdf.values
    if normalize:
        xp, xi = minmax(xp), minmax(xi)
    d_plus, d_minus = _sup_diffs(xp, precision_cdf.heights, xi, info_cdf.heights)
    crit = critical_value(precision_cdf.n, info_cdf.n, alpha)
    return DominanceResult(_verdict(d_plus, d_minus, crit), d_plus, d_minus, crit)


def _lattice_step(u: np.ndarray) -> Optional[float]:
    """Common step of sorted distinct values as a fraction of their range, or None."""
    if u.size < 2:
        return 1.0
    span = u[-1] - u[0]
    d = np.diff(u) / span
    g = float(d[0])
    for x in d[1:]:
        a, b = max(g, float(x)), min(g, float(x))
        while b > LATTICE_TOL:
            r = math.fmod(a, b)
            if r <= LATTICE_TOL or b - r <= LATTICE_TOL:
                r = 0.0
            a, b = b, r
        g = a
        if g < MIN_LATTICE_STEP:
            return None
    k = d / g
    if np.all(np.abs(d - g * np.round(k)) <= LATTICE_TOL):
        return g
    return None


def _support_of_unique(u: np.ndarray, n: int) -> tuple:
    ratio = u.size / n
    if ratio <= DISTINCT_RATIO:
        return SupportKind.DISCRETE, ratio, None
    step = _lattice_step(u)
    if step is not None:
        return SupportKind.DISCRETE, ratio, step * float(u[-1] - u[0])
    return SupportKind.CONTINUOUS, ratio, None


def detect_support(samples: Sequence[float]) -> SupportKind:
    """Discrete when few distinct values or all values on a common lattice."""
    x = np.asarray(samples, dtype=float)
    if x.size < MIN_ROWS:
        raise InsufficientDataError(int(x.size), MIN_ROWS)
    return _support_of_unique(np.unique(x), x.size)[0]


@dataclass
class Classification:
    kind: RegimeKind
    confidence: float
    evidence: dict = field(default_factory=dict)


class _Prepared:
    """Full-sample data arranged so bootstrap resamples reduce to count vectors."""

    def __init__(self, obs: ObservationSet, alpha: float):
        self.n = len(obs)
        self.alpha = alpha
        self.crit = critical_value(self.n, self.n, alpha)
        self.z_crit = float(stats.norm.isf(alpha / 2))
        self.precision = obs.precision
        self.pv, self.pinv = np.unique(obs.precision, return_inverse=True)
        self.iv, self.iinv = np.unique(obs.info, return_inverse=True)
        self.experience = obs.experience
        if obs.experience is not None:
            self.gt = obs.experience > obs.info
            self.lt = obs.experience < obs.info
        self.covariates = obs.covariates
        if obs.covariates is not None:
            edges = [np.quantile(c, np.linspace(0, 1, COVARIATE_BINS + 1)[1:-1]) for c in obs.covariates.T]
            self.cov_bins = np.column_stack(
                [np.searchsorted(e, c, side="right") for e, c in zip(edges, obs.covariates.T)]
            )

    def decide(self, idx: Optional[np.ndarray]) -> tuple:
        n = self.n
        if idx is None:
            pc = np.bincount(self.pinv, minlength=self.pv.size)
        else:
            pc = np.bincount(self.pinv[idx], minlength=self.pv.size)
        present = pc > 0
        distinct = int(np.count_nonzero(present))
        ev = {"distinct_precision_values": distinct}

        if distinct == 1:
            ev["rule"] = "degenerate"
            return RegimeKind.B_DETERMINISTIC, ev

        if self.covariates is not None:
            pvals = self._covariate_pvalues(idx)
            ev["covariate_pvalues"] = pvals
            if min(pvals) * len(pvals) < self.alpha:
                ev["rule"] = "external-dependence"
                return RegimeKind.G_JOINT_EXTERNAL, ev

        if distinct == 2:
            trend = self._trend(idx)
            ev["experience_trend_z"] = trend
            if trend is None or abs(trend) <= self.z_crit:
                ev["rule"] = "two-valued"
                return RegimeKind.A_BERNOULLI, ev

        support, ratio, step = _support_of_unique(self.pv[present], n)
        ev.update(support=support.value, distinct_ratio=ratio, lattice_step=step)
        dom = self._dominance(pc, idx)
        ev.update(d_plus=dom.d_plus, d_minus=dom.d_minus, critical=dom.critical, dominance=dom.verdict.value)

        if support is SupportKind.DISCRETE:
            if self.experience is None:
                raise DataError("column 'experience' is required to separate discrete regimes C and D")
            take = (lambda a: a) if idx is None else (lambda a: a[idx])
            gt, lt = float(take(self.gt).mean()), float(take(self.lt).mean())
            ev.update(frac_experience_above_info=gt, frac_experience_below_info=lt)
            if gt > EXPERIENCE_MAJORITY and dom.verdict is Dominance.PRECISION_DOMINATES:
                ev["rule"] = "discrete-experience-above"
                return RegimeKind.C_DISCRETE_DECREASING, ev
            if lt > EXPERIENCE_MAJORITY and dom.verdict is Dominance.INFO_DOMINATES:
                ev["rule"] = "discrete-experience-below"
                return RegimeKind.D_DISCRETE_INCREASING, ev
            ev["rule"] = "discrete-fallback"
            return RegimeKind.B_DETERMINISTIC, ev

        if dom.verdict is Dominance.PRECISION_DOMINATES:
            ev["rule"] = "continuous-precision-dominates"
            return RegimeKind.E_CONTINUOUS_DECREASING, ev
        if dom.verdict is Dominance.INFO_DOMINATES:
            ev["rule"] = "continuous-info-dominates"
            return RegimeKind.F_CONTINUOUS_INCREASING, ev
        ev["rule"] = "continuous-inconclusive"
        if dom.d_plus >= dom.d_minus:
            return RegimeKind.E_CONTINUOUS_DECREASING, ev
        return RegimeKind.F_CONTINUOUS_INCREASING, ev

    def _dominance(self, pc, idx) -> DominanceResult:
        if idx is None:
            ic = np.bincount(self.iinv, minlength=self.iv.size)
        else:
            ic = np.bincount(self.iinv[idx], minlength=self.iv.size)
        # merge both normalised supports once; a stable sort of two sorted runs is linear
        z = np.concatenate((self._normalized(self.pv, pc), self._normalized(self.iv, ic)))
        order = np.argsort(z, kind="stable")
        zs = z[order]
        w = np.concatenate((-pc, ic))[order]
        diff = np.cumsum(w)
        # evaluate only after the last member of each tie group
        last = np.append(zs[1:] != zs[:-1], True)
        diff = diff[last] / self.n
        d_plus = max(0.0, float(diff.max()))
        d_minus = max(0.0, -float(diff.min()))
        return DominanceResult(_verdict(d_plus, d_minus, self.crit), d_plus, d_minus, self.crit)

    @staticmethod
    def _normalized(values, counts):
        used = counts > 0
        lo, hi = values[np.argmax(used)], values[values.size - 1 - np.argmax(used[::-1])]
        if not hi > lo:
            raise DataError(f"cannot normalise a sample with degenerate range [{lo}, {hi}]")
        return (values - lo) / (hi - lo)

    def _trend(self, idx) -> Optional[float]:
        if self.experience is None:
            return None
        e = self.experience if idx is None else self.experience[idx]
        p = self.precision if idx is None else self.precision[idx]
        if np.ptp(e) == 0:
            return None
        r = float(np.corrcoef(e, p)[0, 1])
        r = max(min(r, 1.0 - 1e-15), -1.0 + 1e-15)
        return r * math.sqrt((self.n - 2) / (1.0 - r * r))

    def _covariate_pvalues(self, idx) -> list:
        p = self.precision if idx is None else self.precision[idx]
        bins = self.cov_bins if idx is None else self.cov_bins[idx]
        total_ss = float(np.sum((p - p.mean()) ** 2))
        out = []
        for b in bins.T:
            k = int(b.max()) + 1
            cnt = np.bincount(b, minlength=k)
            sums = np.bincount(b, weights=p, minlength=k)
            used = cnt > 0
            groups = int(used.sum())
            if groups < 2 or total_ss == 0:
                out.append(1.0)
                continue
            between = float(np.sum(sums[used] ** 2 / cnt[used]) - p.sum() ** 2 / p.size)
            within = max(total_ss - between, 0.0)
            df1, df2 = groups - 1, p.size - groups
            if within == 0:
                out.append(0.0)
                continue
            f = (between / df1) / (within / df2)
            out.append(float(stats.f.sf(f, df1, df2)))
        return out


def classify_regime(
    obs: ObservationSet,
    alpha: float = DEFAULT_ALPHA,
    n_bootstrap: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
) -> Classification:
    """Regime, bootstrap confidence and the evidence behind the call.

    Decision order: a single precision value is B; with covariates, precision
    that varies across covariate bins is G; two precision values without an
    experience trend is A; discrete support splits into C (experience above
    information on most rows, precision dominant), D (the mirror image) or
    falls back to B; continuous support splits into E or F by dominance.
    """
    if len(obs) < MIN_ROWS:
        raise InsufficientDataError(len(obs), MIN_ROWS, "rows")
    prep = _Prepared(obs, alpha)
    kind, evidence = prep.decide(None)
    votes = {}
    agree = 0
    for b in range(n_bootstrap):
        gen = np.random.default_rng(rng.mix(seed, b))
        idx = gen.integers(0, prep.n, prep.n)
        try:
            k, _ = prep.decide(idx)
        except DataError:
            k = None
        key = k.value if k is not None else "refused"
        votes[key] = votes.get(key, 0) + 1
        agree += k is kind
    confidence = agree / n_bootstrap if n_bootstrap else 1.0
    time_support = _support_of_unique(np.unique(obs.time), len(obs))[0]
    evidence.update(n=len(obs), alpha=alpha, bootstrap=n_bootstrap, votes=votes, time_support=time_support.value)
    return Classification(kind, confidence, evidence)
