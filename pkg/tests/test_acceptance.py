"""Acceptance criteria 1 to 11, one test each.

Every test runs against its stated tolerance and wall-clock budget and
appends a PASS or FAIL line to ``RESULTS``; the lines are printed at the end
of the pytest run and by ``python tests/test_acceptance.py``.
"""

import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402
from mflow.canonical import canonical_workflow  # noqa: E402
from mflow.classifier import ObservationSet, classify_regime  # noqa: E402
from mflow.cli import main as cli_main  # noqa: E402
from mflow.errors import NormalizationError  # noqa: E402
from mflow.learning import WeightLadder, interpolate, pattern_response  # noqa: E402
from mflow.metrics import entropy_trajectory, flow_regularity, saturation_flag, shannon_entropy  # noqa: E402
from mflow.model import (  # noqa: E402
    DensityKind,
    DensitySpec,
    Experience,
    ExternalSource,
    InfoSource,
    JointTable,
    RegimeKind,
    RegimeSpec,
    TimeKind,
    TimeModel,
    event_probability,
)
from mflow.regimes import (  # noqa: E402
    MDistribution,
    SupportDescription,
    eval_continuous_decreasing,
    eval_joint_external,
    tilt_precision,
)
from mflow.simulator import Agent, WorkflowGraph, WorkNode, run_monte_carlo  # noqa: E402

SCENARIOS = Path(__file__).parent.parent / "scenarios"
RESULTS: list = []


class Criterion:
    """Context manager timing one criterion and recording its verdict."""

    def __init__(self, number: int, title: str, budget: float):
        self.number, self.title, self.budget = number, title, budget
        self.detail = ""

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        over = elapsed >= self.budget
        ok = exc_type is None and not over
        note = self.detail
        if exc_type is not None:
            note = f"{exc_type.__name__}: {exc}".splitlines()[0]
        elif over:
            note = f"over budget ({note})" if note else "over budget"
        line = f"[{'PASS' if ok else 'FAIL'}] {self.number:>2}. {self.title} ({elapsed:.2f}s / {self.budget:g}s)"
        if note:
            line += f": {note}"
        RESULTS.append(line)
        print(line)
        if exc_type is None and over:
            raise AssertionError(f"criterion {self.number} took {elapsed:.2f}s, budget {self.budget:g}s")
        return False


def single_a(p: float, time_model=None) -> tuple:
    spec = RegimeSpec(RegimeKind.A_BERNOULLI, p, time_model or TimeModel())
    g = WorkflowGraph((WorkNode("step", InfoSource(1.0), spec),))
    return g, {"step": Agent("agent", Experience(1.0))}


# ── 1 ───────────────────────────────────────────────────────────────────


def random_table(r: np.random.Generator) -> tuple:
    """Probabilities near 1 in total, offset by a delta well inside or well outside 1e-12."""
    k = int(r.integers(1, 25))
    w = r.random(k) + 1e-3
    p = w / w.sum()
    if r.random() < 0.5:
        delta = r.uniform(0.0, 5e-13)
    else:
        delta = 10 ** r.uniform(math.log10(2e-12), -3)
    delta *= 1 if r.random() < 0.5 else -1
    j = int(np.argmax(p))
    p[j] += delta
    return tuple(float(v) for v in p)


def accepts(factory, probs) -> bool:
    try:
        factory(probs)
    except NormalizationError:
        return False
    return True


def test_criterion_01_normalization():
    with Criterion(1, "table normalization within 1e-12", 1.0) as c:
        r = np.random.default_rng(2024)
        joint = lambda ps: JointTable(tuple(((i,), v) for i, v in enumerate(ps)))  # noqa: E731
        tabulated = lambda ps: MDistribution(  # noqa: E731
            RegimeKind.B_DETERMINISTIC,
            min(ps[0], 1.0),
            SupportDescription.TABULATED,
            tuple((i, v) for i, v in enumerate(ps)),
        )
        wrong = 0
        n_accept = 0
        for _ in range(1000):
            probs = random_table(r)
            gap = abs(oracles.exact_sum(probs) - 1)
            # the generator keeps every table away from the boundary
            assert gap <= Fraction(6, 10**13) or gap >= Fraction(19, 10**13)
            expected = gap <= Fraction(1, 10**12)
            n_accept += expected
            for factory in (joint, tabulated):
                wrong += accepts(factory, probs) != expected
        c.detail = f"{wrong} misclassified of 2000 checks ({n_accept} valid tables)"
        assert wrong == 0
        assert 300 < n_accept < 700


# ── 2 ───────────────────────────────────────────────────────────────────


def test_criterion_02_reduction_identities():
    with Criterion(2, "reduction identities", 1.0) as c:
        r = np.random.default_rng(7)
        ps = np.concatenate((r.random(10_000), [0.0, 1.0, 5e-324, 1 - 2**-53]))
        mismatches = sum(event_probability(1.0, float(p)) != float(p) for p in ps)
        assert mismatches == 0
        for p in (0.0, 1.0):
            g, agents = single_a(p)
            rep = run_monte_carlo(g, agents, 10_000, 3)
            tr = rep.traces["step"]
            assert np.all(tr.hit == bool(p))
            assert np.all(tr.value == tr.value[0])
            assert rep.nodes["step"].success_rate == p
        c.detail = f"{len(ps)} identities exact; A at p=0 and p=1 deterministic over 10^4 trials"


# ── 3 ───────────────────────────────────────────────────────────────────


def test_criterion_03_tilt_law():
    with Criterion(3, "tilt law monotone with fixed point and limits", 1.0) as c:
        r = np.random.default_rng(11)
        n = 10_000
        ps = r.uniform(1e-6, 1 - 1e-5, n)
        rs = 10 ** r.uniform(math.log10(0.05), 3, n)
        bumps = 10 ** r.uniform(-3, 0, n)
        bad_mono = bad_fixed = bad_limit = 0
        for p, ratio, d in zip(ps.tolist(), rs.tolist(), bumps.tolist()):
            lo_r, hi_r = ratio, ratio * (1 + d)
            a, b = tilt_precision(p, np.array([lo_r, hi_r]))
            bad_mono += not (a < b)
            bad_fixed += tilt_precision(p, 1.0) != p
            small, large = tilt_precision(p, np.array([1e-6, 1e6]))
            bad_limit += not (small <= 1e-3 and large >= 1 - 1e-3)
        # spot-check values against 40-digit arithmetic
        worst = max(
            abs(tilt_precision(p, q) - oracles.tilt(p, q)) / oracles.tilt(p, q)
            for p, q in zip(ps[:200].tolist(), rs[:200].tolist())
        )
        c.detail = f"monotonicity {bad_mono}, fixed point {bad_fixed}, limits {bad_limit} failures; rel err {worst:.1e}"
        assert bad_mono == bad_fixed == bad_limit == 0
        assert worst < 1e-13


# ── 4 ───────────────────────────────────────────────────────────────────


CLOSED_FORMS = {
    DensityKind.UNIFORM: oracles.uniform_mass,
    DensityKind.TRIANGULAR_DECREASING: oracles.tri_decreasing_mass,
    DensityKind.TRIANGULAR_INCREASING: oracles.tri_increasing_mass,
}


def test_criterion_04_quadrature_oracle():
    with Criterion(4, "quadrature against closed-form antiderivatives", 1.0) as c:
        r = np.random.default_rng(4)
        worst = 0.0
        for kind, exact in CLOSED_FORMS.items():
            for _ in range(100):
                lo = float(r.uniform(-5, 5))
                hi = lo + float(10 ** r.uniform(-2, 1))
                dens = DensitySpec(kind, (lo, hi))
                a, b = np.sort(r.uniform(lo, hi, 2))
                if a == b:
                    continue
                got = eval_continuous_decreasing(dens, float(a), float(b))
                worst = max(worst, abs(got - exact(lo, hi, a, b)))
        c.detail = f"max abs error {worst:.1e} over 300 intervals"
        assert worst <= 1e-8


# ── 5 ───────────────────────────────────────────────────────────────────


def test_criterion_05_joint_integral():
    with Criterion(5, "joint box mass within 3 standard errors", 10.0) as c:
        src = ExternalSource(
            (DensitySpec(DensityKind.UNIFORM, (0.0, 2.0)), DensitySpec(DensityKind.UNIFORM, (-1.0, 1.0))),
            ((0.3, 1.5), (-0.2, 0.9)),
        )
        exact = float(Fraction(12, 20) * Fraction(11, 20))
        inside = 0
        for seed in range(100):
            est, se = eval_joint_external(src, 10_000, seed)
            inside += abs(est - exact) <= 3 * se
        c.detail = f"{inside}/100 estimates within 3 SE of {exact}"
        assert inside >= 99


# ── 6 ───────────────────────────────────────────────────────────────────

LADDER = WeightLadder.from_weights([1.0, 3.0, 6.0, 10.0])  # total 10, last increment 4

# (probe, i, expected) with expected = (probe - 10) / 4 + i worked by hand
INTERPOLATE_CASES = [
    (10.0, 0.0, 0.0),
    (14.0, 0.0, 1.0),
    (6.0, 0.0, -1.0),
    (12.0, 1.0, 1.5),
    (11.0, 2.0, 2.25),
    (18.0, -1.0, 1.0),
    (10.0, 7.5, 7.5),
    (0.0, 0.0, -2.5),
    (13.0, 0.5, 1.25),
    (30.0, 0.0, 5.0),
]

# (responses, precisions, expected dot product) worked by hand
PATTERN_CASES = [
    ([1.0], [1.0], 1.0),
    ([2.0, 3.0], [0.0, 0.0], 0.0),
    ([1.0, 2.0, 3.0], [0.5, 0.5, 0.5], 3.0),
    ([4.0], [0.25], 1.0),
    ([1.0, 1.0, 1.0, 1.0], [0.25, 0.25, 0.25, 0.25], 1.0),
    ([10.0, -2.0], [0.5, 1.0], 3.0),
    ([0.5, 0.5], [1.0, 1.0], 1.0),
    ([8.0, 4.0, 2.0], [0.125, 0.25, 0.5], 3.0),
    ([3.0, 5.0], [0.75, 0.0], 2.25),
    ([-1.0, -1.0, 2.0], [1.0, 0.5, 0.25], -1.0),
]


def test_criterion_06_learning_curve():
    with Criterion(6, "learning curve and interpolation oracles", 1.0) as c:
        spec = RegimeSpec(RegimeKind.C_DISCRETE_DECREASING, 0.5, TimeModel())
        g = WorkflowGraph((WorkNode("step", InfoSource(1.0), spec),))
        agents = {"step": Agent("agent", Experience(1.1), gain=0.1)}
        rep = run_monte_carlo(g, agents, 200, 0, reset_experience=False)
        probs = rep.traces["step"].precision_prob
        drops = int(np.sum(np.diff(probs) < -1e-12))
        assert drops == 0
        assert probs[-1] > 0.99
        assert np.all(np.diff(rep.traces["step"].experience) > 0)
        misses = 0
        for probe, i, want in INTERPOLATE_CASES:
            misses += abs(interpolate(LADDER, probe, i) - want) > 1e-12
        for f, p, want in PATTERN_CASES:
            misses += abs(pattern_response(f, p) - want) > 1e-12
        c.detail = f"final precision {probs[-1]:.6f}, {drops} drops, {misses}/20 oracle misses"
        assert misses == 0


# ── 7 ───────────────────────────────────────────────────────────────────


def test_criterion_07_monte_carlo_convergence():
    with Criterion(7, "Monte Carlo convergence", 5.0) as c:
        n = 100_000
        g, agents = single_a(0.3)
        rate = run_monte_carlo(g, agents, n, 1).nodes["step"].success_rate
        band = 4 * math.sqrt(0.3 * 0.7 / n)
        assert abs(rate - 0.3) < band

        ps = (0.3, 0.6, 0.9)
        nodes = tuple(
            WorkNode(f"s{k}", InfoSource(1.0), RegimeSpec(RegimeKind.A_BERNOULLI, p, TimeModel()))
            for k, p in enumerate(ps)
        )
        chain = WorkflowGraph(nodes, (("s0", "s1"), ("s1", "s2")))
        ag = {f"s{k}": Agent(f"a{k}", Experience(1.0)) for k in range(3)}
        e2e = run_monte_carlo(chain, ag, n, 2).end_to_end_rate
        product = math.prod(ps)
        assert abs(e2e - product) < band
        c.detail = f"single {rate:.5f} vs 0.3, chain {e2e:.5f} vs {product:.3f}, band {band:.5f}"


# ── 8 ───────────────────────────────────────────────────────────────────


def test_criterion_08_determinism(tmp_path):
    with Criterion(8, "byte-identical reports under 1, 4 and 8 workers", 10.0) as c:
        snapshots = []
        for w in (1, 4, 8):
            out = tmp_path / f"w{w}"
            args = ["simulate", str(SCENARIOS / "review_chain.yaml"), "--seed", "99"]
            args += ["--trials", "20000", "--workers", str(w), "--out", str(out)]
            assert cli_main(args) == 0
            snapshots.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert snapshots[0] == snapshots[1] == snapshots[2]
        c.detail = f"{len(snapshots[0])} files identical across worker counts"


# ── 9 ───────────────────────────────────────────────────────────────────


def test_criterion_09_classifier_round_trip():
    with Criterion(9, "classifier round trip for regimes A to F", 120.0) as c:
        reps = 100
        tallies = {}
        for kind in "ABCDEF":
            g, agents = canonical_workflow(kind)
            good = 0
            for rep in range(reps):
                obs = ObservationSet.from_report(run_monte_carlo(g, agents, 10_000, rep), "step")
                res = classify_regime(obs, seed=rep)
                assert res.kind is not RegimeKind.G_JOINT_EXTERNAL
                good += res.kind is RegimeKind.parse(kind) and res.confidence >= 0.90
            tallies[kind] = good
        g, agents = canonical_workflow("G")
        g_with = g_without = 0
        for rep in range(10):
            obs = ObservationSet.from_report(run_monte_carlo(g, agents, 10_000, rep), "step")
            g_with += classify_regime(obs, seed=rep).kind is RegimeKind.G_JOINT_EXTERNAL
            bare = ObservationSet(obs.info, obs.precision, obs.time, obs.experience)
            g_without += classify_regime(bare, seed=rep).kind is RegimeKind.G_JOINT_EXTERNAL
        c.detail = " ".join(f"{k}={v}/{reps}" for k, v in tallies.items())
        c.detail += f"; G with covariates {g_with}/10, without {g_without}/10"
        assert all(v >= 95 for v in tallies.values())
        assert g_with == 10 and g_without == 0


# ── 10 ──────────────────────────────────────────────────────────────────


def is_unimodal(h) -> bool:
    peak = int(np.argmax(h))
    return all(a <= b for a, b in zip(h[:peak], h[1 : peak + 1])) and all(
        a >= b for a, b in zip(h[peak:], h[peak + 1 :])
    )


def test_criterion_10_entropy():
    with Criterion(10, "entropy values and unimodal trajectories", 1.0) as c:
        for probs, bits in (([1.0], 0.0), ([0.5, 0.5], 1.0), ([0.25] * 4, 2.0)):
            assert abs(shannon_entropy(probs) - bits) <= 1e-12
        r = np.random.default_rng(10)
        paths = 0
        for _ in range(500):
            n = int(r.integers(3, 60))
            lo, hi = r.uniform(0.0, 0.5), r.uniform(0.5, 1.0)
            path = np.sort(np.concatenate(([lo, hi], r.uniform(lo, hi, n - 2))))
            if r.random() < 0.5:
                path = path[::-1]
            h = entropy_trajectory(path.tolist())
            assert is_unimodal(h)
            peak = int(np.argmax(h))
            assert abs(path[peak] - 0.5) == pytest.approx(np.min(np.abs(path - 0.5)), abs=1e-15)
            paths += 1
        c.detail = f"3 exact values, {paths} monotone paths unimodal"


# ── 11 ──────────────────────────────────────────────────────────────────


def test_criterion_11_saturation_and_flow():
    with Criterion(11, "saturation flag, flow regularity and dwelling time", 5.0) as c:
        assert flow_regularity(np.arange(0.0, 50.0, 2.5)) == 0.0
        assert saturation_flag(1.0, 1.0) == (1.0, True)
        rate = 2.0
        n = 100_000
        g, agents = single_a(0.5, TimeModel(TimeKind.EXPONENTIAL_SERVICE, 1.0, rate))
        rep = run_monte_carlo(g, agents, n, 5)
        dwell = rep.traces["step"].dwell
        se = float(dwell.std(ddof=1)) / math.sqrt(n)
        off = abs(float(dwell.mean()) - 1 / rate)
        assert off <= 3 * se
        assert rep.nodes["step"].mean_dwell == pytest.approx(float(dwell.mean()))
        c.detail = f"dwell mean {dwell.mean():.5f} vs {1 / rate}, {off / se:.2f} SE"


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
