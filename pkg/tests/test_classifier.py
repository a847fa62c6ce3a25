import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

import oracles
from mflow.canonical import canonical_workflow
from mflow.classifier import (
    Dominance,
    EmpiricalCdf,
    ObservationSet,
    classify_regime,
    critical_value,
    detect_support,
    dominance_test,
    minmax,
)
from mflow.errors import DataError, InsufficientDataError
from mflow.model import RegimeKind, SupportKind
from mflow.simulator import run_monte_carlo

samples = st.lists(st.floats(-100, 100), min_size=1, max_size=60)


def observations(kind, n=10_000, seed=0, **kw):
    g, ag = canonical_workflow(kind)
    return ObservationSet.from_report(run_monte_carlo(g, ag, n, seed, **kw), "step")


# ── empirical CDF ───────────────────────────────────────────────────────


@pytest.mark.parametrize("data,q,expected", [([1, 2, 3], 2, 2 / 3), ([5], 5, 1.0), ([1, 1, 2], 1, 2 / 3)])
def test_ecdf_examples(data, q, expected):
    assert EmpiricalCdf(data)(q) == pytest.approx(expected, abs=1e-15)


def test_ecdf_empty():
    with pytest.raises(DataError):
        EmpiricalCdf([])


@given(samples)
def test_ecdf_edges(data):
    f = EmpiricalCdf(data)
    assert f(max(data)) == 1.0
    assert f(min(data) - 1.0) == 0.0
    grid = np.linspace(min(data) - 1, max(data) + 1, 50)
    assert np.all(np.diff(f(grid)) >= 0)


@given(samples, st.floats(-101, 101))
def test_ecdf_counts(data, q):
    assert EmpiricalCdf(data)(q) == pytest.approx(sum(v <= q for v in data) / len(data), abs=1e-15)


# ── support detection ───────────────────────────────────────────────────


def test_detect_support_examples():
    r = np.random.default_rng(0)
    assert detect_support(r.integers(0, 2, 1000)) is SupportKind.DISCRETE
    assert detect_support(r.random(1000)) is SupportKind.CONTINUOUS
    assert detect_support(0.25 * r.integers(0, 1000, 1000)) is SupportKind.DISCRETE
    with pytest.raises(InsufficientDataError, match="30"):
        detect_support([1.0] * 29)


def test_lattice_with_offset_and_many_values():
    r = np.random.default_rng(1)
    x = 3.7 + 0.01 * r.integers(0, 900, 1000)
    assert detect_support(x) is SupportKind.DISCRETE


# ── dominance ───────────────────────────────────────────────────────────


def test_dominance_examples():
    r = np.random.default_rng(2)
    base = r.random(500)
    other = r.random(500)
    shifted = EmpiricalCdf(other + 0.3)
    plain = EmpiricalCdf(base)
    assert dominance_test(shifted, plain).verdict is Dominance.PRECISION_DOMINATES
    assert dominance_test(plain, shifted).verdict is Dominance.INFO_DOMINATES
    same = dominance_test(plain, plain)
    assert same.verdict is Dominance.INCONCLUSIVE and same.d_plus == same.d_minus == 0.0


@given(samples, samples)
@settings(max_examples=60)
def test_dominance_antisymmetric(x, y):
    a = dominance_test(EmpiricalCdf(x), EmpiricalCdf(y))
    b = dominance_test(EmpiricalCdf(y), EmpiricalCdf(x))
    assert (a.d_plus, a.d_minus) == (b.d_minus, b.d_plus)
    flip = {
        Dominance.PRECISION_DOMINATES: Dominance.INFO_DOMINATES,
        Dominance.INFO_DOMINATES: Dominance.PRECISION_DOMINATES,
        Dominance.INCONCLUSIVE: Dominance.INCONCLUSIVE,
    }
    assert b.verdict is flip[a.verdict]


@given(samples, samples)
@settings(max_examples=60)
def test_dominance_statistics_match_brute_force(x, y):
    r = dominance_test(EmpiricalCdf(x), EmpiricalCdf(y))
    d_plus, d_minus = oracles.one_sided_ks(x, y)
    assert r.d_plus == pytest.approx(d_plus, abs=1e-12)
    assert r.d_minus == pytest.approx(d_minus, abs=1e-12)


def test_dominance_statistics_match_scipy():
    r = np.random.default_rng(3)
    p, i = r.beta(2, 1, 800), r.random(600)
    res = dominance_test(EmpiricalCdf(p), EmpiricalCdf(i))
    assert res.d_plus == pytest.approx(stats.ks_2samp(p, i, alternative="less", method="asymp").statistic, abs=1e-12)
    assert res.d_minus == pytest.approx(stats.ks_2samp(p, i, alternative="greater", method="asymp").statistic, abs=1e-12)


def test_critical_value():
    # one-sided asymptotic: exp(-2 n m/(n+m) c^2) = alpha
    c = critical_value(500, 500, 0.05)
    assert np.exp(-2 * 250 * c * c) == pytest.approx(0.05)


def test_normalised_dominance_and_degenerate_range():
    p = EmpiricalCdf([0.2, 0.9, 0.95, 1.0])
    i = EmpiricalCdf([10.0, 11.0, 12.0, 20.0])
    res = dominance_test(p, i, normalize=True)
    assert res.d_plus > 0
    with pytest.raises(DataError, match="degenerate"):
        dominance_test(EmpiricalCdf([1.0, 1.0]), i, normalize=True)
    with pytest.raises(DataError):
        minmax(np.array([2.0, 2.0]))


# ── classification ──────────────────────────────────────────────────────


def test_observation_set_validation():
    with pytest.raises(DataError):
        ObservationSet([1, 2], [0.5], [1, 1])
    with pytest.raises(DataError):
        ObservationSet([1], [1.5], [1])
    with pytest.raises(DataError):
        ObservationSet([1], [0.5], [0.0])


def test_refuses_small_samples():
    obs = ObservationSet(np.ones(20), np.zeros(20), np.ones(20))
    with pytest.raises(InsufficientDataError, match="30"):
        classify_regime(obs)


def test_regime_a_example():
    c = classify_regime(observations("A"))
    assert c.kind is RegimeKind.A_BERNOULLI and c.confidence >= 0.95
    assert c.evidence["rule"] == "two-valued"


def test_regime_c_example():
    c = classify_regime(observations("C"))
    assert c.kind is RegimeKind.C_DISCRETE_DECREASING and c.confidence >= 0.90
    assert c.evidence["frac_experience_above_info"] > 0.95
    assert c.evidence["support"] == "discrete"


@pytest.mark.parametrize("kind", ["B", "D", "E", "F"])
def test_other_regimes_round_trip(kind):
    c = classify_regime(observations(kind, seed=11), seed=11)
    assert c.kind is RegimeKind.parse(kind) and c.confidence >= 0.90


def test_regime_g_needs_covariates():
    obs = observations("G")
    assert classify_regime(obs).kind is RegimeKind.G_JOINT_EXTERNAL
    bare = ObservationSet(obs.info, obs.precision, obs.time, obs.experience)
    assert classify_regime(bare).kind is not RegimeKind.G_JOINT_EXTERNAL


@given(st.integers(0, 2**32 - 1), st.sampled_from(["two", "lattice", "continuous"]))
@settings(max_examples=20, deadline=None)
def test_never_g_without_covariates(seed, shape):
    r = np.random.default_rng(seed)
    n = 60
    if shape == "two":
        p = r.integers(0, 2, n).astype(float)
    elif shape == "lattice":
        p = r.integers(0, 11, n) / 10
    else:
        p = r.random(n)
    obs = ObservationSet(r.random(n) + 1, p, r.random(n) + 0.1, r.random(n) * 3)
    try:
        c = classify_regime(obs, n_bootstrap=20, seed=seed)
    except DataError:
        return
    assert c.kind is not RegimeKind.G_JOINT_EXTERNAL
    assert "G" not in c.evidence["votes"]


def test_discrete_without_experience_is_refused():
    obs = observations("C", n=2000)
    bare = ObservationSet(obs.info, obs.precision, obs.time)
    with pytest.raises(DataError, match="experience"):
        classify_regime(bare)


def test_bootstrap_is_seed_deterministic():
    obs = observations("E", n=2000)
    a = classify_regime(obs, n_bootstrap=50, seed=4)
    b = classify_regime(obs, n_bootstrap=50, seed=4)
    assert a.kind is b.kind and a.confidence == b.confidence and a.evidence == b.evidence


def test_degenerate_precision_is_b():
    n = 100
    obs = ObservationSet(np.linspace(1, 2, n), np.ones(n), np.ones(n))
    c = classify_regime(obs, n_bootstrap=10)
    assert c.kind is RegimeKind.B_DETERMINISTIC and c.confidence == 1.0


def test_two_valued_with_experience_trend_is_not_a():
    r = np.random.default_rng(5)
    n = 2000
    e = np.linspace(1.0, 10.0, n)
    hit = (r.random(n) < e / 10).astype(float)
    obs = ObservationSet(np.full(n, 4.0) + r.random(n), hit, np.ones(n), e)
    c = classify_regime(obs, n_bootstrap=20)
    assert abs(c.evidence["experience_trend_z"]) > 1.96
    assert c.kind is not RegimeKind.A_BERNOULLI
