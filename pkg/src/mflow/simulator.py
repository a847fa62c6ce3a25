"""Monte Carlo engine over a workflow DAG.

A trial walks the graph in topological order. At every node the assigned
agent's current experience selects the regime probability, one uniform
decides the precision outcome, another the processing time, and the agent's
experience is updated before the next node. Nodes start once all of their
predecessors have finished and their agent is free.

All randomness comes from :mod:`mflow.rng`: trial ``k`` uses the seed
``mix(master_seed, k)`` and node ``i`` reads fixed slots of that stream. The
same kernel runs vectorised over many trials (i.i.d. mode) or over one trial
at a time (learning mode), and a trial's draws never depend on which worker
ran it.
"""

from __future__ import annotations

import heapq
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from . import rng
from .errors import DataError, GraphError, MflowError, TrialAbort, UnknownNodeError
from .learning import EXPERIENCE_FLOOR, MISS_FACTOR, update_experience
from .metrics import (
    Histogram,
    binary_entropy,
    flow_regularity,
    freedman_diaconis,
    saturation_flag,
)
from .model import (
    EventOutcome,
    Experience,
    ExternalSource,
    InfoSource,
    RegimeKind,
    RegimeSpec,
    TimeKind,
    _check_prob,
)
from .regimes import build_distribution, tilt_precision, _check_monotone_ratio

log = logging.getLogger(__name__)

# resolution of the graded precision value in the discrete regimes C and D
LATTICE_STEPS = 100
# slots per node: precision, time, info jitter, then one per external dimension
_FIXED_SLOTS = 3
_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class WorkNode:
    id: str
    info: InfoSource
    regime: RegimeSpec
    external: Optional[ExternalSource] = None
    precision_target: float = 0.5

    def __post_init__(self):
        _check_prob(self.precision_target, f"{self.id}.precision_target")


@dataclass(frozen=True)
class WorkflowGraph:
    nodes: tuple
    edges: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple((str(a), str(b)) for a, b in self.edges))

    @property
    def node_ids(self) -> tuple:
        return tuple(n.id for n in self.nodes)

    def node(self, node_id: str) -> WorkNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise UnknownNodeError(node_id)


@dataclass(frozen=True)
class Agent:
    id: str
    experience: Experience
    gain: float = 0.1

    def __post_init__(self):
        if not (self.gain > 0):
            raise DataError(f"agent {self.id!r}: gain must be > 0, got {self.gain!r}")


@dataclass(frozen=True)
class Issue:
    kind: str
    message: str

    def __str__(self):
        return f"{self.kind}: {self.message}"


def validate_graph(g: WorkflowGraph) -> list:
    """Structural problems of ``g`` as a list of :class:`Issue`; empty means valid."""
    issues = []
    ids = [n.id for n in g.nodes]
    if not ids:
        issues.append(Issue("empty", "workflow has no nodes"))
    seen = set()
    for nid in ids:
        if nid in seen:
            issues.append(Issue("duplicate-id", f"node id {nid!r} appears more than once"))
        seen.add(nid)
    for a, b in g.edges:
        for end in (a, b):
            if end not in seen:
                issues.append(Issue("dangling-edge", f"edge {a!r} -> {b!r} references unknown node {end!r}"))
    for n in g.nodes:
        is_g = n.regime.kind is RegimeKind.G_JOINT_EXTERNAL
        if is_g and n.external is None:
            issues.append(Issue("external-mismatch", f"node {n.id!r} is regime G but has no external source"))
        if not is_g and n.external is not None:
            issues.append(
                Issue("external-mismatch", f"node {n.id!r} has an external source but regime {n.regime.kind.value}")
            )
        if n.regime.kind in (RegimeKind.C_DISCRETE_DECREASING, RegimeKind.D_DISCRETE_INCREASING):
            if n.info.magnitude <= 0:
                issues.append(Issue("degenerate-info", f"node {n.id!r}: regime {n.regime.kind.value} needs info > 0"))
    if not any(i.kind in ("dangling-edge", "duplicate-id", "empty") for i in issues):
        order = _topological_order(g)
        if order is None:
            issues.append(Issue("cycle", "workflow graph contains a cycle"))
    return issues


def _topological_order(g: WorkflowGraph):
    index = {n.id: i for i, n in enumerate(g.nodes)}
    indeg = [0] * len(g.nodes)
    succ = [[] for _ in g.nodes]
    for a, b in g.edges:
        succ[index[a]].append(index[b])
        indeg[index[b]] += 1
    ready = [i for i, d in enumerate(indeg) if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        i = heapq.heappop(ready)
        order.append(i)
        for j in succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                heapq.heappush(ready, j)
    return order if len(order) == len(g.nodes) else None


@dataclass(frozen=True)
class NodeDraw:
    """Per-node details of one trial beyond the outcome itself."""

    precision_prob: float
    info_magnitude: float
    experience: float
    wait: float
    finish: float
    covariates: tuple = ()


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    outcomes: dict
    total_time: float
    end_to_end_precision: float
    draws: dict = field(default_factory=dict)


@dataclass
class NodeTrace:
    """Per-trial arrays for one node across a run."""

    info: np.ndarray
    experience: np.ndarray
    precision_prob: np.ndarray
    hit: np.ndarray
    value: np.ndarray
    service: np.ndarray
    wait: np.ndarray
    finish: np.ndarray
    covariates: np.ndarray

    @property
    def dwell(self) -> np.ndarray:
        return self.wait + self.service

    @staticmethod
    def concat(parts) -> "NodeTrace":
        return NodeTrace(*(np.concatenate([getattr(p, f) for p in parts]) for f in _TRACE_FIELDS))


_TRACE_FIELDS = ("info", "experience", "precision_prob", "hit", "value", "service", "wait", "finish", "covariates")


@dataclass
class NodeSummary:
    success_rate: float
    stderr: float
    mean_time: float
    mean_dwell: float
    entropy_bits: float
    event_entropy_bits: float
    flow_cv: float
    utilization: float
    saturated: bool
    histogram: Histogram


@dataclass
class SimReport:
    trials: int
    seed: int
    reset_experience: bool
    node_ids: tuple
    regimes: dict
    nodes: dict
    end_to_end_rate: float
    end_to_end_stderr: float
    makespan: np.ndarray
    traces: dict
    arrival_rate: Optional[float] = None

    def node_summary(self, node_id: str) -> NodeSummary:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None


# ── kernel ──────────────────────────────────────────────────────────────


class _Plan:
    """Per-run constants derived from the graph and the agent assignment."""

    def __init__(self, g: WorkflowGraph, agents: Mapping[str, Agent]):
        issues = validate_graph(g)
        if issues:
            raise GraphError(issues)
        missing = [n.id for n in g.nodes if n.id not in agents]
        if missing:
            raise DataError(f"nodes without an assigned agent: {', '.join(missing)}")
        self.graph = g
        self.order = _topological_order(g)
        index = {n.id: i for i, n in enumerate(g.nodes)}
        self.preds = [[] for _ in g.nodes]
        for a, b in g.edges:
            self.preds[index[b]].append(index[a])
        max_dim = max((n.external.dimension for n in g.nodes if n.external is not None), default=0)
        self.stride = _FIXED_SLOTS + max_dim
        self.agent_of = [agents[n.id].id for n in g.nodes]
        self.gain = {}
        for n in g.nodes:
            a = agents[n.id]
            if self.gain.setdefault(a.id, a.gain) != a.gain:
                raise DataError(f"agent {a.id!r} is assigned with two different gains")
        self.const_p = {}
        self.cum_table = {}
        for i, n in enumerate(g.nodes):
            kind = n.regime.kind
            if kind in (RegimeKind.C_DISCRETE_DECREASING, RegimeKind.D_DISCRETE_INCREASING):
                continue
            dist = build_distribution(n.regime, Experience(0.0), n.info, n.external)
            self.const_p[i] = dist.precision_prob
            if kind is RegimeKind.B_DETERMINISTIC:
                self.cum_table[i] = np.cumsum(n.regime.table.probabilities)


def _graded(u, p, target, lattice):
    """Graded precision values whose hit event ``u < p`` means value >= target.

    The value has survival function ``(1 - v) ** k`` with ``k`` chosen so the
    survival at the threshold equals ``p``. With ``lattice`` the value is
    floored to multiples of ``1 / lattice`` and the threshold rounded up to
    that grid.
    """
    p = np.broadcast_to(np.asarray(p, dtype=float), u.shape)
    hit = u < p
    theta = math.ceil(target * lattice - 1e-9) / lattice if lattice else target
    if not (0.0 < theta < 1.0):
        return hit, hit.astype(float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        k = np.log(p) / math.log1p(-theta)
        v = 1.0 - np.power(u, 1.0 / k)
    v = np.where(p >= 1.0, 1.0, np.where(p <= 0.0, 0.0, v))
    v = np.clip(v, 0.0, 1.0)
    if lattice:
        v = np.minimum(np.floor(v * lattice) / lattice, 1.0)
    v = np.where(hit, np.maximum(v, theta), v)
    return hit, v


def _draw_time(tm, u):
    if tm.kind is TimeKind.FIXED:
        return np.full(u.shape, tm.base_time)
    if tm.kind is TimeKind.GEOMETRIC_RETRIES:
        if tm.param >= 1.0:
            return np.full(u.shape, tm.base_time)
        attempts = 1.0 + np.floor(np.log1p(-u) / math.log1p(-tm.param))
        return attempts * tm.base_time
    return np.maximum(-np.log1p(-u) / tm.param, _TINY)


def _kernel(plan: _Plan, exp: dict, seeds: np.ndarray, first_index: int):
    """Run the trials with the given seeds; ``exp`` maps agent id to magnitude arrays and is updated."""
    g = plan.graph
    T = len(seeds)
    finish = [None] * len(g.nodes)
    agent_free = {a: np.zeros(T) for a in exp}
    traces = {}
    for i in plan.order:
        node = g.nodes[i]
        spec = node.regime
        kind = spec.kind
        aid = plan.agent_of[i]
        slot = i * plan.stride

        def u(s):
            return rng.uniform_array(seeds, slot + s)

        if node.info.spread > 0:
            info = node.info.magnitude * (1.0 + node.info.spread * (2.0 * u(2) - 1.0))
        else:
            info = np.full(T, node.info.magnitude)
        e_before = exp[aid].copy()
        u0 = u(0)
        covs = np.empty((T, 0))

        if kind in (RegimeKind.C_DISCRETE_DECREASING, RegimeKind.D_DISCRETE_INCREASING):
            ratio = e_before / info
            try:
                _check_monotone_ratio(kind, ratio)
            except MflowError as err:
                bad = ratio <= 1.0 if kind is RegimeKind.C_DISCRETE_DECREASING else ratio >= 1.0
                k = int(np.argmax(bad))
                raise TrialAbort(
                    f"node {node.id!r}, trial {first_index + k}: {err}", node.id, first_index + k
                ) from err
            p = tilt_precision(spec.base_precision, ratio)
            hit, value = _graded(u0, p, node.precision_target, LATTICE_STEPS)
        elif kind in (RegimeKind.E_CONTINUOUS_DECREASING, RegimeKind.F_CONTINUOUS_INCREASING):
            p = np.full(T, plan.const_p[i])
            hit, value = _graded(u0, p, node.precision_target, None)
        elif kind is RegimeKind.A_BERNOULLI:
            p = np.full(T, plan.const_p[i])
            hit = u0 < p
            value = hit.astype(float)
        elif kind is RegimeKind.B_DETERMINISTIC:
            p = np.full(T, plan.const_p[i])
            cum = plan.cum_table[i]
            outcome = np.minimum(np.searchsorted(cum, u0, side="right"), len(cum) - 1)
            hit = outcome == spec.success_index
            value = hit.astype(float)
        else:
            p = np.full(T, plan.const_p[i])
            src = node.external
            covs = np.empty((T, src.dimension))
            inside = np.ones((T, src.dimension), dtype=bool)
            for d, (dens, (a, b)) in enumerate(zip(src.densities, src.bounds)):
                covs[:, d] = dens.ppf(u(_FIXED_SLOTS + d))
                inside[:, d] = (covs[:, d] >= a) & (covs[:, d] <= b)
            hit = inside.all(axis=1)
            value = inside.mean(axis=1)

        service = _draw_time(spec.time_model, u(1))
        if plan.preds[i]:
            ready = np.max(np.vstack([finish[j] for j in plan.preds[i]]), axis=0)
        else:
            ready = np.zeros(T)
        start = np.maximum(ready, agent_free[aid])
        fin = start + service
        finish[i] = fin
        agent_free[aid] = fin

        gain = plan.gain[aid]
        prev = np.where(e_before > 0, e_before, EXPERIENCE_FLOOR)
        inc = gain * prev
        inc = np.where(hit, inc, inc * MISS_FACTOR)
        exp[aid] = prev + inc

        traces[node.id] = NodeTrace(
            info=info,
            experience=e_before,
            precision_prob=np.asarray(p, dtype=float),
            hit=hit,
            value=value,
            service=service,
            wait=start - ready,
            finish=fin,
            covariates=covs,
        )
    makespan = np.max(np.vstack(finish), axis=0)
    return traces, makespan


def _agent_arrays(agents: Mapping[str, Agent], T: int) -> dict:
    out = {}
    for a in agents.values():
        out.setdefault(a.id, np.full(T, float(a.experience.magnitude)))
    return out


def run_trial(
    g: WorkflowGraph, agents: Mapping[str, Agent], trial_seed: int, trial_index: int = 0
) -> tuple:
    """One realisation of the workflow.

    ``agents`` maps node id to the agent working it; nodes may share an agent.
    Returns the :class:`TrialRecord` and the same mapping with every agent's
    experience updated by the outcomes of its nodes.
    """
    return _run_trial(_Plan(g, agents), agents, trial_seed, trial_index)


def _run_trial(plan: _Plan, agents: Mapping[str, Agent], trial_seed: int, trial_index: int) -> tuple:
    g = plan.graph
    exp = _agent_arrays(agents, 1)
    traces, makespan = _kernel(plan, exp, np.array([trial_seed & rng.MASK64], dtype=np.uint64), trial_index)
    outcomes = {}
    draws = {}
    by_agent = {}
    for a in agents.values():
        by_agent.setdefault(a.id, a)
    for i in plan.order:
        node = g.nodes[i]
        tr = traces[node.id]
        out = EventOutcome(
            bool(tr.hit[0]), float(tr.value[0]), float(tr.service[0]), node.regime.kind, node.precision_target
        )
        outcomes[node.id] = out
        draws[node.id] = NodeDraw(
            float(tr.precision_prob[0]),
            float(tr.info[0]),
            float(tr.experience[0]),
            float(tr.wait[0]),
            float(tr.finish[0]),
            tuple(float(c) for c in tr.covariates[0]),
        )
        agent = by_agent[plan.agent_of[i]]
        by_agent[agent.id] = Agent(agent.id, update_experience(agent.experience, out, agent.gain), agent.gain)
    e2e = 1.0 if all(o.precision_hit for o in outcomes.values()) else 0.0
    record = TrialRecord(trial_index, outcomes, float(makespan[0]), e2e, draws)
    updated = {nid: by_agent[a.id] for nid, a in agents.items()}
    return record, updated


def trial_seeds(master_seed: int, start: int, stop: int) -> np.ndarray:
    return rng.mix_array(master_seed, np.arange(start, stop, dtype=np.uint64))


def run_monte_carlo(
    g: WorkflowGraph,
    agents: Mapping[str, Agent],
    n_trials: int,
    master_seed: int,
    reset_experience: bool = True,
    workers: int = 1,
    arrival_rate: Optional[float] = None,
) -> SimReport:
    """Ensemble of ``n_trials`` trials.

    With ``reset_experience`` every trial starts from the given agents
    (independent, identically distributed trials) and the trials may be split
    across ``workers`` threads. Otherwise experience carries over from trial
    to trial and execution is sequential regardless of ``workers``.
    ``arrival_rate`` spaces workflow instances for the flow and utilization
    metrics; by default instances run back to back.
    """
    if int(n_trials) != n_trials or n_trials < 1:
        raise DataError(f"n_trials must be a positive integer, got {n_trials!r}")
    if workers < 1:
        raise DataError(f"workers must be >= 1, got {workers!r}")
    if arrival_rate is not None and not (arrival_rate > 0):
        raise DataError(f"arrival_rate must be > 0, got {arrival_rate!r}")
    master_seed = int(master_seed) & rng.MASK64
    plan = _Plan(g, agents)

    if reset_experience:
        bounds = np.linspace(0, n_trials, min(workers, n_trials) + 1).astype(int)
        chunks = [(int(a), int(b)) for a, b in zip(bounds, bounds[1:]) if b > a]

        def work(chunk):
            a, b = chunk
            return _kernel(plan, _agent_arrays(agents, b - a), trial_seeds(master_seed, a, b), a)

        if len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
                parts = list(pool.map(work, chunks))
        else:
            parts = [work(c) for c in chunks]
        traces = {nid: NodeTrace.concat([p[0][nid] for p in parts]) for nid in g.node_ids}
        makespan = np.concatenate([p[1] for p in parts])
    else:
        if workers > 1:
            log.warning("learning mode runs trials sequentially; ignoring workers=%d", workers)
        # same arithmetic as chaining run_trial, without rebuilding weight ladders
        exp = _agent_arrays(agents, 1)
        parts = []
        for k in range(n_trials):
            seed = np.array([rng.mix(master_seed, k)], dtype=np.uint64)
            parts.append(_kernel(plan, exp, seed, k))
        traces = {nid: NodeTrace.concat([p[0][nid] for p in parts]) for nid in g.node_ids}
        makespan = np.concatenate([p[1] for p in parts])

    return _aggregate(g, traces, makespan, n_trials, master_seed, reset_experience, arrival_rate)


def release_times(makespan: np.ndarray, arrival_rate: Optional[float] = None) -> np.ndarray:
    """Start time of each workflow instance on a shared clock.

    Instances run one after another; with an ``arrival_rate`` instance ``k``
    also waits for its arrival at ``k / arrival_rate``.
    """
    done_before = np.concatenate(([0.0], np.cumsum(makespan)[:-1]))
    if arrival_rate is None:
        return done_before
    arrivals = np.arange(len(makespan)) / arrival_rate
    return done_before + np.maximum.accumulate(arrivals - done_before)


def _aggregate(g, traces, makespan, n, seed, reset, arrival_rate) -> SimReport:
    release = release_times(makespan, arrival_rate)
    span = math.fsum(makespan.tolist()) if arrival_rate is None else None
    summaries = {}
    for nid in g.node_ids:
        tr = traces[nid]
        rate = float(tr.hit.mean())
        stderr = math.sqrt(rate * (1.0 - rate) / n)
        total_service = math.fsum(tr.service.tolist())
        if arrival_rate is None:
            utilization, saturated = saturation_flag(total_service / span, 1.0)
        else:
            utilization, saturated = saturation_flag(arrival_rate, n / total_service)
        try:
            cv = flow_regularity(release + tr.finish)
        except MflowError:
            cv = float("nan")
        summaries[nid] = NodeSummary(
            success_rate=rate,
            stderr=stderr,
            mean_time=float(tr.service.mean()),
            mean_dwell=float(tr.dwell.mean()),
            entropy_bits=float(binary_entropy(rate)),
            event_entropy_bits=float(np.mean(binary_entropy(tr.precision_prob))),
            flow_cv=cv,
            utilization=float(utilization),
            saturated=bool(saturated),
            histogram=freedman_diaconis(tr.dwell),
        )
    all_hit = np.logical_and.reduce([traces[nid].hit for nid in g.node_ids])
    e2e = float(all_hit.mean())
    return SimReport(
        trials=n,
        seed=seed,
        reset_experience=reset,
        node_ids=g.node_ids,
        regimes={n_.id: n_.regime.kind.value for n_ in g.nodes},
        nodes=summaries,
        end_to_end_rate=e2e,
        end_to_end_stderr=math.sqrt(e2e * (1.0 - e2e) / n),
        makespan=makespan,
        traces=traces,
        arrival_rate=arrival_rate,
    )


def dwelling_time_distribution(report: SimReport, node: str) -> Histogram:
    """Freedman-Diaconis histogram of a node's wait-plus-service times."""
    return report.node_summary(node).histogram
