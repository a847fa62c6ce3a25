"""Scenario files: a versioned YAML description of a workflow run.

Layout (``spec_version: 1``)::

    spec_version: 1
    n_trials: 1000            # default 1000
    master_seed: 0
    reset_experience: true    # false = learning mode
    workers: 1
    arrival_rate: null        # optional; instances run back to back otherwise
    output_dir: out
    agents:
      - {id: analyst, experience: 8.0, gain: 0.1}
    nodes:
      - id: review
        agent: analyst
        precision_target: 0.5
        info: {magnitude: 4.0, support: discrete, dimension: 1, spread: 0.25}
        regime:
          kind: C
          base_precision: 0.5
          time: {kind: exponential, base_time: 1.0, param: 1.0}
    edges: [[review, sign_off]]

Regime-specific keys: ``table`` (list of ``{index, prob}``) and
``success_index`` for B; ``density`` (``{kind, params, table}``), ``lower``
and ``upper`` for E; ``cdf_points``, ``at`` and ``rate`` for F. Nodes in
regime G carry ``external: {dimensions: [{density, bounds}, ...]}``.

Every validation failure is reported as a :class:`ScenarioError` whose
``path`` names the offending key, e.g. ``nodes[2].regime.base_precision``.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import yaml

from .errors import MflowError, ScenarioError
from .model import (
    DensityKind,
    DensitySpec,
    Experience,
    ExternalSource,
    InfoSource,
    JointTable,
    RegimeKind,
    RegimeSpec,
    SupportKind,
    TimeKind,
    TimeModel,
)
from .simulator import Agent, WorkflowGraph, WorkNode, validate_graph

log = logging.getLogger(__name__)

SPEC_VERSION = 1
DEFAULT_TRIALS = 1000
_ID = re.compile(r"^[A-Za-z0-9_.-]+$")

_TOP_KEYS = {
    "spec_version", "n_trials", "master_seed", "reset_experience", "workers",
    "arrival_rate", "output_dir", "agents", "nodes", "edges",
}
_AGENT_KEYS = {"id", "experience", "weights", "trials_completed", "gain"}
_NODE_KEYS = {"id", "agent", "precision_target", "info", "regime", "external"}
_INFO_KEYS = {"magnitude", "support", "dimension", "spread"}
_REGIME_KEYS = {
    "kind", "base_precision", "time", "table", "success_index", "density",
    "lower", "upper", "cdf_points", "at", "rate",
}
_TIME_KEYS = {"kind", "base_time", "param"}
_DENSITY_KEYS = {"kind", "params", "table"}
_OUTCOME_KEYS = {"index", "prob"}
_EXTERNAL_KEYS = {"dimensions"}
_DIM_KEYS = {"density", "bounds"}


@dataclass
class Scenario:
    graph: WorkflowGraph
    agents: tuple
    assignment: dict  # node id -> agent id
    n_trials: int = DEFAULT_TRIALS
    master_seed: int = 0
    reset_experience: bool = True
    workers: int = 1
    arrival_rate: Optional[float] = None
    output_dir: Optional[str] = None
    spec_version: int = SPEC_VERSION

    def agent_map(self) -> dict:
        """Node id -> Agent, the form the simulator takes."""
        by_id = {a.id: a for a in self.agents}
        return {nid: by_id[aid] for nid, aid in self.assignment.items()}


# ── reading ─────────────────────────────────────────────────────────────


class _Reader:
    def __init__(self, strict: bool):
        self.strict = strict

    def mapping(self, value, path: str, allowed: set) -> dict:
        if not isinstance(value, dict):
            raise ScenarioError(path, f"expected a mapping, got {type(value).__name__}")
        unknown = sorted(str(k) for k in value if k not in allowed)
        if unknown:
            where = ", ".join(_join(path, k) for k in unknown)
            if self.strict:
                raise ScenarioError(_join(path, unknown[0]), f"unknown key (unknown keys: {where})")
            log.warning("ignoring unknown keys: %s", where)
        return value

    @staticmethod
    def seq(value, path: str) -> list:
        if not isinstance(value, list):
            raise ScenarioError(path, f"expected a list, got {type(value).__name__}")
        return value

    @staticmethod
    def require(m: dict, key: str, path: str):
        if key not in m or m[key] is None:
            raise ScenarioError(_join(path, key), "required key is missing")
        return m[key]

    @staticmethod
    def number(value, path: str) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioError(path, f"expected a number, got {value!r}")
        x = float(value)
        if not math.isfinite(x):
            raise ScenarioError(path, f"{value!r} is not finite")
        return x

    @staticmethod
    def integer(value, path: str, lo: Optional[int] = None) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioError(path, f"expected an integer, got {value!r}")
        if lo is not None and value < lo:
            raise ScenarioError(path, f"{value} must be >= {lo}")
        return value

    def prob(self, value, path: str) -> float:
        x = self.number(value, path)
        if not (0.0 <= x <= 1.0):
            raise ScenarioError(path, f"{value!r} out of [0,1]")
        return x

    def positive(self, value, path: str) -> float:
        x = self.number(value, path)
        if not x > 0:
            raise ScenarioError(path, f"{value!r} must be > 0")
        return x

    def nonneg(self, value, path: str) -> float:
        x = self.number(value, path)
        if x < 0:
            raise ScenarioError(path, f"{value!r} must be >= 0")
        return x

    @staticmethod
    def boolean(value, path: str) -> bool:
        if not isinstance(value, bool):
            raise ScenarioError(path, f"expected true or false, got {value!r}")
        return value

    @staticmethod
    def ident(value, path: str) -> str:
        if not isinstance(value, str) or not _ID.match(value):
            raise ScenarioError(path, f"{value!r} is not a valid id (letters, digits, '_', '.', '-')")
        return value

    @staticmethod
    def enum(cls, value, path: str):
        try:
            return cls.parse(value)
        except (ValueError, TypeError):
            choices = ", ".join(m.value for m in cls)
            raise ScenarioError(path, f"{value!r} is not one of {choices}") from None

    def pairs(self, value, path: str) -> tuple:
        out = []
        for k, item in enumerate(self.seq(value, path)):
            p = f"{path}[{k}]"
            if not isinstance(item, list) or len(item) != 2:
                raise ScenarioError(p, f"expected a pair [x, y], got {item!r}")
            out.append((self.number(item[0], f"{p}[0]"), self.number(item[1], f"{p}[1]")))
        return tuple(out)


def _join(path: str, key) -> str:
    return f"{path}.{key}" if path else str(key)


def _build(path: str, factory, *args, **kwargs):
    """Construct a model object, reporting its validation failure at ``path``."""
    try:
        return factory(*args, **kwargs)
    except (MflowError, ValueError, TypeError) as exc:
        raise ScenarioError(path, str(exc)) from None


def _density(r: _Reader, value, path: str) -> DensitySpec:
    m = r.mapping(value, path, _DENSITY_KEYS)
    kind = r.enum(DensityKind, r.require(m, "kind", path), _join(path, "kind"))
    params = tuple(r.number(x, f"{path}.params[{k}]") for k, x in enumerate(r.seq(m.get("params", []), _join(path, "params"))))
    table = r.pairs(m["table"], _join(path, "table")) if m.get("table") is not None else None
    return _build(path, DensitySpec, kind, params, table)


def _time(r: _Reader, value, path: str) -> TimeModel:
    m = r.mapping(value, path, _TIME_KEYS)
    kind = r.enum(TimeKind, m.get("kind", TimeKind.FIXED.value), _join(path, "kind"))
    base = r.positive(m.get("base_time", 1.0), _join(path, "base_time"))
    param = r.number(m.get("param", 1.0), _join(path, "param"))
    return _build(path, TimeModel, kind, base, param)


def _regime(r: _Reader, value, path: str) -> RegimeSpec:
    m = r.mapping(value, path, _REGIME_KEYS)
    kind = r.enum(RegimeKind, r.require(m, "kind", path), _join(path, "kind"))
    kw: dict[str, Any] = {
        "base_precision": r.prob(m.get("base_precision", 0.5), _join(path, "base_precision")),
        "time_model": _time(r, m.get("time", {}), _join(path, "time")),
    }
    if m.get("table") is not None:
        tpath = _join(path, "table")
        outcomes = []
        for k, item in enumerate(r.seq(m["table"], tpath)):
            ip = f"{tpath}[{k}]"
            om = r.mapping(item, ip, _OUTCOME_KEYS)
            idx = tuple(r.integer(i, f"{ip}.index[{j}]") for j, i in enumerate(r.seq(r.require(om, "index", ip), f"{ip}.index")))
            outcomes.append((idx, r.prob(r.require(om, "prob", ip), f"{ip}.prob")))
        kw["table"] = _build(tpath, JointTable, tuple(outcomes))
    if "success_index" in m:
        kw["success_index"] = r.integer(m["success_index"], _join(path, "success_index"), 0)
    if m.get("density") is not None:
        kw["density"] = _density(r, m["density"], _join(path, "density"))
    for key in ("lower", "upper", "at", "rate"):
        if m.get(key) is not None:
            kw[key] = r.number(m[key], _join(path, key))
    if m.get("cdf_points") is not None:
        kw["cdf_points"] = r.pairs(m["cdf_points"], _join(path, "cdf_points"))
    return _build(path, RegimeSpec, kind, **kw)


def _external(r: _Reader, value, path: str) -> ExternalSource:
    m = r.mapping(value, path, _EXTERNAL_KEYS)
    dpath = _join(path, "dimensions")
    densities, bounds = [], []
    for k, item in enumerate(r.seq(r.require(m, "dimensions", path), dpath)):
        ip = f"{dpath}[{k}]"
        dm = r.mapping(item, ip, _DIM_KEYS)
        densities.append(_density(r, r.require(dm, "density", ip), f"{ip}.density"))
        b = r.seq(r.require(dm, "bounds", ip), f"{ip}.bounds")
        if len(b) != 2:
            raise ScenarioError(f"{ip}.bounds", f"expected [lo, hi], got {b!r}")
        bounds.append((r.number(b[0], f"{ip}.bounds[0]"), r.number(b[1], f"{ip}.bounds[1]")))
    return _build(path, ExternalSource, tuple(densities), tuple(bounds))


def _agent(r: _Reader, value, path: str) -> Agent:
    m = r.mapping(value, path, _AGENT_KEYS)
    aid = r.ident(r.require(m, "id", path), _join(path, "id"))
    magnitude = r.nonneg(r.require(m, "experience", path), _join(path, "experience"))
    weights = tuple(
        r.nonneg(w, f"{path}.weights[{k}]") for k, w in enumerate(r.seq(m.get("weights", []), _join(path, "weights")))
    )
    done = r.integer(m.get("trials_completed", 0), _join(path, "trials_completed"), 0)
    exp = _build(path, Experience, magnitude, weights, done)
    gain = r.positive(m.get("gain", 0.1), _join(path, "gain"))
    return Agent(aid, exp, gain)


def _node(r: _Reader, value, path: str, agent_ids: set) -> tuple:
    m = r.mapping(value, path, _NODE_KEYS)
    nid = r.ident(r.require(m, "id", path), _join(path, "id"))
    aid = r.require(m, "agent", path)
    if aid not in agent_ids:
        raise ScenarioError(_join(path, "agent"), f"agent {aid!r} is not defined under agents")
    ipath = _join(path, "info")
    im = r.mapping(r.require(m, "info", path), ipath, _INFO_KEYS)
    info = _build(
        ipath,
        InfoSource,
        r.nonneg(r.require(im, "magnitude", ipath), _join(ipath, "magnitude")),
        r.enum(SupportKind, im.get("support", SupportKind.DISCRETE.value), _join(ipath, "support")),
        r.integer(im.get("dimension", 1), _join(ipath, "dimension"), 1),
        r.nonneg(im.get("spread", 0.0), _join(ipath, "spread")),
    )
    regime = _regime(r, r.require(m, "regime", path), _join(path, "regime"))
    external = _external(r, m["external"], _join(path, "external")) if m.get("external") is not None else None
    target = r.prob(m.get("precision_target", 0.5), _join(path, "precision_target"))
    is_g = regime.kind is RegimeKind.G_JOINT_EXTERNAL
    if is_g and external is None:
        raise ScenarioError(_join(path, "external"), "regime G needs an external source")
    if external is not None and not is_g:
        raise ScenarioError(_join(path, "external"), f"only regime G takes an external source, not {regime.kind.value}")
    if regime.kind in (RegimeKind.C_DISCRETE_DECREASING, RegimeKind.D_DISCRETE_INCREASING) and info.magnitude <= 0:
        raise ScenarioError(_join(ipath, "magnitude"), f"regime {regime.kind.value} needs information magnitude > 0")
    return WorkNode(nid, info, regime, external, target), aid


def scenario_from_dict(data, strict: bool = True) -> Scenario:
    r = _Reader(strict)
    top = r.mapping(data, "", _TOP_KEYS)
    version = r.require(top, "spec_version", "")
    if version != SPEC_VERSION:
        raise ScenarioError("spec_version", f"unsupported version {version!r} (expected {SPEC_VERSION})")

    agents, seen = [], set()
    for k, item in enumerate(r.seq(r.require(top, "agents", ""), "agents")):
        a = _agent(r, item, f"agents[{k}]")
        if a.id in seen:
            raise ScenarioError(f"agents[{k}].id", f"duplicate agent id {a.id!r}")
        seen.add(a.id)
        agents.append(a)

    nodes, assignment = [], {}
    for k, item in enumerate(r.seq(r.require(top, "nodes", ""), "nodes")):
        node, aid = _node(r, item, f"nodes[{k}]", seen)
        if node.id in assignment:
            raise ScenarioError(f"nodes[{k}].id", f"duplicate node id {node.id!r}")
        nodes.append(node)
        assignment[node.id] = aid
    if not nodes:
        raise ScenarioError("nodes", "at least one node is required")

    edges = []
    for k, item in enumerate(r.seq(top.get("edges") or [], "edges")):
        p = f"edges[{k}]"
        if not isinstance(item, list) or len(item) != 2:
            raise ScenarioError(p, f"expected [from, to], got {item!r}")
        for j, end in enumerate(item):
            if end not in assignment:
                raise ScenarioError(f"{p}[{j}]", f"edge references undefined node {end!r}")
        edges.append((item[0], item[1]))

    graph = WorkflowGraph(tuple(nodes), tuple(edges))
    issues = validate_graph(graph)
    if issues:
        raise ScenarioError("edges", "; ".join(map(str, issues)))

    arrival = top.get("arrival_rate")
    out = top.get("output_dir")
    if out is not None and not isinstance(out, str):
        raise ScenarioError("output_dir", f"expected a path string, got {out!r}")
    return Scenario(
        graph=graph,
        agents=tuple(agents),
        assignment=assignment,
        n_trials=r.integer(top.get("n_trials", DEFAULT_TRIALS), "n_trials", 1),
        master_seed=r.integer(top.get("master_seed", 0), "master_seed", 0),
        reset_experience=r.boolean(top.get("reset_experience", True), "reset_experience"),
        workers=r.integer(top.get("workers", 1), "workers", 1),
        arrival_rate=r.positive(arrival, "arrival_rate") if arrival is not None else None,
        output_dir=out,
        spec_version=version,
    )


def parse_scenario(path, strict: bool = True) -> Scenario:
    """Read and validate a scenario file.

    Raises ``FileNotFoundError`` for a missing file and :class:`ScenarioError`
    for syntax errors (with line and column) and invalid content (with the
    key path).
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark is not None else "unknown position"
        problem = getattr(exc, "problem", None) or str(exc)
        raise ScenarioError("", f"{path}: syntax error at {where}: {problem}") from None
    if data is None:
        raise ScenarioError("", f"{path}: empty scenario file")
    return scenario_from_dict(data, strict)


# ── writing ─────────────────────────────────────────────────────────────


def _density_dict(d: DensitySpec) -> dict:
    out: dict[str, Any] = {"kind": d.kind.value}
    if d.params:
        out["params"] = list(d.params)
    if d.table is not None:
        out["table"] = [list(t) for t in d.table]
    return out


def _regime_dict(spec: RegimeSpec) -> dict:
    tm = spec.time_model
    out: dict[str, Any] = {
        "kind": spec.kind.value,
        "base_precision": spec.base_precision,
        "time": {"kind": tm.kind.value, "base_time": tm.base_time, "param": tm.param},
    }
    if spec.table is not None:
        out["table"] = [{"index": list(idx), "prob": p} for idx, p in spec.table.outcomes]
        out["success_index"] = spec.success_index
    if spec.density is not None:
        out["density"] = _density_dict(spec.density)
    for key in ("lower", "upper", "at", "rate"):
        if getattr(spec, key) is not None:
            out[key] = getattr(spec, key)
    if spec.cdf_points is not None:
        out["cdf_points"] = [list(p) for p in spec.cdf_points]
    return out


def scenario_to_dict(sc: Scenario) -> dict:
    agents = []
    for a in sc.agents:
        entry: dict[str, Any] = {"id": a.id, "experience": a.experience.magnitude, "gain": a.gain}
        if a.experience.weights:
            entry["weights"] = list(a.experience.weights)
        if a.experience.trials_completed:
            entry["trials_completed"] = a.experience.trials_completed
        agents.append(entry)
    nodes = []
    for n in sc.graph.nodes:
        entry = {
            "id": n.id,
            "agent": sc.assignment[n.id],
            "precision_target": n.precision_target,
            "info": {
                "magnitude": n.info.magnitude,
                "support": n.info.support.value,
                "dimension": n.info.dimension,
                "spread": n.info.spread,
            },
            "regime": _regime_dict(n.regime),
        }
        if n.external is not None:
            entry["external"] = {
                "dimensions": [
                    {"density": _density_dict(d), "bounds": list(b)}
                    for d, b in zip(n.external.densities, n.external.bounds)
                ]
            }
        nodes.append(entry)
    out: dict[str, Any] = {
        "spec_version": sc.spec_version,
        "n_trials": sc.n_trials,
        "master_seed": sc.master_seed,
        "reset_experience": sc.reset_experience,
        "workers": sc.workers,
    }
    if sc.arrival_rate is not None:
        out["arrival_rate"] = sc.arrival_rate
    if sc.output_dir is not None:
        out["output_dir"] = sc.output_dir
    out.update(agents=agents, nodes=nodes, edges=[list(e) for e in sc.graph.edges])
    return out


def emit_scenario(sc: Scenario) -> str:
    """YAML text that :func:`parse_scenario` reads back to an equal scenario."""
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False, default_flow_style=None)
