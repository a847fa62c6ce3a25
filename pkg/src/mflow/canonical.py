"""Reference single-node scenarios, one per regime.

These are the parameter sets used for classifier round trips: simulate a
regime, export its observations, and check the classifier recovers it.
"""

from __future__ import annotations

from .model import (
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
)
from .simulator import Agent, WorkflowGraph, WorkNode

INFO = 4.0
SPREAD = 0.25
SERVICE = TimeModel(TimeKind.EXPONENTIAL_SERVICE, 1.0, 1.0)

_UNIT_UNIFORM = DensitySpec(DensityKind.UNIFORM, (0.0, 1.0))

# regime -> (regime spec, agent experience)
CANONICAL = {
    RegimeKind.A_BERNOULLI: (RegimeSpec(RegimeKind.A_BERNOULLI, 0.3, SERVICE), INFO),
    RegimeKind.B_DETERMINISTIC: (
        RegimeSpec(RegimeKind.B_DETERMINISTIC, 1.0, SERVICE, table=JointTable((((0,), 1.0),))),
        INFO,
    ),
    RegimeKind.C_DISCRETE_DECREASING: (RegimeSpec(RegimeKind.C_DISCRETE_DECREASING, 0.5, SERVICE), 2.0 * INFO),
    RegimeKind.D_DISCRETE_INCREASING: (RegimeSpec(RegimeKind.D_DISCRETE_INCREASING, 0.6, SERVICE), 0.5 * INFO),
    RegimeKind.E_CONTINUOUS_DECREASING: (
        RegimeSpec(
            RegimeKind.E_CONTINUOUS_DECREASING,
            0.5,
            SERVICE,
            density=DensitySpec(DensityKind.TRIANGULAR_DECREASING, (0.0, 1.0)),
            lower=0.0,
            upper=0.5,
        ),
        INFO,
    ),
    RegimeKind.F_CONTINUOUS_INCREASING: (
        RegimeSpec(
            RegimeKind.F_CONTINUOUS_INCREASING,
            0.5,
            SERVICE,
            cdf_points=((0.0, 0.0), (1.0, 1.0)),
            at=0.5,
            rate=0.5,
        ),
        INFO,
    ),
    RegimeKind.G_JOINT_EXTERNAL: (RegimeSpec(RegimeKind.G_JOINT_EXTERNAL, 0.5, SERVICE), INFO),
}

CANONICAL_EXTERNAL = ExternalSource((_UNIT_UNIFORM, _UNIT_UNIFORM), ((0.0, 0.5), (0.0, 0.5)))


def canonical_workflow(kind: RegimeKind, gain: float = 0.1) -> tuple:
    """Single-node graph and agent assignment for ``kind``."""
    kind = RegimeKind.parse(kind)
    spec, experience = CANONICAL[kind]
    external = CANONICAL_EXTERNAL if kind is RegimeKind.G_JOINT_EXTERNAL else None
    node = WorkNode("step", InfoSource(INFO, spread=SPREAD), spec, external)
    agent = Agent("agent", Experience(experience), gain)
    return WorkflowGraph((node,)), {"step": agent}
