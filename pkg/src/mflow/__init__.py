"""Stochastic workflow-productivity simulation and regime classification.

An event succeeds with probability ``Prob(experience) * Prob(processing | information)``.
Seven regimes (A to G) describe how that processing probability behaves as
experience and information vary; :mod:`mflow.simulator` runs workflows made
of such events and :mod:`mflow.classifier` recovers the regime from data.
"""

from .classifier import (
    Classification,
    Dominance,
    DominanceResult,
    EmpiricalCdf,
    ObservationSet,
    classify_regime,
    detect_support,
    dominance_test,
)
from .errors import (
    DataError,
    DomainError,
    ExtrapolationError,
    GraphError,
    InsufficientDataError,
    MflowError,
    NormalizationError,
    NumericError,
    RegimeMismatchError,
    ScenarioError,
    TrialAbort,
    UnknownNodeError,
)
from .learning import WeightLadder, interpolate, pattern_response, update_experience
from .metrics import (
    Histogram,
    binary_entropy,
    entropy_trajectory,
    flow_regularity,
    freedman_diaconis,
    saturation_flag,
    shannon_entropy,
)
from .model import (
    DensityKind,
    DensitySpec,
    EventOutcome,
    Experience,
    ExternalSource,
    InfoSource,
    JointTable,
    RegimeKind,
    RegimeSpec,
    SupportKind,
    TimeKind,
    TimeModel,
    event_probability,
    experience_ratio,
)
from .regimes import (
    MDistribution,
    SupportDescription,
    build_distribution,
    eval_bernoulli,
    eval_continuous_decreasing,
    eval_continuous_increasing,
    eval_deterministic,
    eval_joint_external,
    eval_monotone,
    tilt_precision,
)
from .scenario import Scenario, emit_scenario, parse_scenario
from .simulator import (
    Agent,
    SimReport,
    TrialRecord,
    WorkflowGraph,
    WorkNode,
    dwelling_time_distribution,
    run_monte_carlo,
    run_trial,
    validate_graph,
)

empirical_cdf = EmpiricalCdf

__version__ = "0.1.0"
