"""Body-reservoir governance for the repeated continuous prisoner's dilemma.

A three-layer agent (echo-state body, tit-for-tat cognitive filter, dynamic
sentinel governor) simulated against scheduled opponents, with analysis of
its closed-loop fixed points, state-space complexity costs, free-energy
tradeoffs, and a seeded experiment harness with CSV/JSON emission.
"""

__version__ = "0.1.0"

from .analysis import (
    FixedPointResult,
    StabilityReport,
    action_variance,
    closed_loop_jacobian,
    detection_time,
    free_energy,
    kl_gaussian,
    kl_knn,
    recovery_time,
    solve_fixed_point,
)
from .config import ExperimentConfig, default_config
from .game import OpponentSchedule, PayoffMatrix, parse_schedule, payoff
from .governance import (
    DynamicSentinel,
    SentinelConfig,
    StaticAlpha,
    discomfort,
    mix,
    sentinel_equilibrium,
    update_alpha,
)
from .reservoir import (
    HabituationConfig,
    ReadoutWeights,
    ReservoirParams,
    build_reservoir,
    habituate,
    readout,
    spectral_radius,
    step,
    train_readout,
)
from .experiments import ExperimentResult, run_experiment, run_simulation
from .simulate import AgentMaterials, AgentSpec, SimulationTrace, build_materials, simulate
from .writers import load_reservoir, save_reservoir, write_results

__all__ = [
    "__version__",
    "AgentMaterials",
    "AgentSpec",
    "DynamicSentinel",
    "ExperimentConfig",
    "ExperimentResult",
    "FixedPointResult",
    "HabituationConfig",
    "OpponentSchedule",
    "PayoffMatrix",
    "ReadoutWeights",
    "ReservoirParams",
    "SentinelConfig",
    "SimulationTrace",
    "StabilityReport",
    "StaticAlpha",
    "action_variance",
    "build_materials",
    "build_reservoir",
    "closed_loop_jacobian",
    "default_config",
    "detection_time",
    "discomfort",
    "free_energy",
    "habituate",
    "kl_gaussian",
    "kl_knn",
    "load_reservoir",
    "mix",
    "parse_schedule",
    "payoff",
    "readout",
    "recovery_time",
    "run_experiment",
    "run_simulation",
    "save_reservoir",
    "sentinel_equilibrium",
    "simulate",
    "solve_fixed_point",
    "spectral_radius",
    "step",
    "train_readout",
    "update_alpha",
    "write_results",
]
