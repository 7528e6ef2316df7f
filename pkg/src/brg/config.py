"""Declarative experiment configurations and their validation.

Ten experiments (E1..E10) ship with baked-in defaults; a YAML config file
can override any field per experiment or globally.  Configurations are
plain frozen dataclasses so they hash and pickle cleanly; ``config_hash``
gives the provenance fingerprint used in result summaries.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, replace

import yaml

from .governance import SentinelConfig
from .reservoir import HabituationConfig

__all__ = [
    "ReservoirSettings",
    "TrainingSettings",
    "ExperimentConfig",
    "ConfigError",
    "EXPERIMENT_IDS",
    "EXPERIMENT_TITLES",
    "default_config",
    "load_overrides",
    "apply_overrides",
    "validate_config",
    "config_hash",
]


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the violation."""


@dataclass(frozen=True)
class ReservoirSettings:
    d: int = 30
    spectral_radius: float = 0.9
    input_scale: float = 0.5
    bias_scale: float = 0.1
    sigma_xi: float = 0.15


@dataclass(frozen=True)
class TrainingSettings:
    coop_target: float = 0.95
    defect_target: float = 0.05
    n_per_class: int = 2000
    burn_in: int = 500
    ridge_lambda: float = 0.001
    # Dimension sweeps rescale the penalty as ridge_lambda * d / reference_d.
    scale_ridge_with_d: bool = True
    reference_d: int = 30


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str
    title: str
    schedule: str
    rounds: int
    burn_in: int
    seeds: tuple[int, ...]
    master_seed: int = 0
    reservoir: ReservoirSettings = ReservoirSettings()
    training: TrainingSettings = TrainingSettings()
    habituation: HabituationConfig = HabituationConfig()
    sentinel: SentinelConfig = SentinelConfig()
    agents: tuple[str, ...] = ()
    alphas: tuple[float, ...] = ()
    h_values: tuple[int, ...] = ()
    lambdas: tuple[float, ...] = ()
    d_values: tuple[int, ...] = ()
    block_lengths: tuple[int, ...] = ()
    ema_gammas: tuple[float, ...] = ()
    sweeps: tuple[tuple[str, tuple[float, ...]], ...] = ()
    reg_modes: tuple[str, ...] = ("scaled",)
    measure_every: int = 15
    kl_k: int = 5
    state_cap: int = 2000
    deterministic: bool = False
    # Secondary schedule for experiments that pair a stationary run with a
    # perturbation run (E10).
    perturbation_schedule: str = ""


EXPERIMENT_IDS = ("E1", "E2", "E3", "E4", "E5", "E6", "E7", "E8", "E9", "E10")

EXPERIMENT_TITLES = {
    "E1": "Self-consistent convergence under full body governance",
    "E2": "Complexity cost and variance landscape across receptivity",
    "E3": "Perturbation response of the governance modes",
    "E4": "Habituation dynamics under a noisy cooperative opponent",
    "E5": "Free energy landscape over receptivity and habituation depth",
    "E6": "Dynamic sentinel against a multi-phase opponent",
    "E7": "Sentinel parameter sensitivity",
    "E8": "Reservoir dimension sweep",
    "E9": "Dimension versus environment-timescale phase diagram",
    "E10": "Smoothed tit-for-tat baselines versus the reservoir",
}

EXPERIMENT_DESCRIPTIONS = {
    "E1": "Closed-loop body output converging to its self-consistent value against a cooperative opponent.",
    "E2": "Receptivity sweep recording state-space KL cost, action variance, and mean payoff under opponent noise.",
    "E3": "Static mixtures, the sentinel, and unconditional cooperation facing a sustained defection block.",
    "E4": "Noise resilience measured on frozen snapshots at regular intervals during slow reservoir adaptation.",
    "E5": "Free energy minimisation over the receptivity grid at several habituation depths and metabolic costs.",
    "E6": "Sentinel detection, retaliation, and recovery on a cooperation/defection/noise schedule, with payoffs.",
    "E7": "One-at-a-time sweeps of the four sentinel policy parameters under opponent noise.",
    "E8": "Smoothing, complexity cost, and optimal receptivity as the reservoir dimension grows.",
    "E9": "Sentinel payoff advantage over tit-for-tat across reservoir dimension and defection block length.",
    "E10": "Exponentially smoothed tit-for-tat at several horizons compared with full body governance.",
}

_DEFAULT_SEEDS = tuple(range(20))
_ALPHA_GRID = tuple(round(0.1 * i, 1) for i in range(11))


def default_config(experiment_id: str) -> ExperimentConfig:
    """Built-in configuration for one experiment."""
    eid = experiment_id.upper()
    if eid not in EXPERIMENT_IDS:
        raise ConfigError(f"unknown experiment id {experiment_id!r}; expected one of {EXPERIMENT_IDS}")
    base = dict(
        experiment_id=eid,
        title=EXPERIMENT_TITLES[eid],
        seeds=_DEFAULT_SEEDS,
    )
    if eid == "E1":
        return ExperimentConfig(schedule="coop:200", rounds=200, burn_in=0, **base)
    if eid == "E2":
        return ExperimentConfig(
            schedule="noisy(0.1):2500", rounds=2500, burn_in=500, alphas=_ALPHA_GRID, **base
        )
    if eid == "E3":
        return ExperimentConfig(
            schedule="coop:200,defect:100,coop:200",
            rounds=500,
            burn_in=0,
            agents=("static:0", "static:0.5", "static:1", "sentinel", "allc"),
            **base,
        )
    if eid == "E4":
        return ExperimentConfig(
            schedule="noisy(0.1):2500",
            rounds=2500,
            burn_in=500,
            agents=("static:0", "static:0.5", "static:1", "sentinel"),
            h_values=tuple(range(0, 301, 15)),
            measure_every=15,
            **base,
        )
    if eid == "E5":
        return ExperimentConfig(
            schedule="noisy(0.1):2500",
            rounds=2500,
            burn_in=500,
            alphas=_ALPHA_GRID,
            h_values=(0, 10, 25, 50, 100, 200),
            lambdas=(1.0, 3.0, 8.0),
            **base,
        )
    if eid == "E6":
        return ExperimentConfig(
            schedule="coop:500,defect:50,coop:500,noisy(0.3):200,coop:500",
            rounds=1750,
            burn_in=0,
            agents=("sentinel", "static:0", "static:0.7", "static:0.85", "static:1"),
            **base,
        )
    if eid == "E7":
        return ExperimentConfig(
            schedule="noisy(0.1):2500",
            rounds=2500,
            burn_in=500,
            sweeps=(
                ("alpha0", (0.6, 0.7, 0.8, 0.85, 0.9, 0.95)),
                ("eta_up", (0.01, 0.02, 0.05, 0.1, 0.2)),
                ("eta_down", (0.1, 0.3, 0.5, 0.8, 1.0)),
                ("theta", (0.0, 0.05, 0.1, 0.2, 0.3)),
            ),
            **base,
        )
    if eid == "E8":
        return ExperimentConfig(
            schedule="noisy(0.1):2500",
            rounds=2500,
            burn_in=500,
            alphas=_ALPHA_GRID,
            d_values=(5, 10, 15, 20, 30, 50, 75, 100),
            lambdas=(3.0,),
            reg_modes=("scaled", "fixed"),
            **base,
        )
    if eid == "E9":
        return ExperimentConfig(
            schedule="coop:500,defect:{L},coop:500",
            rounds=0,  # derived from the block length per cell
            burn_in=0,
            d_values=(5, 10, 20, 30, 50, 75),
            block_lengths=(10, 50, 100, 200, 500),
            agents=("sentinel", "static:0"),
            **base,
        )
    return ExperimentConfig(  # E10
        schedule="noisy(0.1):2500",
        rounds=2500,
        burn_in=500,
        ema_gammas=(0.0, 0.5, 0.9, 0.95, 0.99),
        agents=("reservoir",),
        perturbation_schedule="coop:200,defect:100,coop:200",
        **base,
    )


_SECTION_TYPES = {
    "reservoir": ReservoirSettings,
    "training": TrainingSettings,
    "habituation": HabituationConfig,
    "sentinel": SentinelConfig,
}

_TUPLE_FIELDS = {
    "seeds",
    "agents",
    "alphas",
    "h_values",
    "lambdas",
    "d_values",
    "block_lengths",
    "ema_gammas",
    "reg_modes",
}


def load_overrides(path: str) -> dict:
    """Load a YAML override file.

    Layout: top-level ``defaults`` mapping applied to every experiment plus
    per-experiment mappings keyed by id (E1..E10).  See the annotated
    example shipped in configs/example.yaml.
    """
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a mapping, got {type(data).__name__}")
    known = {"defaults", *EXPERIMENT_IDS}
    unknown = set(map(str, data)) - known
    if unknown:
        raise ConfigError(f"config file {path} has unknown top-level keys {sorted(unknown)}")
    return data


def apply_overrides(config: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    """Apply a file-level override mapping to one experiment configuration."""
    merged: dict = {}
    for section in ("defaults", config.experiment_id):
        block = overrides.get(section) or {}
        if not isinstance(block, dict):
            raise ConfigError(f"override section {section!r} must be a mapping")
        for key, value in block.items():
            if key in _SECTION_TYPES:
                merged.setdefault(key, {}).update(value or {})
            else:
                merged[key] = value
    updates: dict = {}
    for key, value in merged.items():
        if key in _SECTION_TYPES:
            current = getattr(config, key)
            valid = {f.name for f in dataclasses.fields(current)}
            bad = set(value) - valid
            if bad:
                raise ConfigError(f"unknown {key} fields {sorted(bad)}")
            try:
                updates[key] = replace(current, **value)
            except ValueError as exc:
                raise ConfigError(f"invalid {key} override: {exc}") from exc
        elif key == "sweeps":
            updates[key] = tuple((str(name), tuple(vals)) for name, vals in value)
        elif key in _TUPLE_FIELDS:
            updates[key] = tuple(value)
        elif any(f.name == key for f in dataclasses.fields(ExperimentConfig)):
            updates[key] = value
        else:
            raise ConfigError(f"unknown configuration field {key!r}")
    try:
        return replace(config, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid override for {config.experiment_id}: {exc}") from exc


def validate_config(config: ExperimentConfig) -> None:
    """Raise ConfigError naming the first violated invariant."""
    from .game import parse_schedule  # local import to avoid a cycle

    eid = config.experiment_id
    if eid not in EXPERIMENT_IDS:
        raise ConfigError(f"unknown experiment id {eid!r}")
    if not config.seeds:
        raise ConfigError("seeds must be nonempty")
    if len(set(config.seeds)) != len(config.seeds):
        raise ConfigError("seeds must be distinct")
    # Section dataclasses validate themselves at construction; re-run the
    # checks here so hand-built configs with bad sections fail loudly too.
    for section, cls in _SECTION_TYPES.items():
        value = getattr(config, section)
        replace(value)  # re-triggers __post_init__
        if not isinstance(value, cls):
            raise ConfigError(f"{section} must be a {cls.__name__}")
    if "{L}" not in config.schedule:
        schedule = parse_schedule(config.schedule)
        if config.rounds < 1:
            raise ConfigError("rounds must be positive")
        if config.rounds > schedule.total_rounds:
            raise ConfigError(
                f"rounds={config.rounds} exceeds schedule length {schedule.total_rounds}"
            )
        if not (0 <= config.burn_in < config.rounds):
            raise ConfigError(f"burn_in must lie in [0, rounds), got {config.burn_in}")
    elif not config.block_lengths:
        raise ConfigError("templated schedule requires block_lengths")
    if config.perturbation_schedule:
        pert = parse_schedule(config.perturbation_schedule)
        if not any(p.kind == "defect" for p in pert.phases):
            raise ConfigError("perturbation_schedule must contain a defection phase")
    grid_demands = {
        "E2": ("alphas",),
        "E3": ("agents",),
        "E4": ("agents", "h_values"),
        "E5": ("alphas", "h_values", "lambdas"),
        "E6": ("agents",),
        "E7": ("sweeps",),
        "E8": ("alphas", "d_values", "lambdas", "reg_modes"),
        "E9": ("d_values", "block_lengths"),
        "E10": ("ema_gammas", "perturbation_schedule"),
    }
    for name in grid_demands.get(eid, ()):
        if not getattr(config, name):
            raise ConfigError(f"{eid} requires a nonempty {name}")
    for alpha in config.alphas:
        if not (0.0 <= alpha <= 1.0):
            raise ConfigError(f"alpha grid values must lie in [0, 1], got {alpha}")
    for h in config.h_values:
        if h < 0:
            raise ConfigError(f"habituation depths must be nonnegative, got {h}")
    for dv in config.d_values:
        if dv < 1:
            raise ConfigError(f"reservoir dimensions must be positive, got {dv}")
    for mode in config.reg_modes:
        if mode not in ("scaled", "fixed"):
            raise ConfigError(f"reg_modes entries must be 'scaled' or 'fixed', got {mode!r}")
    for gamma in config.ema_gammas:
        if not (0.0 <= gamma < 1.0):
            raise ConfigError(f"ema gammas must lie in [0, 1), got {gamma}")
    for label in config.agents:
        parse_agent_label(label, config.sentinel)
    sentinel_fields = {f.name for f in dataclasses.fields(SentinelConfig)}
    for name, values in config.sweeps:
        if name not in sentinel_fields:
            raise ConfigError(f"sweep parameter {name!r} is not a sentinel field")
        if not values:
            raise ConfigError(f"sweep {name!r} has no values")


def parse_agent_label(label: str, sentinel: SentinelConfig):
    """Resolve an agent label into (governance, strategy, gamma).

    Grammar: ``sentinel`` | ``allc`` | ``reservoir`` (static alpha 1) |
    ``static:<alpha>`` | ``ema:<gamma>`` (static alpha 0 with a smoothed
    copy strategy).  ``static:0`` is plain tit-for-tat.
    """
    from .governance import DynamicSentinel, StaticAlpha

    if label == "sentinel":
        return DynamicSentinel(sentinel), "tft", 0.0
    if label == "allc":
        return StaticAlpha(0.0), "allc", 0.0
    if label == "reservoir":
        return StaticAlpha(1.0), "tft", 0.0
    if label.startswith("static:"):
        try:
            alpha = float(label.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad static agent label {label!r}") from exc
        if not (0.0 <= alpha <= 1.0):
            raise ConfigError(f"static alpha must lie in [0, 1], got {label!r}")
        return StaticAlpha(alpha), "tft", 0.0
    if label.startswith("ema:"):
        try:
            gamma = float(label.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad ema agent label {label!r}") from exc
        if not (0.0 <= gamma < 1.0):
            raise ConfigError(f"ema gamma must lie in [0, 1), got {label!r}")
        return StaticAlpha(0.0), "ema", gamma
    raise ConfigError(f"unknown agent label {label!r}")


def config_hash(config: ExperimentConfig) -> str:
    """Stable fingerprint of a configuration (sha256 of canonical JSON)."""
    payload = json.dumps(dataclasses.asdict(config), sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
