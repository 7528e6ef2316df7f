"""Metacognitive governance: output mixture and the dynamic sentinel.

The agent's action is a convex mixture of body and cognitive outputs,
weighted by the receptivity alpha.  The dynamic sentinel adapts alpha from
a composite bodily discomfort signal: deviation of the reservoir state and
body output from slowly tracked baselines, plus disagreement between body
and cognition.  Recovery toward the trust baseline is slow, intervention on
discomfort is sharp.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "SentinelConfig",
    "SentinelState",
    "DiscomfortComponents",
    "StaticAlpha",
    "DynamicSentinel",
    "GovernanceMode",
    "mix",
    "discomfort",
    "update_alpha",
    "sentinel_equilibrium",
    "update_baselines",
]


@dataclass(frozen=True)
class SentinelConfig:
    """Sentinel policy parameters.

    ``alpha0`` is the trust baseline, ``alpha_min`` the receptivity floor,
    ``eta_up`` the slow recovery rate, ``eta_down`` the sharp intervention
    rate, ``theta`` the discomfort threshold.  The three discomfort weights
    must sum to one.  ``gamma_ema`` sets how fast the comfort baselines
    track the running state and output.
    """

    alpha0: float = 0.85
    alpha_min: float = 0.05
    eta_up: float = 0.05
    eta_down: float = 0.5
    theta: float = 0.1
    w_state: float = 0.3
    w_output: float = 0.3
    w_disagree: float = 0.4
    gamma_ema: float = 0.02

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha0 <= 1.0):
            raise ValueError(f"alpha0 must lie in (0, 1], got {self.alpha0}")
        if not (0.0 < self.alpha_min < self.alpha0):
            raise ValueError(
                f"alpha_min must lie in (0, alpha0), got {self.alpha_min} vs alpha0={self.alpha0}"
            )
        if self.eta_up <= 0 or self.eta_down <= 0:
            raise ValueError("eta_up and eta_down must be positive")
        if self.theta < 0:
            raise ValueError(f"theta must be nonnegative, got {self.theta}")
        weights = (self.w_state, self.w_output, self.w_disagree)
        if any(w < 0 for w in weights):
            raise ValueError(f"discomfort weights must be nonnegative, got {weights}")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError(f"discomfort weights must sum to 1, got {sum(weights)}")
        if not (0.0 < self.gamma_ema < 1.0):
            raise ValueError(f"gamma_ema must lie in (0, 1), got {self.gamma_ema}")


@dataclass(frozen=True)
class DiscomfortComponents:
    state: float
    output: float
    disagree: float


@dataclass(frozen=True)
class SentinelState:
    """Receptivity plus the tracked comfort baselines."""

    alpha: float
    x_bar: np.ndarray
    a_bar: float
    last_discomfort: float = 0.0
    last_components: DiscomfortComponents = DiscomfortComponents(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class StaticAlpha:
    """Fixed receptivity; discomfort is still recorded for diagnostics."""

    alpha: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"static alpha must lie in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class DynamicSentinel:
    config: SentinelConfig = SentinelConfig()


GovernanceMode = StaticAlpha | DynamicSentinel


def mix(alpha: float, a_body: float, a_cog: float) -> float:
    """Convex combination alpha * a_body + (1 - alpha) * a_cog."""
    return alpha * a_body + (1.0 - alpha) * a_cog


def discomfort(
    x: np.ndarray,
    x_bar: np.ndarray,
    a_body: float,
    a_bar: float,
    a_cog: float,
    config: SentinelConfig,
) -> tuple[float, DiscomfortComponents]:
    """Composite discomfort and its three components.

    State deviation is the Euclidean distance to the baseline divided by
    sqrt(d); output deviation and body-cognition disagreement are absolute
    differences of scalars.
    """
    d_state = float(np.linalg.norm(x - x_bar)) / math.sqrt(x.size)
    d_output = abs(a_body - a_bar)
    d_disagree = abs(a_body - a_cog)
    total = config.w_state * d_state + config.w_output * d_output + config.w_disagree * d_disagree
    return total, DiscomfortComponents(d_state, d_output, d_disagree)


def update_alpha(alpha: float, discomfort_value: float, config: SentinelConfig) -> float:
    """Clipped leaky-integrator receptivity update.

    alpha' = clip(alpha + eta_up (alpha0 - alpha) - eta_down [D - theta]_+,
    alpha_min, 1).  Monotone nonincreasing in the discomfort value.
    """
    excess = max(0.0, discomfort_value - config.theta)
    raw = alpha + config.eta_up * (config.alpha0 - alpha) - config.eta_down * excess
    return min(1.0, max(config.alpha_min, raw))


def sentinel_equilibrium(discomfort_value: float, config: SentinelConfig) -> float:
    """Fixed point of the receptivity update under constant discomfort."""
    if discomfort_value <= config.theta:
        return config.alpha0
    interior = config.alpha0 - (config.eta_down / config.eta_up) * (
        discomfort_value - config.theta
    )
    return max(config.alpha_min, interior)


def update_baselines(
    x_bar: np.ndarray, a_bar: float, x: np.ndarray, a_body: float, gamma_ema: float
) -> tuple[np.ndarray, float]:
    """Advance both comfort baselines by one EMA step.

    Applied after the round's discomfort has been computed, so discomfort
    always measures deviation from the pre-round norm.
    """
    x_bar_next = (1.0 - gamma_ema) * x_bar + gamma_ema * x
    a_bar_next = (1.0 - gamma_ema) * a_bar + gamma_ema * a_body
    return x_bar_next, a_bar_next


def advance_sentinel(
    state: SentinelState,
    x: np.ndarray,
    a_body: float,
    a_cog: float,
    config: SentinelConfig,
    dynamic: bool,
) -> SentinelState:
    """Evaluate discomfort against the current baselines and update alpha.

    Baselines are advanced separately (after the reservoir step) via
    update_baselines.  Static-alpha agents pass dynamic=False: discomfort
    is recorded but alpha is left untouched.
    """
    total, comps = discomfort(x, state.x_bar, a_body, state.a_bar, a_cog, config)
    alpha = update_alpha(state.alpha, total, config) if dynamic else state.alpha
    return replace(state, alpha=alpha, last_discomfort=total, last_components=comps)
