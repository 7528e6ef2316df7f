"""Continuous prisoner's dilemma: payoff, opponent schedules, cognitive strategies.

Actions are cooperation intensities in [0, 1].  The stage payoff is the
bilinear extension of the classic 2x2 game, so the four corners recover the
canonical (R, S, T, P) values exactly.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PayoffMatrix",
    "DEFAULT_PAYOFF",
    "payoff",
    "Phase",
    "OpponentSchedule",
    "parse_schedule",
    "TitForTat",
    "EmaTitForTat",
    "AllCooperate",
    "make_strategy",
    "FIRST_ROUND_OPPONENT_ACTION",
]

# Cooperative prior: the very first round is played as if the opponent had
# just cooperated.  Applies to every strategy and to the reservoir input.
FIRST_ROUND_OPPONENT_ACTION = 1.0


@dataclass(frozen=True)
class PayoffMatrix:
    """Stage payoffs (reward, sucker, temptation, punishment).

    Must satisfy T > R > P > S and 2R > T + S so that the bilinear form
    keeps a prisoner's dilemma structure at every interior action profile.
    """

    reward: float = 3.0
    sucker: float = 0.0
    temptation: float = 5.0
    punishment: float = 1.0

    def __post_init__(self) -> None:
        r, s, t, p = self.reward, self.sucker, self.temptation, self.punishment
        if not (t > r > p > s):
            raise ValueError(f"payoffs must satisfy T > R > P > S, got {(r, s, t, p)}")
        if not (2 * r > t + s):
            raise ValueError(f"payoffs must satisfy 2R > T + S, got {(r, s, t, p)}")


DEFAULT_PAYOFF = PayoffMatrix()


def payoff(a_i: float, a_j: float, matrix: PayoffMatrix = DEFAULT_PAYOFF) -> float:
    """Bilinear stage payoff to the agent playing ``a_i`` against ``a_j``."""
    return float(
        matrix.reward * a_i * a_j
        + matrix.sucker * a_i * (1.0 - a_j)
        + matrix.temptation * (1.0 - a_i) * a_j
        + matrix.punishment * (1.0 - a_i) * (1.0 - a_j)
    )


@dataclass(frozen=True)
class Phase:
    """One segment of an opponent program.

    kind is one of "coop", "defect", "noisy".  Noisy phases cooperate with
    probability 1 - epsilon and defect otherwise.
    """

    kind: str
    length: int
    epsilon: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("coop", "defect", "noisy"):
            raise ValueError(f"unknown phase kind {self.kind!r}")
        if self.length < 1:
            raise ValueError(f"phase length must be positive, got {self.length}")
        if self.kind == "noisy":
            if self.epsilon is None or not (0.0 < self.epsilon < 1.0):
                raise ValueError(f"noisy phase needs epsilon in (0, 1), got {self.epsilon}")
        elif self.epsilon is not None:
            raise ValueError(f"{self.kind} phase does not take epsilon")


@dataclass(frozen=True)
class OpponentSchedule:
    """Piecewise opponent action program over half-open round intervals.

    Phase n covers rounds [start_n, start_n + length_n), indexed from 0.
    """

    phases: tuple[Phase, ...]
    _boundaries: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.phases:
            raise ValueError("schedule needs at least one phase")
        ends = np.cumsum([p.length for p in self.phases])
        object.__setattr__(self, "_boundaries", ends)

    @property
    def total_rounds(self) -> int:
        return int(self._boundaries[-1])

    def phase_at(self, t: int) -> Phase:
        if not (0 <= t < self.total_rounds):
            raise IndexError(f"round {t} outside schedule of {self.total_rounds} rounds")
        return self.phases[int(np.searchsorted(self._boundaries, t, side="right"))]

    def action(self, t: int, rng: np.random.Generator) -> float:
        """Opponent action at round ``t``.

        Exactly one RNG draw is consumed per call regardless of phase kind,
        so trajectories stay aligned across conditions under a shared seed.
        """
        u = rng.random()
        phase = self.phase_at(t)
        if phase.kind == "coop":
            return 1.0
        if phase.kind == "defect":
            return 0.0
        return 1.0 if u >= phase.epsilon else 0.0

    def describe(self) -> str:
        parts = []
        for p in self.phases:
            if p.kind == "noisy":
                parts.append(f"noisy({p.epsilon:g}):{p.length}")
            else:
                parts.append(f"{p.kind}:{p.length}")
        return ",".join(parts)


_PHASE_RE = re.compile(r"^(coop|defect|noisy\(([0-9.eE+-]+)\))\s*:\s*(\d+)$")


def parse_schedule(text: str) -> OpponentSchedule:
    """Parse the compact schedule mini-language.

    Example: ``coop:500,defect:50,coop:500,noisy(0.3):200,coop:500``.
    """
    phases = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        m = _PHASE_RE.match(chunk)
        if m is None:
            raise ValueError(f"cannot parse schedule phase {chunk!r}")
        head, eps, length = m.group(1), m.group(2), int(m.group(3))
        if head.startswith("noisy"):
            phases.append(Phase("noisy", length, float(eps)))
        else:
            phases.append(Phase(head, length))
    if not phases:
        raise ValueError(f"empty schedule {text!r}")
    return OpponentSchedule(tuple(phases))


class TitForTat:
    """Copy the opponent's previous action."""

    def action(self, opp_prev: float) -> float:
        return float(opp_prev)

    def reset(self) -> None:
        pass


class EmaTitForTat:
    """Exponentially smoothed copy of the opponent's previous action.

    With gamma = 0 this reduces to plain tit-for-tat at every round.  The
    smoothed value starts at the cooperative prior.
    """

    def __init__(self, gamma: float):
        if not (0.0 <= gamma < 1.0):
            raise ValueError(f"gamma must be in [0, 1), got {gamma}")
        self.gamma = float(gamma)
        self.value = FIRST_ROUND_OPPONENT_ACTION

    def action(self, opp_prev: float) -> float:
        self.value = self.gamma * self.value + (1.0 - self.gamma) * float(opp_prev)
        return self.value

    def reset(self) -> None:
        self.value = FIRST_ROUND_OPPONENT_ACTION


class AllCooperate:
    """Unconditional cooperation."""

    def action(self, opp_prev: float) -> float:
        return 1.0

    def reset(self) -> None:
        pass


def make_strategy(kind: str, gamma: float = 0.0):
    """Build a fresh strategy instance; kinds are "tft", "ema", "allc"."""
    if kind == "tft":
        return TitForTat()
    if kind == "ema":
        return EmaTitForTat(gamma)
    if kind == "allc":
        return AllCooperate()
    raise ValueError(f"unknown strategy kind {kind!r}")
