"""Single-agent simulation loop against a scheduled opponent.

Each round proceeds in a fixed order: the agent observes the opponent's
previous action, forms the cognitive and body proposals, evaluates bodily
discomfort against the tracked baselines, updates receptivity (dynamic
sentinel only), acts with the new receptivity, and then both players'
simultaneous actions drive the reservoir forward.  Comfort baselines are
advanced last, so discomfort always measures deviation from the pre-round
norm.

RNG discipline: a simulation owns two independent generators, one for the
opponent schedule and one for reservoir noise.  The opponent stream is
therefore identical across agent types under a shared seed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import reservoir as rv
from .game import (
    DEFAULT_PAYOFF,
    FIRST_ROUND_OPPONENT_ACTION,
    OpponentSchedule,
    PayoffMatrix,
    make_strategy,
)
from .governance import (
    DynamicSentinel,
    GovernanceMode,
    SentinelConfig,
    SentinelState,
    StaticAlpha,
    advance_sentinel,
    mix,
    update_baselines,
)

__all__ = ["AgentMaterials", "AgentSpec", "SimulationTrace", "build_materials", "simulate"]


@dataclass(frozen=True)
class AgentMaterials:
    """Everything a simulation needs from the developmental pipeline.

    Holds the habituated reservoir, the frozen readout, the resting
    baselines for the sentinel, and the closing reservoir state used as the
    initial condition of subsequent runs.  ``rho_history`` is the spectral
    radius after every habituation epoch (clamp included).
    """

    params: rv.ReservoirParams
    readout: rv.ReadoutWeights
    state_baseline: np.ndarray
    output_baseline: float
    initial_state: np.ndarray
    rho_history: np.ndarray
    habituation_epochs: int
    ridge_lambda: float


@dataclass(frozen=True)
class AgentSpec:
    """Governance mode plus cognitive strategy for one simulated agent."""

    governance: GovernanceMode
    strategy: str = "tft"
    ema_gamma: float = 0.0
    label: str = ""


@dataclass(frozen=True)
class SimulationTrace:
    """Per-round record of one simulation.

    ``states`` holds reservoir states sampled post-burn-in (the state that
    produced that round's body output), capped by taking evenly spaced
    rounds when the tail is longer than the cap.
    """

    a_self: np.ndarray
    a_opp: np.ndarray
    a_body: np.ndarray
    a_cog: np.ndarray
    alpha: np.ndarray
    discomfort: np.ndarray
    d_state: np.ndarray
    d_output: np.ndarray
    d_disagree: np.ndarray
    payoff: np.ndarray
    states: np.ndarray
    state_rounds: np.ndarray
    burn_in: int

    def __len__(self) -> int:
        return self.a_self.size

    @property
    def cumulative_payoff(self) -> float:
        return float(self.payoff.sum())

    def mean_payoff(self, burn_in: int | None = None) -> float:
        start = self.burn_in if burn_in is None else burn_in
        return float(self.payoff[start:].mean())


def build_materials(
    d: int = 30,
    spectral_radius_target: float = 0.9,
    input_scale: float = 0.5,
    bias_scale: float = 0.1,
    sigma_xi: float = 0.15,
    coop_target: float = 0.95,
    defect_target: float = 0.05,
    n_per_class: int = 2000,
    training_burn_in: int = 500,
    ridge_lambda: float = 0.001,
    habituation: rv.HabituationConfig = rv.HabituationConfig(),
    build_seed: int | np.random.SeedSequence = 0,
    train_seed: int | np.random.SeedSequence = 1,
    habituate_seed: int | np.random.SeedSequence = 2,
) -> AgentMaterials:
    """Run the developmental pipeline: build, train the readout, habituate."""
    params = rv.build_reservoir(
        d,
        rho_target=spectral_radius_target,
        input_scale=input_scale,
        seed=build_seed,
        sigma_xi=sigma_xi,
        bias_scale=bias_scale,
    )
    weights = rv.train_readout(
        params,
        coop_target=coop_target,
        defect_target=defect_target,
        n_per_class=n_per_class,
        burn_in=training_burn_in,
        ridge_lambda=ridge_lambda,
        seed=train_seed,
    )
    hab = rv.habituate(params, habituation, weights, seed=habituate_seed)
    return AgentMaterials(
        params=hab.params,
        readout=weights,
        state_baseline=hab.state_baseline,
        output_baseline=hab.output_baseline,
        initial_state=hab.final_state,
        rho_history=hab.rho_history,
        habituation_epochs=habituation.epochs,
        ridge_lambda=ridge_lambda,
    )


def _subsample_indices(n: int, cap: int) -> np.ndarray:
    if n <= cap:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, cap).round().astype(int))


def simulate(
    materials: AgentMaterials,
    agent: AgentSpec,
    schedule: OpponentSchedule,
    rounds: int,
    rng_opp: np.random.Generator,
    rng_noise: np.random.Generator,
    burn_in: int = 0,
    noise_enabled: bool = True,
    payoff_matrix: PayoffMatrix = DEFAULT_PAYOFF,
    state_cap: int = 2000,
    x0: np.ndarray | None = None,
) -> SimulationTrace:
    """Run one agent against the schedule for ``rounds`` rounds.

    Deterministic given the materials, agent spec, schedule and the two
    generators.  The input materials are never modified.
    """
    if rounds < 1:
        raise ValueError(f"rounds must be positive, got {rounds}")
    if rounds > schedule.total_rounds:
        raise ValueError(
            f"schedule covers {schedule.total_rounds} rounds, asked for {rounds}"
        )
    if not (0 <= burn_in < rounds):
        raise ValueError(f"burn_in must lie in [0, rounds), got {burn_in}")

    params = materials.params
    weights = materials.readout
    d = params.d
    sigma = params.sigma_xi if noise_enabled else 0.0

    if isinstance(agent.governance, DynamicSentinel):
        sentinel_cfg = agent.governance.config
        dynamic = True
        alpha_init = sentinel_cfg.alpha0
    else:
        sentinel_cfg = SentinelConfig()
        dynamic = False
        alpha_init = agent.governance.alpha

    strategy = make_strategy(agent.strategy, agent.ema_gamma)
    sentinel = SentinelState(
        alpha=alpha_init,
        x_bar=np.array(materials.state_baseline),
        a_bar=materials.output_baseline,
    )
    x = np.array(materials.initial_state if x0 is None else x0, dtype=np.float64)

    a_self = np.empty(rounds)
    a_opp = np.empty(rounds)
    a_body = np.empty(rounds)
    a_cog = np.empty(rounds)
    alpha = np.empty(rounds)
    disc = np.empty(rounds)
    d_state = np.empty(rounds)
    d_output = np.empty(rounds)
    d_disagree = np.empty(rounds)
    pay = np.empty(rounds)
    tail = rounds - burn_in
    keep = _subsample_indices(tail, state_cap)
    states = np.empty((keep.size, d))
    keep_set = {int(i) + burn_in for i in keep}
    state_rounds = keep + burn_in
    stored = 0

    opp_prev = FIRST_ROUND_OPPONENT_ACTION
    for t in range(rounds):
        cog = strategy.action(opp_prev)
        body = rv.readout(x, weights)
        sentinel = advance_sentinel(sentinel, x, body, cog, sentinel_cfg, dynamic)
        act = mix(sentinel.alpha, body, cog)
        opp = schedule.action(t, rng_opp)

        a_self[t] = act
        a_opp[t] = opp
        a_body[t] = body
        a_cog[t] = cog
        alpha[t] = sentinel.alpha
        disc[t] = sentinel.last_discomfort
        d_state[t] = sentinel.last_components.state
        d_output[t] = sentinel.last_components.output
        d_disagree[t] = sentinel.last_components.disagree
        pay[t] = (
            payoff_matrix.reward * act * opp
            + payoff_matrix.sucker * act * (1.0 - opp)
            + payoff_matrix.temptation * (1.0 - act) * opp
            + payoff_matrix.punishment * (1.0 - act) * (1.0 - opp)
        )
        if t in keep_set:
            states[stored] = x
            stored += 1

        noise = rng_noise.normal(0.0, sigma, size=d) if sigma > 0 else None
        x_next = rv.step(x, params, act, opp, noise)
        x_bar, a_bar = update_baselines(
            sentinel.x_bar, sentinel.a_bar, x, body, sentinel_cfg.gamma_ema
        )
        sentinel = SentinelState(
            alpha=sentinel.alpha,
            x_bar=x_bar,
            a_bar=a_bar,
            last_discomfort=sentinel.last_discomfort,
            last_components=sentinel.last_components,
        )
        x = x_next
        opp_prev = opp

    return SimulationTrace(
        a_self=a_self,
        a_opp=a_opp,
        a_body=a_body,
        a_cog=a_cog,
        alpha=alpha,
        discomfort=disc,
        d_state=d_state,
        d_output=d_output,
        d_disagree=d_disagree,
        payoff=pay,
        states=states,
        state_rounds=state_rounds,
        burn_in=burn_in,
    )
