import dataclasses

import numpy as np
import pytest

from brg.config import default_config
from brg.experiments import build_cell_materials, run_simulation
from brg.game import parse_schedule, payoff
from brg.governance import DynamicSentinel, SentinelConfig, StaticAlpha
from brg.simulate import AgentSpec, simulate


@pytest.fixture(scope="module")
def materials():
    config = dataclasses.replace(default_config("E1"), seeds=(0,))
    return build_cell_materials(config, 0)


def _rngs(seed=0):
    ss = np.random.SeedSequence(seed)
    a, b = ss.spawn(2)
    return np.random.default_rng(a), np.random.default_rng(b)


class TestSimulate:
    def test_static_zero_is_pure_tit_for_tat(self, materials):
        schedule = parse_schedule("noisy(0.4):200")
        rng_opp, rng_noise = _rngs(1)
        trace = simulate(
            materials, AgentSpec(StaticAlpha(0.0), "tft"), schedule, 200, rng_opp, rng_noise
        )
        assert trace.a_self[0] == 1.0  # cooperative prior on round 0
        assert np.array_equal(trace.a_self[1:], trace.a_opp[:-1])

    def test_payoff_column_matches_payoff_function(self, materials):
        schedule = parse_schedule("noisy(0.3):100")
        trace = simulate(
            materials, AgentSpec(StaticAlpha(0.5), "tft"), schedule, 100, *_rngs(2)
        )
        expected = [payoff(a, o) for a, o in zip(trace.a_self, trace.a_opp)]
        assert np.array_equal(trace.payoff, expected)

    def test_trace_length_and_state_sampling(self, materials):
        schedule = parse_schedule("coop:300")
        trace = simulate(
            materials, AgentSpec(StaticAlpha(1.0), "tft"), schedule, 300, *_rngs(3),
            burn_in=100, state_cap=50,
        )
        assert len(trace) == 300
        assert trace.states.shape == (50, materials.params.d)
        assert trace.state_rounds.min() >= 100

    def test_determinism(self, materials):
        schedule = parse_schedule("noisy(0.1):150")
        spec = AgentSpec(DynamicSentinel(SentinelConfig()), "tft")
        t1 = simulate(materials, spec, schedule, 150, *_rngs(4))
        t2 = simulate(materials, spec, schedule, 150, *_rngs(4))
        assert np.array_equal(t1.a_self, t2.a_self)
        assert np.array_equal(t1.alpha, t2.alpha)
        assert np.array_equal(t1.states, t2.states)

    def test_opponent_stream_shared_across_agents(self, materials):
        schedule = parse_schedule("noisy(0.3):100")
        t_body = simulate(materials, AgentSpec(StaticAlpha(1.0), "tft"), schedule, 100, *_rngs(5))
        t_cog = simulate(materials, AgentSpec(StaticAlpha(0.0), "allc"), schedule, 100, *_rngs(5))
        assert np.array_equal(t_body.a_opp, t_cog.a_opp)

    def test_static_alpha_records_discomfort_but_never_updates(self, materials):
        schedule = parse_schedule("coop:50,defect:50")
        trace = simulate(materials, AgentSpec(StaticAlpha(0.7), "tft"), schedule, 100, *_rngs(6))
        assert np.all(trace.alpha == 0.7)
        assert trace.discomfort[60] > 0.0

    def test_sentinel_drops_on_defection(self, materials):
        schedule = parse_schedule("coop:200,defect:50,coop:100")
        trace = simulate(
            materials, AgentSpec(DynamicSentinel(SentinelConfig()), "tft"), schedule, 350, *_rngs(7)
        )
        assert trace.alpha[150] > 0.7  # settled near baseline trust
        assert trace.alpha[200:250].min() <= 0.06  # floor reached during block
        assert trace.alpha[-1] > trace.alpha[230]  # recovers once cooperation resumes

    def test_body_governed_cooperation_level(self, materials):
        schedule = parse_schedule("coop:300")
        trace = simulate(materials, AgentSpec(StaticAlpha(1.0), "tft"), schedule, 300, *_rngs(8))
        assert 0.95 <= trace.a_body[-100:].mean() <= 0.995

    def test_rounds_must_fit_schedule(self, materials):
        schedule = parse_schedule("coop:10")
        with pytest.raises(ValueError):
            simulate(materials, AgentSpec(StaticAlpha(1.0), "tft"), schedule, 11, *_rngs(9))


class TestRunSimulation:
    def test_single_cell_contract(self):
        config = dataclasses.replace(
            default_config("E1"), agents=("static:1",), seeds=(0, 1), rounds=100,
            schedule="coop:100",
        )
        trace = run_simulation(config, seed=0)
        assert len(trace) == 100

    def test_rejects_ambiguous_agent_grid(self):
        config = dataclasses.replace(default_config("E3"), seeds=(0,))
        with pytest.raises(Exception):
            run_simulation(config, seed=0)

    def test_deterministic_flag_silences_noise(self):
        config = dataclasses.replace(
            default_config("E1"), agents=("static:1",), schedule="coop:60", rounds=60,
            deterministic=True,
        )
        t1 = run_simulation(config, 0)
        t2 = run_simulation(config, 0)
        assert np.array_equal(t1.a_body, t2.a_body)
        # deterministic closed loop settles to a fixed point: late outputs constant
        assert np.std(t1.a_body[-10:]) < 1e-6
