import numpy as np
import pytest
from hypothesis import given, strategies as st

from brg.governance import (
    SentinelConfig,
    discomfort,
    mix,
    sentinel_equilibrium,
    update_alpha,
    update_baselines,
)

DEFAULTS = SentinelConfig()


class TestMix:
    def test_endpoints(self):
        assert mix(0.0, 0.98, 0.3) == 0.3
        assert mix(1.0, 0.98, 0.3) == 0.98

    def test_halfway_against_defection(self):
        assert mix(0.5, 0.98, 0.0) == pytest.approx(0.49)

    @given(
        alpha=st.floats(0, 1),
        body=st.floats(0.001, 0.999),
        cog=st.floats(0, 1),
    )
    def test_stays_in_unit_interval(self, alpha, body, cog):
        value = mix(alpha, body, cog)
        assert min(body, cog) - 1e-12 <= value <= max(body, cog) + 1e-12


class TestDiscomfort:
    def test_perfect_comfort(self):
        x = np.array([0.1, -0.2])
        total, comps = discomfort(x, x, 0.9, 0.9, 0.9, DEFAULTS)
        assert total == 0.0
        assert comps.state == comps.output == comps.disagree == 0.0

    def test_disagreement_pathway(self):
        x = np.zeros(3)
        total, comps = discomfort(x, x, 0.98, 0.98, 0.0, DEFAULTS)
        assert comps.disagree == pytest.approx(0.98)
        assert total == pytest.approx(0.392)

    def test_state_normalization_by_sqrt_d(self):
        x = np.ones(4)
        total, comps = discomfort(x, np.zeros(4), 0.5, 0.5, 0.5, DEFAULTS)
        assert comps.state == pytest.approx(1.0)  # norm 2 over sqrt(4)
        assert total == pytest.approx(0.3)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            SentinelConfig(w_state=0.5, w_output=0.3, w_disagree=0.4)


class TestUpdateAlpha:
    def test_comfortable_at_baseline(self):
        assert update_alpha(0.85, 0.0, DEFAULTS) == pytest.approx(0.85)

    def test_one_step_arithmetic(self):
        assert update_alpha(0.85, 0.5, DEFAULTS) == pytest.approx(0.65)

    def test_clips_at_floor(self):
        assert update_alpha(0.10, 1.0, DEFAULTS) == pytest.approx(0.05)

    @given(alpha=st.floats(0.05, 1.0), d=st.floats(0, 10))
    def test_always_inside_bounds(self, alpha, d):
        out = update_alpha(alpha, d, DEFAULTS)
        assert DEFAULTS.alpha_min <= out <= 1.0

    @given(alpha=st.floats(0.05, 1.0), d1=st.floats(0, 5), d2=st.floats(0, 5))
    def test_monotone_nonincreasing_in_discomfort(self, alpha, d1, d2):
        lo, hi = sorted([d1, d2])
        assert update_alpha(alpha, hi, DEFAULTS) <= update_alpha(alpha, lo, DEFAULTS) + 1e-12


class TestSentinelEquilibrium:
    @pytest.mark.parametrize(
        "d,expected",
        [(0.05, 0.85), (0.15, 0.35), (0.5, 0.05)],
    )
    def test_three_branches(self, d, expected):
        assert sentinel_equilibrium(d, DEFAULTS) == pytest.approx(expected)

    @pytest.mark.parametrize("d", [0.0, 0.05, 0.1, 0.15, 0.3, 1.0])
    def test_iteration_converges_to_closed_form(self, d):
        # The update is linear with contraction 1 - eta_up away from the
        # clip, so the gap to the closed form shrinks geometrically.
        target = sentinel_equilibrium(d, DEFAULTS)
        alpha = DEFAULTS.alpha0
        rate_steps = int(10 / DEFAULTS.eta_up)
        for _ in range(rate_steps):
            alpha = update_alpha(alpha, d, DEFAULTS)
        geometric = abs(DEFAULTS.alpha0 - target) * (1 - DEFAULTS.eta_up) ** rate_steps
        assert abs(alpha - target) <= geometric + 1e-12
        for _ in range(200):
            alpha = update_alpha(alpha, d, DEFAULTS)
        assert alpha == pytest.approx(target, abs=1e-6)

    def test_continuity_at_threshold(self):
        eps = 1e-9
        below = sentinel_equilibrium(DEFAULTS.theta - eps, DEFAULTS)
        above = sentinel_equilibrium(DEFAULTS.theta + eps, DEFAULTS)
        assert below == pytest.approx(above, abs=1e-6)

    @given(d1=st.floats(0, 2), d2=st.floats(0, 2))
    def test_monotone_nonincreasing(self, d1, d2):
        lo, hi = sorted([d1, d2])
        assert sentinel_equilibrium(hi, DEFAULTS) <= sentinel_equilibrium(lo, DEFAULTS) + 1e-12


class TestBaselines:
    def test_single_step(self):
        x_bar, a_bar = update_baselines(np.zeros(1), 0.0, np.ones(1), 1.0, 0.02)
        assert x_bar[0] == pytest.approx(0.02)
        assert a_bar == pytest.approx(0.02)

    def test_full_replacement_at_rate_one(self):
        x = np.array([0.3, -0.7])
        x_bar, a_bar = update_baselines(np.zeros(2), 0.1, x, 0.9, 1.0)
        assert np.array_equal(x_bar, x)
        assert a_bar == 0.9

    def test_geometric_convergence_to_constant(self):
        gamma = 0.02
        x = np.array([0.5])
        x_bar = np.zeros(1)
        a_bar = 0.0
        for t in range(1, 400):
            x_bar, a_bar = update_baselines(x_bar, a_bar, x, 0.5, gamma)
            assert abs(x_bar[0] - 0.5) == pytest.approx(0.5 * (1 - gamma) ** t, rel=1e-9)
