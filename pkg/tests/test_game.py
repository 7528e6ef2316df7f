import numpy as np
import pytest
from hypothesis import given, strategies as st

from brg.game import (
    AllCooperate,
    EmaTitForTat,
    PayoffMatrix,
    TitForTat,
    make_strategy,
    parse_schedule,
    payoff,
)

unit = st.floats(min_value=0.0, max_value=1.0)


class TestPayoff:
    def test_corners(self):
        assert payoff(1, 1) == 3.0
        assert payoff(0, 0) == 1.0
        assert payoff(0, 1) == 5.0
        assert payoff(1, 0) == 0.0

    def test_center_is_corner_average(self):
        assert payoff(0.5, 0.5) == pytest.approx(2.25)

    def test_near_full_cooperation_skims_temptation(self):
        # u(0.98, 1) = 3 * 0.98 + 5 * 0.02
        assert payoff(0.98, 1.0) == pytest.approx(3.04)

    def test_structure_validation(self):
        with pytest.raises(ValueError):
            PayoffMatrix(reward=3, sucker=0, temptation=2, punishment=1)
        with pytest.raises(ValueError):
            # violates 2R > T + S
            PayoffMatrix(reward=3, sucker=2, temptation=5, punishment=2.5)

    @given(a=unit, b=unit, t=unit)
    def test_affine_in_each_argument(self, a, b, t):
        # u(a, .) is the line segment between u(a, 0) and u(a, 1)
        left = payoff(a, t * b)
        expected = (1 - t * b) * payoff(a, 0.0) + (t * b) * payoff(a, 1.0)
        assert left == pytest.approx(expected, abs=1e-12)
        right = payoff(t * a, b)
        expected = (1 - t * a) * payoff(0.0, b) + (t * a) * payoff(1.0, b)
        assert right == pytest.approx(expected, abs=1e-12)

    @given(a=unit)
    def test_folk_identity_on_diagonal(self, a):
        m = PayoffMatrix()
        expected = m.reward * a * a + (m.sucker + m.temptation) * a * (1 - a) + m.punishment * (1 - a) ** 2
        assert payoff(a, a) == pytest.approx(expected, abs=1e-12)


class TestSchedule:
    def test_parse_roundtrip(self):
        text = "coop:500,defect:50,coop:500,noisy(0.3):200,coop:500"
        schedule = parse_schedule(text)
        assert schedule.total_rounds == 1750
        assert schedule.describe() == text

    def test_phase_boundaries_are_half_open(self):
        schedule = parse_schedule("coop:500,defect:50")
        rng = np.random.default_rng(0)
        assert schedule.action(499, rng) == 1.0
        assert schedule.action(500, rng) == 0.0
        assert schedule.action(549, rng) == 0.0

    def test_out_of_range_round(self):
        schedule = parse_schedule("coop:10")
        with pytest.raises(IndexError):
            schedule.action(10, np.random.default_rng(0))

    def test_parse_errors(self):
        with pytest.raises(ValueError):
            parse_schedule("coop:0")
        with pytest.raises(ValueError):
            parse_schedule("noisy(1.5):10")
        with pytest.raises(ValueError):
            parse_schedule("frobnicate:10")
        with pytest.raises(ValueError):
            parse_schedule("")

    def test_noisy_moments(self):
        schedule = parse_schedule("noisy(0.1):2000")
        rng = np.random.default_rng(7)
        draws = np.array([schedule.action(t, rng) for t in range(2000)])
        assert 0.88 <= draws.mean() <= 0.92
        assert np.var(draws) == pytest.approx(0.09, abs=0.02)

    def test_every_phase_kind_consumes_one_draw(self):
        # Identical seeds must yield identical noisy draws regardless of the
        # prefix phases, because coop/defect rounds advance the stream too.
        s1 = parse_schedule("coop:5,noisy(0.5):5")
        s2 = parse_schedule("defect:5,noisy(0.5):5")
        r1, r2 = np.random.default_rng(3), np.random.default_rng(3)
        a1 = [s1.action(t, r1) for t in range(10)]
        a2 = [s2.action(t, r2) for t in range(10)]
        assert a1[5:] == a2[5:]


class TestStrategies:
    def test_tft_copies(self):
        assert TitForTat().action(0.3) == 0.3

    def test_allc(self):
        assert AllCooperate().action(0.0) == 1.0

    def test_ema_one_step(self):
        s = EmaTitForTat(0.5)
        assert s.value == 1.0
        assert s.action(0.0) == pytest.approx(0.5)

    def test_ema_gamma_zero_equals_tft(self):
        rng = np.random.default_rng(11)
        ema, tft = EmaTitForTat(0.0), TitForTat()
        for opp in rng.random(100):
            assert ema.action(opp) == tft.action(opp)

    def test_ema_geometric_decay(self):
        gamma = 0.9
        s = EmaTitForTat(gamma)
        for _ in range(200):
            s.action(1.0)
        s.action(0.0)  # single defection in an all-ones stream
        deviation0 = 1.0 - s.value
        for k in range(1, 6):
            s.action(1.0)
            assert 1.0 - s.value == pytest.approx(deviation0 * gamma**k, rel=1e-9)

    def test_make_strategy(self):
        assert isinstance(make_strategy("tft"), TitForTat)
        assert isinstance(make_strategy("ema", 0.5), EmaTitForTat)
        assert isinstance(make_strategy("allc"), AllCooperate)
        with pytest.raises(ValueError):
            make_strategy("grim")
