import numpy as np
import pytest

from brg.reservoir import (
    HabituationConfig,
    ReadoutWeights,
    ReservoirParams,
    build_reservoir,
    fit_ridge_logits,
    habituate,
    oja_update,
    readout,
    spectral_radius,
    step,
    train_readout,
)
from brg.reservoir import _spectral_radius_arnoldi


class TestSpectralRadius:
    def test_diagonal(self):
        assert spectral_radius(np.diag([0.5, -0.9])) == pytest.approx(0.9)

    def test_zero_matrix(self):
        assert spectral_radius(np.zeros((4, 4))) == 0.0

    def test_arnoldi_matches_dense(self):
        rng = np.random.default_rng(5)
        m = rng.normal(size=(30, 30))
        dense = spectral_radius(m)
        iterative = _spectral_radius_arnoldi(m, max_iter=5000, tol=1e-10)
        assert iterative == pytest.approx(dense, rel=1e-6)

    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError):
            spectral_radius(np.zeros((2, 3)))


class TestBuild:
    def test_hits_target_radius(self):
        params = build_reservoir(30, 0.9, 0.5, seed=42)
        assert spectral_radius(params.w) == pytest.approx(0.9, rel=1e-6)

    def test_one_neuron(self):
        params = build_reservoir(1, 0.5, 0.5, seed=0)
        assert abs(params.w[0, 0]) == pytest.approx(0.5)

    def test_deterministic(self):
        a = build_reservoir(10, 0.8, 0.5, seed=9)
        b = build_reservoir(10, 0.8, 0.5, seed=9)
        assert np.array_equal(a.w, b.w)
        assert np.array_equal(a.w_in, b.w_in)
        assert np.array_equal(a.bias, b.bias)

    def test_validation(self):
        with pytest.raises(ValueError):
            build_reservoir(0, 0.9, 0.5)
        with pytest.raises(ValueError):
            build_reservoir(5, 1.2, 0.5)

    def test_arrays_are_read_only(self):
        params = build_reservoir(5, 0.9, 0.5, seed=1)
        with pytest.raises(ValueError):
            params.w[0, 0] = 1.0


class TestStep:
    def test_zero_everything_maps_to_zero(self):
        params = ReservoirParams(
            w=np.zeros((3, 3)), w_in=np.zeros((3, 2)), bias=np.zeros(3),
            sigma_xi=0.0, spectral_radius_target=0.9,
        )
        x = np.array([0.4, -0.2, 0.9])
        assert np.allclose(step(x, params, 0.7, 0.3), 0.0)

    def test_scalar_tanh(self):
        params = ReservoirParams(
            w=np.zeros((1, 1)), w_in=np.array([[1.0, 0.0]]), bias=np.zeros(1),
            sigma_xi=0.0, spectral_radius_target=0.9,
        )
        out = step(np.zeros(1), params, 1.0, 0.0)
        assert out[0] == pytest.approx(np.tanh(1.0))

    def test_purity(self):
        params = build_reservoir(8, 0.9, 0.5, seed=3)
        x = np.full(8, 0.25)
        x_copy = x.copy()
        noise = np.random.default_rng(0).normal(0, 0.1, 8)
        out1 = step(x, params, 0.5, 0.5, noise)
        out2 = step(x, params, 0.5, 0.5, noise)
        assert np.array_equal(x, x_copy)
        assert np.array_equal(out1, out2)

    def test_fading_memory(self):
        # Echo state property: distinct initial states forget each other
        # under a shared input sequence at rho = 0.9 and zero noise.
        params = build_reservoir(30, 0.9, 0.5, seed=17)
        rng = np.random.default_rng(4)
        xa = rng.uniform(-1, 1, 30)
        xb = rng.uniform(-1, 1, 30)
        inputs = rng.random((200, 2))
        for own, opp in inputs:
            xa = step(xa, params, own, opp)
            xb = step(xb, params, own, opp)
        assert np.linalg.norm(xa - xb) < 1e-3


class TestReadout:
    def test_zero_weights_give_half(self):
        w = ReadoutWeights(w_out=np.zeros(4), b_out=0.0)
        assert readout(np.ones(4), w) == 0.5

    def test_open_range(self):
        w = ReadoutWeights(w_out=np.zeros(2), b_out=50.0)
        value = readout(np.zeros(2), w)
        assert 0.0 < value < 1.0
        assert value == pytest.approx(1.0, abs=1e-9)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            ReadoutWeights(w_out=np.array([np.inf]), b_out=0.0)


class TestTrainReadout:
    def test_ridge_matches_independent_solver(self):
        # Oracle: augmented least squares [X; sqrt(lambda) I] solved by lstsq.
        rng = np.random.default_rng(12)
        states = rng.normal(size=(40, 6))
        targets = rng.normal(size=40)
        lam = 0.37
        fitted = fit_ridge_logits(states, targets, lam)
        design = np.hstack([states, np.ones((40, 1))])
        penalty = np.sqrt(lam) * np.eye(7)
        penalty[6, 6] = 0.0  # intercept unpenalized
        stacked_a = np.vstack([design, penalty])
        stacked_b = np.concatenate([targets, np.zeros(7)])
        oracle, *_ = np.linalg.lstsq(stacked_a, stacked_b, rcond=None)
        assert np.allclose(fitted.w_out, oracle[:6], atol=1e-8)
        assert fitted.b_out == pytest.approx(oracle[6], abs=1e-8)

    def test_constant_targets_collapse_to_bias(self):
        params = build_reservoir(10, 0.9, 0.5, seed=2)
        weights = train_readout(params, 0.5, 0.5, n_per_class=50, burn_in=20, seed=3)
        assert np.allclose(weights.w_out, 0.0, atol=1e-10)
        assert weights.b_out == pytest.approx(0.0, abs=1e-10)
        assert readout(np.random.default_rng(0).normal(size=10), weights) == pytest.approx(0.5)

    def test_cooperative_drive_reads_near_target(self):
        params = build_reservoir(30, 0.9, 0.5, seed=42)
        weights = train_readout(params, seed=7)
        rng = np.random.default_rng(8)
        x = np.zeros(30)
        outputs = []
        for t in range(600):
            x = step(x, params, 1.0, 1.0, rng.normal(0, params.sigma_xi, 30))
            if t >= 100:
                outputs.append(readout(x, weights))
        assert 0.90 <= np.mean(outputs) <= 0.99

    def test_requires_enough_samples(self):
        params = build_reservoir(30, 0.9, 0.5, seed=0)
        with pytest.raises(ValueError):
            train_readout(params, n_per_class=10)


class TestHabituate:
    def test_zero_epochs_keeps_weights(self):
        params = build_reservoir(12, 0.9, 0.5, seed=5)
        weights = train_readout(params, n_per_class=100, burn_in=50, seed=6)
        result = habituate(params, HabituationConfig(epochs=0), weights, seed=7)
        assert result.params is params
        assert result.rho_history.size == 0
        assert np.isfinite(result.output_baseline)

    def test_scalar_oja_arithmetic(self):
        # dW = beta * (x*x - W*x^2) at x=1, W=0.5, beta=0.01
        w = oja_update(np.array([[0.5]]), np.array([1.0]), 0.01)
        assert w[0, 0] == pytest.approx(0.505)

    def test_radius_stays_clamped_and_trends_down_then_settles(self):
        params = build_reservoir(30, 0.9, 0.5, seed=21)
        weights = train_readout(params, seed=22)
        result = habituate(params, HabituationConfig(epochs=300), weights, seed=23)
        assert np.all(result.rho_history <= 0.99 + 1e-12)
        assert np.all(result.rho_history >= 0.05 - 1e-12)

    def test_input_weights_untouched(self):
        params = build_reservoir(10, 0.9, 0.5, seed=31)
        weights = train_readout(params, n_per_class=100, burn_in=50, seed=32)
        result = habituate(params, HabituationConfig(epochs=50), weights, seed=33)
        assert result.params.w_in is params.w_in
        assert result.params.bias is params.bias

    def test_carry_continuation_matches_single_run(self):
        params = build_reservoir(8, 0.9, 0.5, seed=41)
        weights = train_readout(params, n_per_class=100, burn_in=50, seed=42)
        rng_a = np.random.default_rng(43)
        full = habituate(params, HabituationConfig(epochs=40), weights, seed=rng_a)
        rng_b = np.random.default_rng(43)
        first = habituate(params, HabituationConfig(epochs=25), weights, seed=rng_b)
        second = habituate(
            first.params, HabituationConfig(epochs=15), weights, seed=rng_b, carry=first.carry
        )
        assert np.allclose(second.params.w, full.params.w)
        assert np.allclose(second.final_state, full.final_state)
