"""Echo state network body: construction, dynamics, readout, adaptation.

The reservoir is a d-neuron tanh network driven by the joint action pair
(own, opponent).  Its recurrent matrix is rescaled at construction so the
spectral radius sits strictly below one (fading memory), the linear readout
is fitted once in logit space by ridge regression and then frozen, and slow
Hebbian adaptation of the recurrent weights is available with a homeostatic
spectral clamp.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg
from scipy.special import expit, logit

__all__ = [
    "ReservoirParams",
    "ReadoutWeights",
    "HabituationConfig",
    "HabituationCarry",
    "HabituationResult",
    "ReservoirConstructionError",
    "SpectralRadiusError",
    "build_reservoir",
    "step",
    "readout",
    "train_readout",
    "habituate",
    "spectral_radius",
]

_DENSE_EIG_MAX_DIM = 128


class ReservoirConstructionError(RuntimeError):
    """Raised when a reservoir cannot be built as specified."""


class SpectralRadiusError(RuntimeError):
    """Raised when iterative spectral radius estimation fails to converge.

    Carries the last estimate in ``estimate``.
    """

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ReservoirParams:
    """Reservoir weights and noise level.

    ``w`` is the d x d recurrent matrix, ``w_in`` the d x 2 input matrix
    (column 0 carries the agent's own action, column 1 the opponent's),
    ``bias`` the d-vector of unit biases.  ``w_in`` and ``bias`` are fixed
    for the lifetime of the agent; only ``w`` is touched by habituation.
    Arrays are marked read-only so accidental in-place mutation fails loudly.
    """

    w: np.ndarray
    w_in: np.ndarray
    bias: np.ndarray
    sigma_xi: float
    spectral_radius_target: float

    def __post_init__(self) -> None:
        if self.w.ndim != 2 or self.w.shape[0] != self.w.shape[1]:
            raise ValueError(f"w must be square, got shape {self.w.shape}")
        d = self.w.shape[0]
        if d < 1:
            raise ValueError("reservoir needs at least one neuron")
        if self.w_in.shape != (d, 2):
            raise ValueError(f"w_in must have shape ({d}, 2), got {self.w_in.shape}")
        if self.bias.shape != (d,):
            raise ValueError(f"bias must have shape ({d},), got {self.bias.shape}")
        if self.sigma_xi < 0:
            raise ValueError(f"sigma_xi must be nonnegative, got {self.sigma_xi}")

    @property
    def d(self) -> int:
        return self.w.shape[0]

    def with_recurrent(self, w: np.ndarray) -> "ReservoirParams":
        """Copy of the parameters with a replacement recurrent matrix."""
        return ReservoirParams(
            w=_freeze(w),
            w_in=self.w_in,
            bias=self.bias,
            sigma_xi=self.sigma_xi,
            spectral_radius_target=self.spectral_radius_target,
        )


@dataclass(frozen=True)
class ReadoutWeights:
    """Frozen linear readout; the body action is sigmoid(w_out . x + b_out)."""

    w_out: np.ndarray
    b_out: float

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.w_out)) or not np.isfinite(self.b_out):
            raise ValueError("readout weights must be finite")


@dataclass(frozen=True)
class HabituationConfig:
    """Oja adaptation settings with the homeostatic spectral clamp.

    The Hebbian update operates on the state expressed in dimension-scaled
    units, u = x / (state_scale * sqrt(d)), which keeps the adaptation
    strength independent of reservoir size.  ``state_scale`` is a single
    dimensionless gain calibrated so that 300 epochs of adaptation lift
    the closed-loop cooperative output to its observed saturated level
    (approximately 0.98) without destabilising the recurrent matrix.
    ``settle_steps`` rounds (the first few under a forced cooperative
    drive) put the agent inside the cooperative basin before plasticity
    starts.
    """

    beta: float = 0.01
    epochs: int = 300
    rho_min: float = 0.05
    rho_max: float = 0.99
    baseline_window: int = 100
    state_scale: float = 1.5
    settle_steps: int = 50

    def __post_init__(self) -> None:
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be nonnegative, got {self.epochs}")
        if not (0.0 < self.rho_min < self.rho_max < 1.0):
            raise ValueError(
                f"clamp interval must satisfy 0 < lo < hi < 1, got [{self.rho_min}, {self.rho_max}]"
            )
        if self.state_scale <= 0:
            raise ValueError(f"state_scale must be positive, got {self.state_scale}")
        if self.settle_steps < 0:
            raise ValueError(f"settle_steps must be nonnegative, got {self.settle_steps}")


@dataclass(frozen=True)
class HabituationCarry:
    """Loop state needed to continue an adaptation run where it stopped."""

    state: np.ndarray


@dataclass(frozen=True)
class HabituationResult:
    """Adapted parameters plus the trailing statistics used downstream.

    ``rho_history`` holds the spectral radius after each epoch's clamp.
    ``state_baseline`` / ``output_baseline`` are means over the trailing
    window of the run (the agent's resting profile), and ``final_state`` is
    the closing reservoir state, used as the initial condition of
    subsequent simulations.  ``state_tail`` / ``output_tail`` hold the raw
    trailing window so chunked runs can maintain rolling baselines;
    ``carry`` resumes adaptation in a later call.
    """

    params: ReservoirParams
    rho_history: np.ndarray
    state_baseline: np.ndarray
    output_baseline: float
    final_state: np.ndarray
    state_tail: np.ndarray
    output_tail: np.ndarray
    carry: HabituationCarry | None = None


def spectral_radius(matrix: np.ndarray, max_iter: int = 2000, tol: float = 1e-9) -> float:
    """Largest eigenvalue modulus of a square matrix.

    Uses a dense eigendecomposition up to 128 x 128 and a complex-safe
    Arnoldi iteration beyond that.  Raises SpectralRadiusError (carrying the
    last estimate) if the iterative path fails to converge.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    if not m.any():
        return 0.0
    if m.shape[0] <= _DENSE_EIG_MAX_DIM:
        return float(np.max(np.abs(np.linalg.eigvals(m))))
    return _spectral_radius_arnoldi(m, max_iter=max_iter, tol=tol)


def _spectral_radius_arnoldi(m: np.ndarray, max_iter: int, tol: float) -> float:
    # Largest-modulus eigenvalue via implicitly restarted Arnoldi (handles
    # complex-conjugate dominant pairs that defeat plain power iteration).
    try:
        vals = scipy.sparse.linalg.eigs(
            m, k=1, which="LM", maxiter=max_iter, tol=tol, return_eigenvectors=False
        )
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        partial = np.abs(exc.eigenvalues)
        estimate = float(partial.max()) if partial.size else float("nan")
        raise SpectralRadiusError(
            f"spectral radius iteration did not converge within {max_iter} iterations",
            estimate,
        ) from exc
    return float(np.abs(vals[0]))


def build_reservoir(
    d: int,
    rho_target: float = 0.9,
    input_scale: float = 0.5,
    seed: int | np.random.SeedSequence | np.random.Generator = 0,
    sigma_xi: float = 0.15,
    bias_scale: float = 0.1,
) -> ReservoirParams:
    """Construct a reservoir with the recurrent matrix rescaled to ``rho_target``.

    The recurrent matrix starts from standard normal entries and is
    multiplied by rho_target / rho so its spectral radius hits the target to
    within 1e-6 relative tolerance.  Input weights are N(0, input_scale^2)
    and biases N(0, bias_scale^2).  Deterministic given the seed.
    """
    if d < 1:
        raise ValueError(f"d must be at least 1, got {d}")
    if not (0.0 < rho_target < 1.0):
        raise ValueError(f"rho_target must lie in (0, 1), got {rho_target}")
    if input_scale <= 0:
        raise ValueError(f"input_scale must be positive, got {input_scale}")
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 1.0, size=(d, d))
    rho = spectral_radius(w)
    if rho == 0.0:
        raise ReservoirConstructionError("degenerate random draw: zero spectral radius")
    w *= rho_target / rho
    w_in = rng.normal(0.0, input_scale, size=(d, 2))
    bias = rng.normal(0.0, bias_scale, size=d)
    return ReservoirParams(
        w=_freeze(w),
        w_in=_freeze(w_in),
        bias=_freeze(bias),
        sigma_xi=float(sigma_xi),
        spectral_radius_target=float(rho_target),
    )


def step(
    x: np.ndarray,
    params: ReservoirParams,
    own_action: float,
    opp_action: float,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """One reservoir update; pure (the input state is never modified).

    Returns tanh(W x + W_in [own, opp] + bias) + noise.  Callers supply the
    noise vector from their own seeded generator, or None for the
    deterministic map.
    """
    pre = params.w @ x + params.w_in @ np.array([own_action, opp_action]) + params.bias
    out = np.tanh(pre)
    if noise is not None:
        out = out + noise
    return out


_READOUT_LO = float(np.nextafter(0.0, 1.0))
_READOUT_HI = float(np.nextafter(1.0, 0.0))


def readout(x: np.ndarray, weights: ReadoutWeights) -> float:
    """Body action sigmoid(w_out . x + b_out), strictly inside (0, 1).

    Clipped to the nearest representable values inside the open interval so
    the range contract survives floating-point rounding at extreme logits.
    """
    value = float(expit(float(weights.w_out @ x) + weights.b_out))
    return min(max(value, _READOUT_LO), _READOUT_HI)


def train_readout(
    params: ReservoirParams,
    coop_target: float = 0.95,
    defect_target: float = 0.05,
    n_per_class: int = 2000,
    burn_in: int = 500,
    ridge_lambda: float = 0.001,
    seed: int | np.random.SeedSequence | np.random.Generator = 0,
) -> ReadoutWeights:
    """Developmental fit of the readout by ridge regression in logit space.

    Drives the reservoir with the two symmetric input profiles, mutual
    cooperation (1, 1) and mutual defection (0, 0), with intrinsic noise
    active, and regresses the collected states onto logit(coop_target) and
    logit(defect_target).  The bias column is excluded from the ridge
    penalty.  The returned weights are frozen.
    """
    if not (0.0 < coop_target < 1.0 and 0.0 < defect_target < 1.0):
        raise ValueError("targets must lie strictly inside (0, 1)")
    if n_per_class < params.d:
        raise ValueError(
            f"need at least d={params.d} states per class for a well-posed fit, got {n_per_class}"
        )
    if ridge_lambda <= 0:
        raise ValueError(f"ridge_lambda must be positive, got {ridge_lambda}")
    rng = np.random.default_rng(seed)
    d = params.d
    states = np.empty((2 * n_per_class, d))
    targets = np.empty(2 * n_per_class)
    for cls, (action, target) in enumerate(
        [(1.0, float(logit(coop_target))), (0.0, float(logit(defect_target)))]
    ):
        x = np.zeros(d)
        for t in range(burn_in + n_per_class):
            noise = rng.normal(0.0, params.sigma_xi, size=d) if params.sigma_xi > 0 else None
            x = step(x, params, action, action, noise)
            if t >= burn_in:
                states[cls * n_per_class + (t - burn_in)] = x
        targets[cls * n_per_class : (cls + 1) * n_per_class] = target
    return fit_ridge_logits(states, targets, ridge_lambda)


def fit_ridge_logits(states: np.ndarray, logits: np.ndarray, ridge_lambda: float) -> ReadoutWeights:
    """Solve the ridge normal equations with an unpenalized intercept."""
    n, d = states.shape
    design = np.hstack([states, np.ones((n, 1))])
    gram = design.T @ design
    gram[np.arange(d), np.arange(d)] += ridge_lambda
    try:
        coef = np.linalg.solve(gram, design.T @ logits)
    except np.linalg.LinAlgError as exc:
        raise ReservoirConstructionError(f"ridge normal equations singular: {exc}") from exc
    return ReadoutWeights(w_out=_freeze(coef[:d]), b_out=float(coef[d]))


def oja_update(w: np.ndarray, x: np.ndarray, beta: float) -> np.ndarray:
    """One Oja step: dW_ij = beta * (x_i x_j - W_ij x_i^2)."""
    return w + beta * (np.outer(x, x) - w * (x * x)[:, None])


def _clamp_spectral_radius(w: np.ndarray, lo: float, hi: float) -> tuple[np.ndarray, float]:
    rho = spectral_radius(w)
    if rho > hi:
        w = w * (hi / rho)
        rho = hi
    elif 0.0 < rho < lo:
        w = w * (lo / rho)
        rho = lo
    return w, rho


def habituate(
    params: ReservoirParams,
    config: HabituationConfig,
    readout_weights: ReadoutWeights,
    seed: int | np.random.SeedSequence | np.random.Generator = 0,
    carry: HabituationCarry | None = None,
) -> HabituationResult:
    """Adapt the recurrent matrix against a constant cooperative opponent.

    Runs the body-governed closed loop (the agent's own action is its
    readout, the opponent plays 1.0) for ``config.epochs`` rounds and
    applies the Oja update to W after every step, with the state expressed
    in dimension-scaled units (see HabituationConfig).  After every update
    the spectral radius is projected back into [rho_min, rho_max] by
    uniform rescaling if it left the interval.  Input weights and the
    readout are untouched.

    A fresh call prepends a settle phase (cooperative drive, then the
    closed loop, no adaptation) that places the agent in the cooperative
    basin; pass ``carry`` from a previous result to continue adaptation
    instead.  With zero epochs the weights come back unchanged and the
    trailing statistics describe the resting (non-adapting) loop.
    """
    rng = np.random.default_rng(seed)
    d = params.d
    w = np.array(params.w)
    scale = config.state_scale * math.sqrt(d)

    def advance(x: np.ndarray, own: float | None) -> np.ndarray:
        a = readout(x, readout_weights) if own is None else own
        pre = w @ x + params.w_in @ np.array([a, 1.0]) + params.bias
        out = np.tanh(pre)
        if params.sigma_xi > 0:
            out = out + rng.normal(0.0, params.sigma_xi, size=d)
        return out

    if carry is None:
        x = np.zeros(d)
        forced = min(20, config.settle_steps)
        for t in range(config.settle_steps):
            x = advance(x, 1.0 if t < forced else None)
    else:
        x = np.array(carry.state)

    window = max(1, config.baseline_window)
    adapting = config.epochs > 0
    # A zero-epoch call still runs a short non-adapting stretch so callers
    # always get a resting profile over the trailing window.
    total = config.epochs if adapting else window
    tail_states = np.zeros((min(window, total), d))
    tail_outputs = np.zeros(min(window, total))
    rho_history = np.zeros(config.epochs)

    for epoch in range(total):
        x = advance(x, None)
        if adapting:
            w = oja_update(w, x / scale, config.beta)
            w, rho = _clamp_spectral_radius(w, config.rho_min, config.rho_max)
            rho_history[epoch] = rho
        k = epoch - (total - tail_states.shape[0])
        if k >= 0:
            tail_states[k] = x
            tail_outputs[k] = readout(x, readout_weights)

    adapted = params.with_recurrent(w) if adapting else params
    return HabituationResult(
        params=adapted,
        rho_history=rho_history,
        state_baseline=_freeze(tail_states.mean(axis=0)),
        output_baseline=float(tail_outputs.mean()),
        final_state=_freeze(x),
        state_tail=_freeze(tail_states),
        output_tail=_freeze(tail_outputs),
        carry=HabituationCarry(state=_freeze(x)),
    )
