"""Closed-loop analysis and information metrics.

Fixed points of the deterministic body-governed map, their Jacobian and
local stability, nonparametric and Gaussian KL divergence between reservoir
state samples, and the scalar trace metrics (action variance, free energy,
detection and recovery times).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .reservoir import ReadoutWeights, ReservoirParams, readout, spectral_radius

__all__ = [
    "FixedPointResult",
    "StabilityReport",
    "KlEstimate",
    "CovarianceError",
    "solve_fixed_point",
    "closed_loop_map",
    "closed_loop_jacobian",
    "kl_knn",
    "kl_knn_details",
    "kl_gaussian",
    "action_variance",
    "free_energy",
    "detection_time",
    "recovery_time",
]


class CovarianceError(RuntimeError):
    """Raised when a sample covariance is too ill-conditioned to invert."""

    def __init__(self, message: str, condition_number: float):
        super().__init__(message)
        self.condition_number = condition_number


@dataclass(frozen=True)
class FixedPointResult:
    x_star: np.ndarray
    a_star: float
    iterations: int
    residual: float
    converged: bool


@dataclass(frozen=True)
class StabilityReport:
    jacobian: np.ndarray
    rho_eff: float
    stable: bool


def closed_loop_map(
    x: np.ndarray, params: ReservoirParams, weights: ReadoutWeights, a_opp: float
) -> np.ndarray:
    """Deterministic body-governed update: the agent's input is its own readout."""
    a_body = readout(x, weights)
    pre = params.w @ x + params.w_in @ np.array([a_body, a_opp]) + params.bias
    return np.tanh(pre)


def solve_fixed_point(
    params: ReservoirParams,
    weights: ReadoutWeights,
    a_opp: float,
    x_init: np.ndarray,
    tol: float = 1e-10,
    max_iters: int = 10_000,
) -> FixedPointResult:
    """Iterate the deterministic closed loop until the state self-reproduces.

    Stops when the max-norm update falls to ``tol``.  Non-convergence is
    reported in the result (converged=False), not raised.
    """
    x = np.asarray(x_init, dtype=np.float64).copy()
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iters + 1):
        x_next = closed_loop_map(x, params, weights, a_opp)
        residual = float(np.max(np.abs(x_next - x)))
        x = x_next
        if residual <= tol:
            break
    converged = residual <= tol
    return FixedPointResult(
        x_star=x,
        a_star=readout(x, weights),
        iterations=iterations,
        residual=residual,
        converged=converged,
    )


def closed_loop_jacobian(
    params: ReservoirParams, weights: ReadoutWeights, x_star: np.ndarray
) -> StabilityReport:
    """Jacobian of the closed-loop map at a fixed point, with its stability.

    J = diag(1 - x*^2) (W + w_in_own sigma'(z) w_out^T) where z is the
    readout pre-activation at the fixed point; the rank-one term is the
    feedback of the agent's own action through the input column.
    """
    z = float(weights.w_out @ x_star) + weights.b_out
    s = float(expit(z))
    sigma_prime = s * (1.0 - s)
    rank_one = np.outer(params.w_in[:, 0], sigma_prime * weights.w_out)
    jac = (1.0 - np.asarray(x_star) ** 2)[:, None] * (params.w + rank_one)
    rho_eff = spectral_radius(jac)
    return StabilityReport(jacobian=jac, rho_eff=rho_eff, stable=rho_eff < 1.0)


@dataclass(frozen=True)
class KlEstimate:
    """Nearest-neighbour KL estimate with its unfloored value and jitter flag."""

    value: float
    raw: float
    jittered: bool


def _kth_nn_sqdist(points: np.ndarray, reference: np.ndarray, k: int, exclude_self: bool) -> np.ndarray:
    """Squared distance from each point to its k-th nearest reference point."""
    p_sq = np.sum(points * points, axis=1)
    r_sq = np.sum(reference * reference, axis=1)
    d2 = p_sq[:, None] + r_sq[None, :] - 2.0 * (points @ reference.T)
    np.maximum(d2, 0.0, out=d2)
    if exclude_self:
        np.fill_diagonal(d2, np.inf)
    order = k - 1
    return np.partition(d2, order, axis=1)[:, order]


def kl_knn_details(p_sample: np.ndarray, q_sample: np.ndarray, k: int = 5) -> KlEstimate:
    """k-nearest-neighbour KL divergence estimate D(p || q) with metadata.

    D = (d/n) sum_i log(s_k(x_i) / r_k(x_i)) + log(m / (n - 1)), where r_k
    is the k-th neighbour distance of x_i within the p sample (self
    excluded) and s_k within the q sample.  Exact brute-force neighbour
    search.  Coincident points that produce zero distances trigger a
    deterministic uniform jitter at 1e-12 scale, flagged in the result.
    Estimates below zero are floored; the raw value is retained.
    """
    p = np.ascontiguousarray(p_sample, dtype=np.float64)
    q = np.ascontiguousarray(q_sample, dtype=np.float64)
    if p.ndim != 2 or q.ndim != 2 or p.shape[1] != q.shape[1]:
        raise ValueError(f"samples must be 2-d with equal width, got {p.shape} and {q.shape}")
    n, d = p.shape
    m = q.shape[0]
    if k < 1 or n <= k or m <= k:
        raise ValueError(f"need sample sizes above k={k}, got n={n}, m={m}")

    jittered = False
    for _ in range(2):
        r2 = _kth_nn_sqdist(p, p, k, exclude_self=True)
        s2 = _kth_nn_sqdist(p, q, k, exclude_self=False)
        if np.all(r2 > 0.0) and np.all(s2 > 0.0):
            break
        jitter_rng = np.random.default_rng(0)
        p = p + jitter_rng.uniform(-1e-12, 1e-12, size=p.shape)
        q = q + jitter_rng.uniform(-1e-12, 1e-12, size=q.shape)
        jittered = True
    else:
        raise ValueError("duplicate points persist after jitter; cannot estimate KL")

    # log(s/r) = (log s^2 - log r^2) / 2 avoids the square roots entirely.
    raw = float((d / n) * 0.5 * np.sum(np.log(s2) - np.log(r2)) + np.log(m / (n - 1)))
    return KlEstimate(value=max(0.0, raw), raw=raw, jittered=jittered)


def kl_knn(p_sample: np.ndarray, q_sample: np.ndarray, k: int = 5) -> float:
    """Floored k-nearest-neighbour KL divergence estimate D(p || q)."""
    return kl_knn_details(p_sample, q_sample, k).value


def kl_gaussian(
    p_sample: np.ndarray,
    q_sample: np.ndarray,
    ridge: float = 1e-8,
    max_condition: float = 1e12,
) -> float:
    """Multivariate-Gaussian KL divergence D(p || q) fitted by sample moments.

    Includes the mean-difference term.  Covariances are stabilised with a
    small ridge; a conditioning failure raises CovarianceError carrying the
    condition number.  Used as a cross-check, not the primary estimator.
    """
    p = np.asarray(p_sample, dtype=np.float64)
    q = np.asarray(q_sample, dtype=np.float64)
    if p.ndim != 2 or q.ndim != 2 or p.shape[1] != q.shape[1]:
        raise ValueError(f"samples must be 2-d with equal width, got {p.shape} and {q.shape}")
    d = p.shape[1]
    mu_p, mu_q = p.mean(axis=0), q.mean(axis=0)
    cov_p = np.cov(p, rowvar=False).reshape(d, d) + ridge * np.eye(d)
    cov_q = np.cov(q, rowvar=False).reshape(d, d) + ridge * np.eye(d)
    cond = float(np.linalg.cond(cov_q))
    if not np.isfinite(cond) or cond > max_condition:
        raise CovarianceError(
            f"reference covariance condition number {cond:.3e} exceeds {max_condition:.1e}", cond
        )
    solved = np.linalg.solve(cov_q, cov_p)
    diff = mu_p - mu_q
    mahalanobis = float(diff @ np.linalg.solve(cov_q, diff))
    sign_q, logdet_q = np.linalg.slogdet(cov_q)
    sign_p, logdet_p = np.linalg.slogdet(cov_p)
    if sign_q <= 0 or sign_p <= 0:
        raise CovarianceError("covariance not positive definite after ridge", cond)
    return 0.5 * (float(np.trace(solved)) + mahalanobis - d + logdet_q - logdet_p)


def action_variance(actions: np.ndarray, burn_in: int = 0) -> float:
    """Unbiased sample variance of the post-burn-in actions."""
    tail = np.asarray(actions, dtype=np.float64)[burn_in:]
    if tail.size < 2:
        raise ValueError(f"need at least two post-burn-in actions, got {tail.size}")
    return float(np.var(tail, ddof=1))


def free_energy(mean_payoff: float, kl: float, lam: float) -> float:
    """Negative mean payoff plus lam times the complexity cost."""
    if kl < 0:
        raise ValueError(f"kl must be nonnegative, got {kl}")
    if lam < 0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    return -mean_payoff + lam * kl


def detection_time(alpha_trace: np.ndarray, onset: int, threshold: float) -> int | None:
    """Rounds from ``onset`` until the receptivity first reaches ``threshold``.

    Smallest delta >= 0 with alpha_trace[onset + delta] <= threshold, or
    None if the trace never gets there.
    """
    trace = np.asarray(alpha_trace, dtype=np.float64)
    if not (0 <= onset < trace.size):
        raise ValueError(f"onset {onset} outside trace of length {trace.size}")
    below = np.nonzero(trace[onset:] <= threshold)[0]
    return int(below[0]) if below.size else None


def recovery_time(
    action_trace: np.ndarray,
    perturbation_end: int,
    reference: float,
    fraction: float = 0.95,
    sustain: int = 5,
) -> int | None:
    """Rounds after a perturbation until output regains ``fraction`` of reference.

    Recovery requires the action to hold at or above fraction * reference
    for ``sustain`` consecutive rounds (guards against single noise spikes);
    the returned delta indexes the first round of that window.  None if no
    qualifying window fits inside the trace.
    """
    trace = np.asarray(action_trace, dtype=np.float64)
    if not (0 <= perturbation_end <= trace.size):
        raise ValueError(f"perturbation_end {perturbation_end} outside trace of length {trace.size}")
    threshold = fraction * reference
    tail = trace[perturbation_end:]
    ok = tail >= threshold
    if tail.size < sustain:
        return None
    windows = np.lib.stride_tricks.sliding_window_view(ok, sustain)
    hits = np.nonzero(windows.all(axis=1))[0]
    return int(hits[0]) if hits.size else None
