"""Stability-based robust mean estimation and its supporting pieces.

The core routine keeps a weight per point, repeatedly finds the top
direction of the weighted covariance, scores points by their squared
projection onto it, and multiplicatively downweights the high scorers
until the surviving weight drops below 1 - 2*epsilon.  On an
epsilon-corrupted version of a stable point set this recovers the stable
mean up to O(sigma * sqrt(epsilon)), dimension-free.

Everything is deterministic: the power iteration starts from a fixed
vector and the filter breaks ties by exact float comparisons, so
identical inputs give identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset

POWER_ITER_MAX = 1000
POWER_ITER_TOL = 1e-8


@dataclass
class FilterState:
    """Diagnostics of one filtering run.

    Weights start at 1/N each, only ever decrease, and stay in [0, 1/N];
    ``removed_mass_history`` records the weight removed per pass.
    """

    weights: np.ndarray
    iterations: int = 0
    removed_mass_history: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class StabilityReport:
    mean_deviation: float
    cov_opnorm: float
    is_stable: bool


def top_eigenvector(s: np.ndarray, *, tol: float = POWER_ITER_TOL, max_iters: int = POWER_ITER_MAX):
    """Top eigenpair of a symmetric PSD matrix by power iteration.

    Starts from the normalized all-ones vector (deterministic); stops at
    relative residual ||S v - lam v|| <= tol * lam or after max_iters.
    The zero matrix returns (e1, 0.0).
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError("matrix must be square")
    k = s.shape[0]
    if k == 0:
        return np.zeros(0), 0.0
    if np.max(np.abs(s - s.T)) > 1e-9 * max(1.0, np.max(np.abs(s))):
        raise ValueError("matrix must be symmetric (within 1e-9)")
    if not np.any(s):
        e1 = np.zeros(k)
        e1[0] = 1.0
        return e1, 0.0
    v = np.ones(k) / math.sqrt(k)
    lam = 0.0
    for start in range(k + 1):
        if start > 0:
            # all-ones start lay in the nullspace; fall back to a basis vector
            v = np.zeros(k)
            v[start - 1] = 1.0
        for _ in range(max_iters):
            u = s @ v
            nu = np.linalg.norm(u)
            if nu == 0.0:
                break
            v = u / nu
            lam = float(v @ (s @ v))
            if np.linalg.norm(s @ v - lam * v) <= tol * max(lam, np.finfo(float).tiny):
                return v, max(lam, 0.0)
        else:
            return v, max(lam, 0.0)
    return v, max(lam, 0.0)


def _weighted_moments(points: np.ndarray, q: np.ndarray, total: float):
    mu = (q @ points) / total
    centered = points - mu
    cov = (centered * q[:, None]).T @ centered / total
    return mu, centered, cov


def robust_mean_with_state(points, epsilon: float) -> tuple[np.ndarray, FilterState]:
    """Robust mean of an epsilon-corrupted point set, with diagnostics.

    Loop per pass: weighted mean and covariance; top eigenvector v of the
    covariance; scores h_i = (v . (x_i - mu))^2; the largest threshold t
    whose superlevel set {h >= t} carries weight mass >= epsilon; then
    every thresholded point is downweighted by the factor
    (1 - h_i / max h).  The pass ends when total weight < 1 - 2*epsilon.
    If every score is zero (e.g. all points identical) the loop exits
    immediately with the current weighted mean.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n, k = points.shape
    if not (0.0 < epsilon < 0.5):
        raise ValueError("epsilon must lie in (0, 0.5)")
    if n < 2:
        raise ValueError("need at least 2 points")
    q = np.full(n, 1.0 / n)
    state = FilterState(weights=q)
    if k == 0:
        return np.zeros(0), state
    mu = points.mean(axis=0)
    total = 1.0
    # scores at rounding-noise level mean the weighted cloud is a point
    score_floor = 1e-24 * max(1.0, float(np.max(np.abs(points))) ** 2)
    while total >= 1.0 - 2.0 * epsilon:
        mu, centered, cov = _weighted_moments(points, q, total)
        v, _ = top_eigenvector(cov)
        h = (centered @ v) ** 2
        alive = q > 0.0
        fmax = float(np.max(h[alive], initial=0.0))
        if fmax <= score_floor:
            break
        order = np.argsort(-h)
        cum = np.cumsum(q[order])
        cross = int(np.searchsorted(cum, epsilon, side="left"))
        cross = min(cross, n - 1)
        t = h[order[cross]]
        f = np.where(h >= t, h, 0.0)
        factor = 1.0 - f / fmax
        removed = float(np.sum(q * (1.0 - factor)))
        q = q * factor
        total = float(q.sum())
        state.iterations += 1
        state.removed_mass_history.append(removed)
    state.weights = q
    return mu, state


def robust_mean_estimation(points, epsilon: float) -> np.ndarray:
    """Robust mean of an epsilon-corrupted point set (0 < epsilon < 1/2)."""
    mu, _ = robust_mean_with_state(points, epsilon)
    return mu


def stability_check(points, mu, sigma2: float, epsilon: float, *, c_stab: float = 4.0) -> StabilityReport:
    """Bounded-covariance stability surrogate: the point set is stable
    when its mean sits within epsilon of mu and its covariance operator
    norm is at most c_stab * sigma2."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    mu = np.asarray(mu, dtype=float)
    mean_dev = float(np.linalg.norm(points.mean(axis=0) - mu))
    centered = points - points.mean(axis=0)
    cov = centered.T @ centered / points.shape[0]
    _, opnorm = top_eigenvector(cov)
    return StabilityReport(mean_dev, opnorm, mean_dev <= epsilon and opnorm <= c_stab * sigma2)


def stability_filter(data: Dataset, epsilon: float) -> np.ndarray:
    """Indices within distance 2 * sigma * sqrt(d / epsilon) of the
    sample mean.  On clean i.i.d. bounded-covariance data of adequate
    size this keeps at least a (1 - epsilon) fraction."""
    if not (0.0 < epsilon < 0.5):
        raise ValueError("epsilon must lie in (0, 0.5)")
    x = data.covariates
    if x.shape[1] == 0:
        return np.arange(data.n)
    radius = 2.0 * data.sigma * math.sqrt(x.shape[1] / epsilon)
    dist = np.linalg.norm(x - x.mean(axis=0), axis=1)
    return np.nonzero(dist <= radius)[0]


def trimmed_mean_1d(values, epsilon: float) -> float:
    """Mean after discarding the ceil(2 eps N) largest and smallest values."""
    values = np.asarray(values, dtype=float).ravel()
    if not (0.0 < epsilon < 0.25):
        raise ValueError("epsilon must lie in (0, 0.25)")
    n = values.size
    k = int(math.ceil(2.0 * epsilon * n))
    if 2 * k >= n:
        raise ValueError(f"trimming 2x{k} values leaves nothing of {n}")
    v = np.sort(values)
    return float(v[k : n - k].mean())


def trimmed_mean_estimation(points, epsilon: float) -> np.ndarray:
    """Coordinatewise trimmed mean; the cheap non-spectral baseline."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return np.array([trimmed_mean_1d(points[:, j], epsilon) for j in range(points.shape[1])])


class OracleContractError(ValueError):
    """The scaling sequence fed to the gradient oracle broke its bound."""


def inexact_hybrid_gradient_oracle(beta, covariates, epsilon: float, lipschitz: float) -> np.ndarray:
    """Robust estimate of (1/N) sum_i beta_i x_i for the underlying
    stable rows of an epsilon-corrupted covariate set.

    Requires |beta_i| <= 3 * lipschitz (a violation indicates a solver
    bug, not bad data) and epsilon < 1/4.  Scaling by a bounded sequence
    preserves stability, so this is robust mean estimation on the scaled
    points at corruption level 2*epsilon; the error is
    O(sigma * lipschitz * sqrt(epsilon)).
    """
    beta = np.asarray(beta, dtype=float)
    x = np.atleast_2d(np.asarray(covariates, dtype=float))
    if beta.shape != (x.shape[0],):
        raise ValueError("beta must have one entry per covariate row")
    bound = 3.0 * lipschitz
    worst = float(np.max(np.abs(beta), initial=0.0))
    if worst > bound * (1.0 + 1e-12):
        raise OracleContractError(f"max |beta_i| = {worst} exceeds {bound}")
    if not (0.0 < epsilon < 0.25):
        raise ValueError("epsilon must lie in (0, 0.25)")
    return robust_mean_estimation(beta[:, None] * x, 2.0 * epsilon)
