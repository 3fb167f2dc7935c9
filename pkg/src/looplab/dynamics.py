"""Diagnostics over latent trajectories.

Covers convergence bookkeeping (is the iterated state settling, blowing up,
or wandering?), a two-component PCA projection of the visited states for
visualization, and a power-iteration probe that estimates the spectral
radius of the recurrent map's Jacobian at a given state via
Jacobian-vector products.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .autodiff import Tensor, as_tensor, jvp_forward, suspend_graph
from .errors import ContractError
from .model import Trajectory

NORM_GUARD = 1e-12

DEFAULT_CONV_TOL = 1e-4
DEFAULT_CONV_WINDOW = 3
DEFAULT_DIV_FACTOR = 10.0


@dataclass
class ConvergenceReport:
    """Verdict plus the norm/delta series that justify it."""

    verdict: str  # "converged" | "diverged" | "wandering"
    state_norms: list[float]
    deltas: list[float]
    first_converged_step: int | None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "state_norms": self.state_norms,
            "deltas": self.deltas,
            "first_converged_step": self.first_converged_step,
        }


@dataclass
class PCAResult:
    """Top-2 principal directions of a trajectory's flattened states.

    ``components`` is None when the trajectory is degenerate (zero
    covariance); the explained variances are then reported as zeros.
    """

    components: np.ndarray | None  # (2, D), orthonormal rows
    projections: np.ndarray  # (n_steps, 2)
    explained_variance: np.ndarray  # (2,), descending

    def to_dict(self) -> dict:
        return {
            "projections": self.projections.tolist(),
            "explained_variance": self.explained_variance.tolist(),
        }


@dataclass
class SpectralProbe:
    """Power-iteration estimate of the spectral radius at one state."""

    rho_estimate: float
    k_steps: int
    direction: np.ndarray  # final unit vector, state-shaped
    at_iteration: int | None = None

    def to_dict(self) -> dict:
        return {
            "rho_estimate": self.rho_estimate,
            "k_steps": self.k_steps,
            "at_iteration": self.at_iteration,
        }


def trajectory_stats(
    traj: Trajectory,
    tol: float = DEFAULT_CONV_TOL,
    window: int = DEFAULT_CONV_WINDOW,
    div_factor: float = DEFAULT_DIV_FACTOR,
) -> ConvergenceReport:
    """Classify a trajectory as converged, diverged, or wandering.

    Converged means the relative successive delta stayed at or below ``tol``
    for the final ``window`` steps; diverged means some state norm reached
    ``div_factor`` times the initial norm; anything else is wandering.
    """
    states = [np.asarray(s, dtype=np.float64).reshape(-1) for s in traj.states]
    if len(states) < 2:
        raise ContractError("trajectory_stats: need at least 2 states")
    norms = [float(np.linalg.norm(s)) for s in states]
    deltas = [
        float(np.linalg.norm(b - a)) for a, b in zip(states[:-1], states[1:])
    ]
    rel = [d / max(1.0, n) for d, n in zip(deltas, norms[:-1])]

    w = min(window, len(rel))
    converged = all(r <= tol for r in rel[-w:])
    first = None
    if converged:
        first = len(rel)
        while first > 0 and rel[first - 1] <= tol:
            first -= 1
    if converged:
        verdict = "converged"
    elif max(norms) >= div_factor * norms[0]:
        verdict = "diverged"
    else:
        verdict = "wandering"
    return ConvergenceReport(verdict, norms, deltas, first)


def pca_project(traj: Trajectory) -> PCAResult:
    """Project a trajectory onto its top two principal directions.

    States are flattened, mean-centered, and decomposed; the components
    maximize projected variance by construction of the eigendecomposition.
    """
    if len(traj.states) < 3:
        raise ContractError("pca_project: need at least 3 states")
    x = np.stack([np.asarray(s, dtype=np.float64).reshape(-1) for s in traj.states])
    centered = x - x.mean(axis=0, keepdims=True)
    n = centered.shape[0]
    if not np.any(np.abs(centered) > 0):
        return PCAResult(None, np.zeros((n, 2)), np.zeros(2))
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:2]
    variance = (svals[:2] ** 2) / n
    if components.shape[0] < 2:  # rank-deficient direction count
        pad = np.zeros((2 - components.shape[0], centered.shape[1]))
        components = np.vstack([components, pad])
        variance = np.concatenate([variance, np.zeros(2 - variance.shape[0])])
    projections = centered @ components.T
    return PCAResult(components, projections, variance)


def total_variance(traj: Trajectory) -> float:
    """Mean squared centered norm; equals the covariance eigenvalue sum."""
    x = np.stack([np.asarray(s, dtype=np.float64).reshape(-1) for s in traj.states])
    centered = x - x.mean(axis=0, keepdims=True)
    return float((centered**2).sum() / centered.shape[0])


def estimate_spectral_radius(
    step_fn: Callable,
    state,
    k_steps: int,
    seed: int | None = None,
    rng: np.random.Generator | None = None,
    v0: np.ndarray | None = None,
    at_iteration: int | None = None,
    guard: float = NORM_GUARD,
) -> SpectralProbe:
    """Estimate the dominant Jacobian eigenvalue modulus of a state map.

    Runs ``k_steps`` of power iteration, each step pushing the current
    direction through one Jacobian-vector product of ``step_fn`` at
    ``state`` and renormalizing with an additive guard. Evaluation only: no
    graph is recorded.
    """
    if k_steps < 1:
        raise ContractError(f"k_steps must be >= 1, got {k_steps}")
    h = as_tensor(state)
    if rng is None:
        rng = np.random.default_rng(seed)
    with suspend_graph():
        if v0 is None:
            v = rng.standard_normal(h.shape)
        else:
            v = np.array(v0, dtype=float).reshape(h.shape)
        v = v / (np.linalg.norm(v) + guard)
        rho = 0.0
        for _ in range(k_steps):
            j = jvp_forward(step_fn, h, Tensor(v)).tangent.data
            rho = float(np.linalg.norm(j))
            v = j / (rho + guard)
    return SpectralProbe(rho, k_steps, v, at_iteration)


def spectral_radius_batch(
    step_fn: Callable,
    states,
    k_steps: int,
    rng: np.random.Generator,
    guard: float = NORM_GUARD,
) -> np.ndarray:
    """Per-sample spectral-radius estimates for a (B, ...) stack of states.

    Directions are drawn and normalized per sample; ``step_fn`` must map the
    whole batch at once.
    """
    h = as_tensor(states)
    axes = tuple(range(1, h.ndim))
    with suspend_graph():
        v = rng.standard_normal(h.shape)
        v = v / (np.sqrt((v**2).sum(axis=axes, keepdims=True)) + guard)
        rho = None
        for _ in range(k_steps):
            j = jvp_forward(step_fn, h, Tensor(v)).tangent.data
            rho = np.sqrt((j**2).sum(axis=axes))
            v = j / (rho.reshape(rho.shape + (1,) * len(axes)) + guard)
    return rho
