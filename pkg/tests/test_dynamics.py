"""Trajectory diagnostics: convergence verdicts, PCA, spectral probing."""

import numpy as np
import pytest

from looplab import (
    Tensor,
    estimate_spectral_radius,
    ops,
    pca_project,
    trajectory_stats,
)
from looplab.dynamics import spectral_radius_batch, total_variance
from looplab.errors import ContractError
from looplab.model import Trajectory

from helpers import assert_close

RNG = np.random.default_rng(314)


def traj_from(states):
    return Trajectory(states=[np.asarray(s, dtype=float) for s in states], input_tokens=[0])


def linear_map(matrix):
    """x -> A x as a state map (row vector against the transposed matrix)."""
    m = Tensor(np.asarray(matrix, dtype=float))

    def fn(x):
        flat = ops.reshape(x, (1, x.shape[-1])) if x.ndim == 1 else x
        out = ops.matmul(flat, ops.transpose(m))
        return ops.reshape(out, x.shape)

    return fn


# ---------------------------------------------------------------------------
# convergence reports
# ---------------------------------------------------------------------------


def test_constant_trajectory_converges_at_zero():
    h = RNG.standard_normal((3, 4))
    rep = trajectory_stats(traj_from([h] * 6))
    assert rep.verdict == "converged"
    assert rep.first_converged_step == 0
    assert all(d == 0.0 for d in rep.deltas)


def test_linear_growth_diverges():
    u = RNG.standard_normal(8)
    u /= np.linalg.norm(u)
    rep = trajectory_stats(traj_from([t * u for t in range(64)]), div_factor=10.0)
    assert rep.verdict == "diverged"


def test_oscillation_is_wandering():
    a = RNG.standard_normal(6)
    b = a + 0.5
    rep = trajectory_stats(traj_from([a, b] * 8))
    assert rep.verdict == "wandering"


def test_late_convergence_reports_first_step():
    u = np.ones(4)
    states = [u * (1 + 2.0 ** (-t)) for t in range(12)]
    rep = trajectory_stats(traj_from(states), tol=1e-2)
    assert rep.verdict == "converged"
    assert rep.first_converged_step is not None and rep.first_converged_step > 0


def test_short_trajectory_rejected():
    with pytest.raises(ContractError):
        trajectory_stats(traj_from([np.ones(3)]))


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------


def test_pca_rank_one_line():
    u = RNG.standard_normal(10)
    states = [t * u for t in range(6)]
    res = pca_project(traj_from(states))
    assert res.explained_variance[1] <= 1e-12
    # projections must be collinear: second column all ~0 after centering
    assert np.abs(res.projections[:, 1]).max() <= 1e-8


def test_pca_recovers_a_planted_plane():
    d = 24
    e1 = np.zeros(d)
    e1[0] = 1.0
    e2 = np.zeros(d)
    e2[3] = 1.0
    const = RNG.standard_normal(d) * 0.5
    coeffs = RNG.standard_normal((12, 2)) * [3.0, 1.5]
    states = [a * e1 + b * e2 + const for a, b in coeffs]
    res = pca_project(traj_from(states))
    # principal angle between recovered and planted subspaces
    basis = np.stack([e1, e2]).T  # (d, 2)
    q, _ = np.linalg.qr(basis)
    proj = res.components @ q  # (2, 2)
    angles = np.arccos(np.clip(np.linalg.svd(proj, compute_uv=False), -1, 1))
    assert angles.max() <= 1e-6


def test_pca_variance_accounting_matches_eigen_oracle():
    states = [RNG.standard_normal(9) for _ in range(8)]
    res = pca_project(traj_from(states))
    x = np.stack(states)
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / len(states)
    eigs = np.sort(np.linalg.eigvalsh(cov))[::-1]
    assert_close(res.explained_variance, eigs[:2], rtol=1e-9, atol=1e-12)
    assert abs(eigs.sum() - total_variance(traj_from(states))) <= 1e-9


def test_pca_components_maximize_variance():
    states = [RNG.standard_normal(12) for _ in range(10)]
    res = pca_project(traj_from(states))
    x = np.stack(states)
    centered = x - x.mean(axis=0)
    top = res.projections[:, 0].var()
    for _ in range(1000):
        direction = RNG.standard_normal(12)
        direction /= np.linalg.norm(direction)
        assert (centered @ direction).var() <= top + 1e-8


def test_pca_degenerate_trajectory():
    h = RNG.standard_normal(5)
    res = pca_project(traj_from([h] * 4))
    assert res.components is None
    assert np.all(res.explained_variance == 0)
    assert np.all(res.projections == 0)


def test_pca_needs_three_states():
    with pytest.raises(ContractError):
        pca_project(traj_from([np.ones(3), np.ones(3)]))


# ---------------------------------------------------------------------------
# spectral probe
# ---------------------------------------------------------------------------


def test_probe_single_step_hand_value():
    fn = linear_map(np.diag([2.0, 1.0]))
    v0 = np.array([1.0, 1.0]) / np.sqrt(2.0)
    probe = estimate_spectral_radius(fn, np.zeros(2), 1, v0=v0)
    assert_close(probe.rho_estimate, np.sqrt(2.5), rtol=1e-9, atol=1e-12)
    assert probe.k_steps == 1
    assert abs(np.linalg.norm(probe.direction) - 1.0) <= 1e-6


def test_probe_converges_to_dominant_eigenvalue():
    fn = linear_map(np.diag([2.0, 1.0]))
    probe = estimate_spectral_radius(fn, np.zeros(2), 200, seed=0)
    assert abs(probe.rho_estimate - 2.0) <= 1e-6


def test_probe_identity_map():
    for k in (1, 3, 50):
        probe = estimate_spectral_radius(lambda x: x, np.zeros(7), k, seed=k)
        assert abs(probe.rho_estimate - 1.0) <= 1e-9


def test_probe_sign_and_seed_invariance():
    a = RNG.standard_normal((6, 6))
    fn = linear_map(a @ a.T)
    v0 = RNG.standard_normal(6)
    p_plus = estimate_spectral_radius(fn, np.zeros(6), 4, v0=v0)
    p_minus = estimate_spectral_radius(fn, np.zeros(6), 4, v0=-v0)
    assert_close(p_plus.rho_estimate, p_minus.rho_estimate, rtol=1e-12, atol=0)
    p1 = estimate_spectral_radius(fn, np.zeros(6), 200, seed=1)
    p2 = estimate_spectral_radius(fn, np.zeros(6), 200, seed=2)
    assert abs(p1.rho_estimate - p2.rho_estimate) <= 1e-4 * p1.rho_estimate


def test_probe_matches_eigen_oracle_on_psd_matrices():
    for trial in range(5):
        rng = np.random.default_rng(trial)
        n = int(rng.integers(4, 33))
        b = rng.standard_normal((n, n))
        a = b.T @ b
        want = float(np.linalg.eigvalsh(a).max())
        probe = estimate_spectral_radius(linear_map(a), np.zeros(n), 200, seed=trial)
        assert abs(probe.rho_estimate - want) <= 1e-4 * want


def test_probe_requires_positive_steps():
    with pytest.raises(ContractError):
        estimate_spectral_radius(lambda x: x, np.zeros(3), 0, seed=0)


def test_zero_jacobian_yields_zero_estimate():
    const = Tensor(np.ones(4))
    probe = estimate_spectral_radius(lambda x: ops.mul(const, 1.0), np.zeros(4), 1, seed=0)
    assert probe.rho_estimate == 0.0


def test_batch_probe_identity_map():
    rng = np.random.default_rng(0)
    states = rng.standard_normal((5, 3, 4))
    rho = spectral_radius_batch(lambda x: x, states, 3, rng)
    assert rho.shape == (5,)
    assert_close(rho, np.ones(5), rtol=1e-9, atol=1e-9)
