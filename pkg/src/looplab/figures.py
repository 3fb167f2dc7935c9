"""Figure rendering for run artifacts.

Every report path that writes a delimited table or JSON document also drops
a rendered PNG next to it. Plots stay deliberately plain: log-depth axes
where depth is swept, one panel per quantity.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_training_curves(rows: list[dict], path) -> Path:
    """Loss components and gradient norm against the step index."""
    steps = [r["step"] for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(steps, [r["sft_loss"] for r in rows], label="cross entropy", lw=1)
    if any(r["jsrr_loss"] for r in rows):
        ax1.plot(steps, [r["jsrr_loss"] for r in rows], label="|Jv|^2", lw=1)
    if any(r["l2_loss"] for r in rows):
        ax1.plot(steps, [r["l2_loss"] for r in rows], label="consistency", lw=1)
    ax1.set_xlabel("step")
    ax1.set_ylabel("loss")
    ax1.set_yscale("log")
    ax1.legend(fontsize=8)
    ax2.plot(steps, [r["gradient_norm"] for r in rows], lw=1, color="tab:red")
    ax2.set_xlabel("step")
    ax2.set_ylabel("gradient norm")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_sweep(points, path) -> Path:
    """Accuracy and latent-state statistics across test-time depth."""
    ts = [p.t for p in points]
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))
    axes[0].plot(ts, [p.accuracy for p in points], "o-")
    axes[0].set_ylabel("exact match accuracy")
    axes[0].set_ylim(-0.02, 1.02)
    axes[1].plot(ts, [p.mean_state_norm for p in points], "o-", color="tab:orange")
    axes[1].set_ylabel("mean per-token state norm")
    axes[2].plot(
        ts, [p.mean_rho_estimate for p in points], "o-", color="tab:green",
        label="spectral radius est.",
    )
    axes[2].plot(
        ts,
        [p.mean_successive_delta for p in points],
        "s--",
        color="tab:purple",
        label="successive delta",
    )
    axes[2].axhline(1.0, color="gray", lw=0.8, ls=":")
    axes[2].legend(fontsize=8)
    for ax in axes:
        ax.set_xscale("log", base=2)
        ax.set_xlabel("loop iterations t")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_analysis(doc: dict, path) -> Path:
    """PCA trajectory, norm/delta evolution, and the spectral-radius series."""
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))
    proj = np.asarray(doc["pca"]["projections"], dtype=float)
    if proj.size:
        axes[0].plot(proj[:, 0], proj[:, 1], "-", lw=0.8, color="lightgray")
        sc = axes[0].scatter(
            proj[:, 0], proj[:, 1], c=range(len(proj)), cmap="viridis", s=14
        )
        fig.colorbar(sc, ax=axes[0], label="iteration")
    axes[0].set_xlabel("component 1")
    axes[0].set_ylabel("component 2")
    axes[0].set_title(doc.get("input", ""), fontsize=9)

    steps = [row["t"] for row in doc["trajectory"]]
    norms = [row["state_norm"] for row in doc["trajectory"]]
    deltas = [row["delta"] for row in doc["trajectory"]]
    axes[1].plot(steps, norms, label="state norm")
    axes[1].plot(
        steps[1:], [d for d in deltas if d is not None], label="successive delta"
    )
    axes[1].set_xlabel("iteration")
    axes[1].set_yscale("log")
    axes[1].legend(fontsize=8)
    axes[1].set_title(f"verdict: {doc['convergence']['verdict']}", fontsize=9)

    rho = [p["rho_estimate"] for p in doc["probes"]]
    axes[2].plot([p["at_iteration"] for p in doc["probes"]], rho, color="tab:green")
    axes[2].axhline(1.0, color="gray", lw=0.8, ls=":")
    axes[2].set_xlabel("iteration")
    axes[2].set_ylabel("spectral radius estimate")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_lambda_sweep(curves: dict, path) -> Path:
    """Accuracy-over-depth, one line per regularization weight."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for lam in sorted(curves):
        points = curves[lam]
        ax.plot(
            [p.t for p in points],
            [p.accuracy for p in points],
            "o-",
            label=f"weight {lam:g}",
        )
    ax.set_xscale("log", base=2)
    ax.set_xlabel("loop iterations t")
    ax.set_ylabel("exact match accuracy")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
