"""Desk-scale laboratory for looped (depth-recurrent) transformer models.

The package bundles a minimal numpy-backed autodiff engine with tangent
propagation, a weight-shared looped transformer with configurable
normalization placement, latent-trajectory diagnostics (convergence, PCA,
spectral-radius probing), a trainer that couples random loop-depth sampling
with Jacobian spectral-radius regularization, and a multi-digit addition
testbed plus CLI driving it all.
"""

__version__ = "0.1.0"

from .autodiff import (
    DualTensor,
    Graph,
    Tensor,
    finite_diff_jvp,
    jvp_forward,
    ops,
    precision_mode,
    set_precision,
)
from .addition import (
    ArithVocab,
    DatasetSpec,
    Sample,
    VOCAB,
    eval_sweep,
    exact_match_eval,
    generate_dataset,
)
from .config import DataConfig, EvalConfig, ExperimentConfig
from .dynamics import (
    ConvergenceReport,
    PCAResult,
    SpectralProbe,
    estimate_spectral_radius,
    pca_project,
    trajectory_stats,
)
from .model import (
    ModelConfig,
    NormOperator,
    NormPlacement,
    Parameters,
    Trajectory,
    forward,
    init_parameters,
    load_checkpoint,
    recurrent_block,
    save_checkpoint,
)
from .training import (
    AdamState,
    Batch,
    LoopDistribution,
    StepMetrics,
    TrainConfig,
    jsrr_loss,
    l2_consistency_loss,
    optimizer_update,
    sample_loop_depth,
    sample_loop_depths,
    sft_loss,
    stars_step,
)

__all__ = [
    "AdamState",
    "ArithVocab",
    "Batch",
    "ConvergenceReport",
    "DataConfig",
    "DatasetSpec",
    "DualTensor",
    "EvalConfig",
    "ExperimentConfig",
    "Graph",
    "LoopDistribution",
    "ModelConfig",
    "NormOperator",
    "NormPlacement",
    "PCAResult",
    "Parameters",
    "Sample",
    "SpectralProbe",
    "StepMetrics",
    "Tensor",
    "TrainConfig",
    "Trajectory",
    "VOCAB",
    "estimate_spectral_radius",
    "eval_sweep",
    "exact_match_eval",
    "finite_diff_jvp",
    "forward",
    "generate_dataset",
    "init_parameters",
    "jsrr_loss",
    "jvp_forward",
    "l2_consistency_loss",
    "load_checkpoint",
    "ops",
    "optimizer_update",
    "pca_project",
    "precision_mode",
    "recurrent_block",
    "sample_loop_depth",
    "sample_loop_depths",
    "save_checkpoint",
    "set_precision",
    "sft_loss",
    "stars_step",
    "trajectory_stats",
]
