"""Minimal tensor engine: a reverse-mode tape plus tangent propagation."""

from . import ops
from .dual import DualTensor, finite_diff_jvp, jvp_forward
from .tensor import (
    Graph,
    Tensor,
    active_graph,
    as_tensor,
    dtype,
    precision,
    precision_mode,
    set_finite_checks,
    set_precision,
    suspend_graph,
    zeros,
    zeros_like,
)

__all__ = [
    "DualTensor",
    "Graph",
    "Tensor",
    "active_graph",
    "as_tensor",
    "dtype",
    "finite_diff_jvp",
    "jvp_forward",
    "ops",
    "precision",
    "precision_mode",
    "set_finite_checks",
    "set_precision",
    "suspend_graph",
    "zeros",
    "zeros_like",
]
