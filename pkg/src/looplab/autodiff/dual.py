"""Tangent-augmented (primal, tangent) pairs and Jacobian-vector products.

A :class:`DualTensor` carries a primal value together with a directional
derivative. Primitive ops propagate both: the primal through their normal
path and the tangent through a rule composed of the same primitives, so the
tangent output is an ordinary graph tensor and reverse mode applies to any
scalar built from it. That is exactly the path needed to differentiate a
``|Jv|^2`` penalty with respect to model parameters.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import ContractError, ShapeMismatchError
from .tensor import Tensor, as_tensor, suspend_graph, zeros_like


class DualTensor:
    """Primal value paired with its tangent (``None`` means all-zero)."""

    __slots__ = ("primal", "tangent")

    def __init__(self, primal: Tensor, tangent: Tensor | None):
        if tangent is not None and tangent.shape != primal.shape:
            raise ShapeMismatchError("dual", primal.shape, tangent.shape)
        self.primal = primal
        self.tangent = tangent

    @property
    def shape(self) -> tuple[int, ...]:
        return self.primal.shape

    @property
    def ndim(self) -> int:
        return self.primal.ndim

    def tangent_or_zeros(self) -> Tensor:
        return self.tangent if self.tangent is not None else zeros_like(self.primal)

    def __repr__(self) -> str:
        has = "0" if self.tangent is None else "set"
        return f"DualTensor(shape={self.shape}, tangent={has})"

    # Arithmetic operators are installed by looplab.autodiff.ops.


def jvp_forward(fn: Callable, state, tangent) -> DualTensor:
    """Evaluate ``fn`` at ``state`` while pushing a tangent through it.

    Returns a dual whose primal is ``fn(state)`` and whose tangent equals
    ``J v`` for ``J`` the Jacobian of ``fn`` at ``state`` and ``v`` the given
    tangent. ``fn`` must be composed of this package's ops.
    """
    s = as_tensor(state)
    v = as_tensor(tangent)
    if s.shape != v.shape:
        raise ShapeMismatchError("jvp_forward", s.shape, v.shape)
    out = fn(DualTensor(s, v))
    if isinstance(out, DualTensor):
        return DualTensor(out.primal, out.tangent_or_zeros())
    # fn ignored its argument: the Jacobian is zero.
    prim = as_tensor(out)
    return DualTensor(prim, zeros_like(prim))


def finite_diff_jvp(fn: Callable, state, tangent, step: float) -> Tensor:
    """Central-difference estimate of ``J v``; the oracle for jvp_forward.

    Runs with graph recording suspended, so it never pollutes a surrounding
    training tape.
    """
    if not step > 0:
        raise ContractError(f"finite_diff_jvp: step must be positive, got {step}")
    s = as_tensor(state).data
    v = np.asarray(as_tensor(tangent).data, dtype=s.dtype)
    if s.shape != v.shape:
        raise ShapeMismatchError("finite_diff_jvp", s.shape, v.shape)
    with suspend_graph():
        plus = as_tensor(fn(Tensor(s + step * v))).data
        minus = as_tensor(fn(Tensor(s - step * v))).data
    return Tensor((plus - minus) / (2.0 * step))
