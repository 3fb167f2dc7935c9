"""Dense tensors plus a define-by-run differentiation tape.

The engine keeps one global precision mode (32- or 64-bit floats) and an
optional active :class:`Graph`. When a graph is active, every primitive op
appends one node holding its parents and an adjoint rule; a single reverse
sweep over the tape then yields gradients for all tracked leaves. Outside a
graph the same ops execute as plain numpy calls.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import ContractError

_CONFIG = {
    "dtype": np.float64,
    "finite_checks": True,
}

# Stack of active graphs; ops record onto the top entry only.
_GRAPH_STACK: list["Graph"] = []


def set_precision(bits: int) -> None:
    """Select the global float width (32 or 64). Affects new tensors only."""
    if bits == 32:
        _CONFIG["dtype"] = np.float32
    elif bits == 64:
        _CONFIG["dtype"] = np.float64
    else:
        raise ValueError(f"precision must be 32 or 64, got {bits!r}")


def precision() -> int:
    return 64 if _CONFIG["dtype"] is np.float64 else 32


def dtype() -> type:
    return _CONFIG["dtype"]


def set_finite_checks(enabled: bool) -> None:
    """Toggle per-op NaN/Inf detection (on by default)."""
    _CONFIG["finite_checks"] = bool(enabled)


def finite_checks_enabled() -> bool:
    return _CONFIG["finite_checks"]


@contextlib.contextmanager
def precision_mode(bits: int):
    """Temporarily switch float width; restores the previous mode on exit."""
    prev = precision()
    set_precision(bits)
    try:
        yield
    finally:
        set_precision(prev)


class Tensor:
    """A dense numeric array, optionally tracked by the active graph.

    Tensors compare and hash by identity; elementwise comparisons live in
    numpy land via ``.data``.
    """

    __slots__ = ("data", "requires_grad", "name", "_node")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=_CONFIG["dtype"])
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._node: tuple["Graph", int] | None = None

    @classmethod
    def _wrap(cls, data: np.ndarray) -> "Tensor":
        # Internal fast path: data already has the engine dtype.
        out = cls.__new__(cls)
        out.data = data
        out.requires_grad = False
        out.name = None
        out._node = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """A constant view of this tensor, cut loose from any graph."""
        return Tensor._wrap(self.data)

    def copy(self) -> "Tensor":
        t = Tensor._wrap(self.data.copy())
        t.requires_grad = self.requires_grad
        t.name = self.name
        return t

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        grad = " grad" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{tag}{grad})"

    # Arithmetic operators are installed by looplab.autodiff.ops at import
    # time so that this module stays free of op definitions.


class Node:
    """One tape entry: an op, its parent indices, and its adjoint rule."""

    __slots__ = ("op", "parents", "vjp", "leaf")

    def __init__(self, op, parents, vjp, leaf):
        self.op = op
        self.parents = parents  # tuple[int | None, ...], smaller indices only
        self.vjp = vjp  # Callable[[np.ndarray], Sequence[np.ndarray | None]]
        self.leaf = leaf  # Tensor for leaves, else None


class Graph:
    """Append-only computation tape for one forward/backward cycle.

    Use as a context manager; ops executed inside record nodes. Parents
    always precede children, so one reverse index sweep visits every node
    exactly once.
    """

    def __init__(self) -> None:
        self.nodes: list[Node] = []

    def __enter__(self) -> "Graph":
        _GRAPH_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _GRAPH_STACK.pop()
        assert popped is self, "graph contexts must nest properly"

    def __len__(self) -> int:
        return len(self.nodes)

    def index_for(self, t: Tensor) -> int | None:
        """Node index of ``t`` in this graph, registering leaves on demand.

        Returns None for constants (untracked tensors)."""
        rec = t._node
        if rec is not None and rec[0] is self:
            return rec[1]
        if t.requires_grad:
            idx = len(self.nodes)
            self.nodes.append(Node("leaf", (), None, t))
            t._node = (self, idx)
            return idx
        return None

    def append(self, op: str, parents: tuple, vjp: Callable, out: Tensor) -> None:
        idx = len(self.nodes)
        self.nodes.append(Node(op, parents, vjp, None))
        out._node = (self, idx)

    def backward(
        self,
        loss: Tensor,
        wrt: Iterable[Tensor] | None = None,
    ) -> dict[Tensor, np.ndarray]:
        """Reverse-mode sweep from a scalar loss.

        Returns a map from leaf tensor to its gradient array. Tensors listed
        in ``wrt`` that the loss never touched map to zeros.
        """
        if loss.data.size != 1:
            raise ContractError(
                f"backward: loss must be scalar, got shape {loss.shape}"
            )
        grads: dict[Tensor, np.ndarray] = {}
        rec = loss._node
        if rec is not None and rec[0] is self:
            stop = rec[1] + 1
            adjoint: list[np.ndarray | None] = [None] * stop
            adjoint[stop - 1] = np.ones_like(loss.data)
            for i in range(stop - 1, -1, -1):
                a = adjoint[i]
                adjoint[i] = None  # free as we go
                if a is None:
                    continue
                node = self.nodes[i]
                if node.leaf is not None:
                    grads[node.leaf] = a
                    continue
                for p, g in zip(node.parents, node.vjp(a)):
                    if p is None or g is None:
                        continue
                    adjoint[p] = g if adjoint[p] is None else adjoint[p] + g
        if wrt is not None:
            for t in wrt:
                if t not in grads:
                    grads[t] = np.zeros_like(t.data)
        return grads


def active_graph() -> Graph | None:
    return _GRAPH_STACK[-1] if _GRAPH_STACK else None


@contextlib.contextmanager
def suspend_graph():
    """Run a code block with recording switched off (evaluation mode)."""
    saved = list(_GRAPH_STACK)
    _GRAPH_STACK.clear()
    try:
        yield
    finally:
        _GRAPH_STACK.extend(saved)


def as_tensor(x) -> Tensor:
    """Coerce arrays and python scalars to (constant) tensors."""
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def zeros(shape) -> Tensor:
    return Tensor._wrap(np.zeros(shape, dtype=_CONFIG["dtype"]))


def zeros_like(t: Tensor) -> Tensor:
    return Tensor._wrap(np.zeros_like(t.data))
