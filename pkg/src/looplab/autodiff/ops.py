"""Differentiable primitives and the composites built from them.

Each primitive supplies a numpy forward, an adjoint (VJP) rule consumed by
the reverse sweep, and a tangent (JVP) rule expressed through these same
public ops. Tangent rules therefore produce ordinary graph tensors, so
second-order quantities such as the parameter gradient of a squared
Jacobian-vector product fall out of one reverse sweep; no separate
dual-number runtime exists.

Composites (gelu, the norms, cross entropy, ...) are plain compositions of
primitives and inherit both rule sets for free.
"""

from __future__ import annotations

import math
import numbers

import numpy as np

from ..errors import (
    NumericOverflowError,
    ShapeMismatchError,
    UnsupportedOpError,
)
from .dual import DualTensor
from .tensor import (
    Tensor,
    active_graph,
    as_tensor,
    finite_checks_enabled,
    zeros,
)


def _check_finite(op: str, data: np.ndarray) -> None:
    if finite_checks_enabled() and not np.all(np.isfinite(data)):
        raise NumericOverflowError(op)


def _make(op: str, data: np.ndarray, inputs, vjp) -> Tensor:
    """Wrap a primitive result, recording a node when a graph is active."""
    _check_finite(op, data)
    out = Tensor._wrap(data)
    g = active_graph()
    if g is not None:
        parents = tuple(g.index_for(t) for t in inputs)
        if any(p is not None for p in parents):
            g.append(op, parents, vjp, out)
    return out


def _split(x):
    """(primal, tangent) view of an op argument; constants have no tangent."""
    if isinstance(x, DualTensor):
        return x.primal, x.tangent
    return x, None


def _is_dual(*args) -> bool:
    return any(isinstance(a, DualTensor) for a in args)


def _combine(parts, out_shape) -> Tensor | None:
    """Sum non-None tangent contributions, broadcast to the output shape."""
    terms = [p for p in parts if p is not None]
    if not terms:
        return None
    total = terms[0]
    for t in terms[1:]:
        total = add(total, t)
    if total.shape != tuple(out_shape):
        total = broadcast_to(total, out_shape)
    return total


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient over the axes numpy broadcasting introduced."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(
        i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1
    )
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _broadcast_shape(op: str, a: tuple, b: tuple) -> tuple:
    try:
        return np.broadcast_shapes(a, b)
    except ValueError:
        raise ShapeMismatchError(op, a, b) from None


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    if _is_dual(a, b):
        ap, at = _split(a)
        bp, bt = _split(b)
        prim = add(ap, bp)
        return DualTensor(prim, _combine([at, bt], prim.shape))
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a.shape, b.shape)
    ash, bsh = a.shape, b.shape

    def vjp(g):
        return _unbroadcast(g, ash), _unbroadcast(g, bsh)

    return _make("add", a.data + b.data, (a, b), vjp)


def mul(a, b) -> Tensor:
    if _is_dual(a, b):
        ap, at = _split(a)
        bp, bt = _split(b)
        prim = mul(ap, bp)
        parts = []
        if at is not None:
            parts.append(mul(at, bp))
        if bt is not None:
            parts.append(mul(ap, bt))
        return DualTensor(prim, _combine(parts, prim.shape))
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a.shape, b.shape)
    ad, bd = a.data, b.data
    ash, bsh = a.shape, b.shape

    def vjp(g):
        return _unbroadcast(g * bd, ash), _unbroadcast(g * ad, bsh)

    return _make("mul", ad * bd, (a, b), vjp)


def div(a, b) -> Tensor:
    if _is_dual(a, b):
        ap, at = _split(a)
        bp, bt = _split(b)
        prim = div(ap, bp)
        parts = []
        if at is not None:
            parts.append(div(at, bp))
        if bt is not None:
            parts.append(neg(mul(div(prim, bp), bt)))
        return DualTensor(prim, _combine(parts, prim.shape))
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("div", a.shape, b.shape)
    out = a.data / b.data
    bd, od = b.data, out
    ash, bsh = a.shape, b.shape

    def vjp(g):
        return _unbroadcast(g / bd, ash), _unbroadcast(-g * od / bd, bsh)

    return _make("div", out, (a, b), vjp)


def neg(x) -> Tensor:
    if _is_dual(x):
        prim = neg(x.primal)
        tan = None if x.tangent is None else neg(x.tangent)
        return DualTensor(prim, tan)
    x = as_tensor(x)

    def vjp(g):
        return (-g,)

    return _make("neg", -x.data, (x,), vjp)


def sub(a, b):
    return add(a, neg(b))


def scale(x, c: float) -> Tensor:
    """Multiply by a python scalar constant."""
    if _is_dual(x):
        prim = scale(x.primal, c)
        tan = None if x.tangent is None else scale(x.tangent, c)
        return DualTensor(prim, tan)
    x = as_tensor(x)
    c = float(c)

    def vjp(g):
        return (g * c,)

    return _make("scale", x.data * c, (x,), vjp)


# ---------------------------------------------------------------------------
# transcendental and activation primitives
# ---------------------------------------------------------------------------


def exp(x) -> Tensor:
    if _is_dual(x):
        prim = exp(x.primal)
        tan = None if x.tangent is None else mul(prim, x.tangent)
        return DualTensor(prim, tan)
    x = as_tensor(x)
    out = np.exp(x.data)
    od = out

    def vjp(g):
        return (g * od,)

    return _make("exp", out, (x,), vjp)


def log(x) -> Tensor:
    if _is_dual(x):
        prim = log(x.primal)
        tan = None if x.tangent is None else div(x.tangent, x.primal)
        return DualTensor(prim, tan)
    x = as_tensor(x)
    xd = x.data

    def vjp(g):
        return (g / xd,)

    return _make("log", np.log(xd), (x,), vjp)


def tanh(x) -> Tensor:
    if _is_dual(x):
        prim = tanh(x.primal)
        tan = None
        if x.tangent is not None:
            tan = mul(x.tangent, sub(1.0, mul(prim, prim)))
        return DualTensor(prim, tan)
    x = as_tensor(x)
    out = np.tanh(x.data)
    od = out

    def vjp(g):
        return (g * (1.0 - od * od),)

    return _make("tanh", out, (x,), vjp)


def sqrt(x) -> Tensor:
    if _is_dual(x):
        prim = sqrt(x.primal)
        tan = None
        if x.tangent is not None:
            tan = div(x.tangent, scale(prim, 2.0))
        return DualTensor(prim, tan)
    x = as_tensor(x)
    out = np.sqrt(x.data)
    od = out

    def vjp(g):
        return (g / (2.0 * od),)

    return _make("sqrt", out, (x,), vjp)


def relu(x) -> Tensor:
    if _is_dual(x):
        prim = relu(x.primal)
        tan = None
        if x.tangent is not None:
            # Derivative is piecewise constant in x; the mask enters as data.
            tan = mul(x.tangent, Tensor(x.primal.data > 0))
        return DualTensor(prim, tan)
    x = as_tensor(x)
    mask = x.data > 0

    def vjp(g):
        return (g * mask,)

    return _make("relu", np.where(mask, x.data, 0.0), (x,), vjp)


# ---------------------------------------------------------------------------
# reductions and shape manipulation
# ---------------------------------------------------------------------------


def sum_(x, axis=None, keepdims: bool = False) -> Tensor:
    if _is_dual(x):
        prim = sum_(x.primal, axis, keepdims)
        tan = None if x.tangent is None else sum_(x.tangent, axis, keepdims)
        return DualTensor(prim, tan)
    x = as_tensor(x)
    shape = x.shape
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, shape),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)

    return _make("sum", out, (x,), vjp)


def mean(x, axis=None, keepdims: bool = False):
    shape = x.shape
    if axis is None:
        count = int(np.prod(shape)) if shape else 1
    else:
        ax = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([shape[a] for a in ax]))
    return scale(sum_(x, axis, keepdims), 1.0 / count)


def sumsq(x, axis=None, keepdims: bool = False):
    """Squared Euclidean norm (summed squares) over the given axes."""
    return sum_(mul(x, x), axis, keepdims)


def reshape(x, shape) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if _is_dual(x):
        prim = reshape(x.primal, shape)
        tan = None if x.tangent is None else reshape(x.tangent, shape)
        return DualTensor(prim, tan)
    x = as_tensor(x)
    old = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeMismatchError("reshape", old, shape) from None

    def vjp(g):
        return (g.reshape(old),)

    return _make("reshape", out, (x,), vjp)


def transpose(x, axes=None) -> Tensor:
    """Permute axes; with ``axes=None`` swap the last two."""
    if axes is None:
        nd = x.ndim
        axes = tuple(range(nd - 2)) + (nd - 1, nd - 2)
    axes = tuple(int(a) for a in axes)
    if _is_dual(x):
        prim = transpose(x.primal, axes)
        tan = None if x.tangent is None else transpose(x.tangent, axes)
        return DualTensor(prim, tan)
    x = as_tensor(x)
    inverse = tuple(int(i) for i in np.argsort(axes))

    def vjp(g):
        return (np.transpose(g, inverse),)

    return _make("transpose", np.transpose(x.data, axes), (x,), vjp)


def broadcast_to(x, shape) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if _is_dual(x):
        prim = broadcast_to(x.primal, shape)
        tan = None if x.tangent is None else broadcast_to(x.tangent, shape)
        return DualTensor(prim, tan)
    x = as_tensor(x)
    old = x.shape
    try:
        out = np.broadcast_to(x.data, shape)
    except ValueError:
        raise ShapeMismatchError("broadcast_to", old, shape) from None

    def vjp(g):
        return (_unbroadcast(g, old),)

    return _make("broadcast_to", out, (x,), vjp)


def concat(parts, axis: int = 0) -> Tensor:
    parts = list(parts)
    if any(isinstance(p, DualTensor) for p in parts):
        prims = [p.primal if isinstance(p, DualTensor) else p for p in parts]
        prim = concat(prims, axis)
        tans = [
            p.tangent if isinstance(p, DualTensor) else None for p in parts
        ]
        if all(t is None for t in tans):
            return DualTensor(prim, None)
        pieces = [
            t if t is not None else zeros(as_tensor(pp).shape)
            for t, pp in zip(tans, prims)
        ]
        return DualTensor(prim, concat(pieces, axis))
    parts = tuple(as_tensor(p) for p in parts)
    nd = parts[0].ndim
    ax = axis % nd
    for p in parts[1:]:
        same = p.ndim == nd and all(
            p.shape[i] == parts[0].shape[i] for i in range(nd) if i != ax
        )
        if not same:
            raise ShapeMismatchError("concat", parts[0].shape, p.shape)
    bounds = np.cumsum([p.shape[ax] for p in parts])[:-1]

    def vjp(g):
        return tuple(np.split(g, bounds, axis=ax))

    out = np.concatenate([p.data for p in parts], axis=ax)
    return _make("concat", out, parts, vjp)


def getitem(x, key) -> Tensor:
    if isinstance(key, (Tensor, DualTensor)):
        raise UnsupportedOpError("getitem with tensor keys")
    if _is_dual(x):
        prim = getitem(x.primal, key)
        tan = None if x.tangent is None else getitem(x.tangent, key)
        return DualTensor(prim, tan)
    x = as_tensor(x)
    shape = x.shape
    out = x.data[key]

    def vjp(g):
        full = np.zeros(shape, dtype=g.dtype)
        full[key] = g
        return (full,)

    return _make("getitem", out, (x,), vjp)


# ---------------------------------------------------------------------------
# linear algebra and lookups
# ---------------------------------------------------------------------------


def matmul(a, b) -> Tensor:
    if _is_dual(a, b):
        ap, at = _split(a)
        bp, bt = _split(b)
        prim = matmul(ap, bp)
        parts = []
        if at is not None:
            parts.append(matmul(at, bp))
        if bt is not None:
            parts.append(matmul(ap, bt))
        return DualTensor(prim, _combine(parts, prim.shape))
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatchError("matmul", a.shape, b.shape)
    _broadcast_shape("matmul", a.shape[:-2], b.shape[:-2])
    ad, bd = a.data, b.data
    ash, bsh = a.shape, b.shape

    def vjp(g):
        ga = _unbroadcast(g @ np.swapaxes(bd, -1, -2), ash)
        if b.ndim == 2 and a.ndim > 2:
            # stacked activations times a flat weight: one big GEMM instead
            # of a batched product followed by a batch-axis reduction
            gb = ad.reshape(-1, ash[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            gb = _unbroadcast(np.swapaxes(ad, -1, -2) @ g, bsh)
        return ga, gb

    return _make("matmul", ad @ bd, (a, b), vjp)


def embedding(table, ids) -> Tensor:
    """Gather rows of a 2-D table by integer ids of any shape."""
    if isinstance(ids, (Tensor, DualTensor)):
        raise UnsupportedOpError("embedding with tensor ids")
    if _is_dual(table):
        prim = embedding(table.primal, ids)
        tan = None if table.tangent is None else embedding(table.tangent, ids)
        return DualTensor(prim, tan)
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeMismatchError("embedding", table.shape, ids.shape)
    out = table.data[ids]
    tshape = table.shape
    flat = ids.reshape(-1)

    def vjp(g):
        full = np.zeros(tshape, dtype=g.dtype)
        np.add.at(full, flat, g.reshape(-1, tshape[1]))
        return (full,)

    return _make("embedding", out, (table,), vjp)


def take_along_last(x, idx) -> Tensor:
    """Pick entries along the last axis by integer index."""
    if isinstance(idx, (Tensor, DualTensor)):
        raise UnsupportedOpError("take_along_last with tensor indices")
    if _is_dual(x):
        prim = take_along_last(x.primal, idx)
        tan = None if x.tangent is None else take_along_last(x.tangent, idx)
        return DualTensor(prim, tan)
    x = as_tensor(x)
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != x.ndim or idx.shape[:-1] != x.shape[:-1]:
        raise ShapeMismatchError("take_along_last", x.shape, idx.shape)
    out = np.take_along_axis(x.data, idx, axis=-1)
    shape = x.shape
    lead = tuple(np.indices(idx.shape)[:-1]) if idx.ndim > 1 else ()

    def vjp(g):
        full = np.zeros(shape, dtype=g.dtype)
        if idx.ndim == 1:
            np.add.at(full, idx, g)
        else:
            np.add.at(full, (*lead, idx), g)
        return (full,)

    return _make("take_along_last", out, (x,), vjp)


# ---------------------------------------------------------------------------
# row-wise softmax family
# ---------------------------------------------------------------------------


def softmax(x) -> Tensor:
    """Softmax over the last axis, computed stably."""
    if _is_dual(x):
        prim = softmax(x.primal)
        tan = None
        if x.tangent is not None:
            dx = x.tangent
            inner = sum_(mul(prim, dx), -1, True)
            tan = mul(prim, sub(dx, inner))
        return DualTensor(prim, tan)
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)
    od = out

    def vjp(g):
        inner = (g * od).sum(axis=-1, keepdims=True)
        return (od * (g - inner),)

    return _make("softmax", out, (x,), vjp)


def log_softmax(x) -> Tensor:
    if _is_dual(x):
        prim = log_softmax(x.primal)
        tan = None
        if x.tangent is not None:
            dx = x.tangent
            probs = exp(prim)
            tan = sub(dx, sum_(mul(probs, dx), -1, True))
        return DualTensor(prim, tan)
    x = as_tensor(x)
    m = x.data.max(axis=-1, keepdims=True)
    shifted = x.data - m
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - lse
    probs = np.exp(out)

    def vjp(g):
        return (g - probs * g.sum(axis=-1, keepdims=True),)

    return _make("log_softmax", out, (x,), vjp)


# ---------------------------------------------------------------------------
# fused activation and normalization primitives
#
# The primal passes and adjoints are closed-form numpy; the tangent rules
# recompute through the public ops so reverse-over-forward stays exact.
# ---------------------------------------------------------------------------

_GELU_C = math.sqrt(2.0 / math.pi)


def _gelu_grad_ops(x):
    """gelu'(x) for the tanh form, built from primitives (differentiable)."""
    sq = mul(x, x)
    inner = scale(add(x, scale(mul(sq, x), 0.044715)), _GELU_C)
    t = tanh(inner)
    left = scale(add(1.0, t), 0.5)
    slope = scale(add(1.0, scale(sq, 3 * 0.044715)), _GELU_C)
    right = mul(scale(mul(x, sub(1.0, mul(t, t))), 0.5), slope)
    return add(left, right)


def gelu(x) -> Tensor:
    """Gaussian error linear unit, tanh form, with its exact derivative."""
    if _is_dual(x):
        prim = gelu(x.primal)
        tan = None
        if x.tangent is not None:
            tan = mul(x.tangent, _gelu_grad_ops(x.primal))
        return DualTensor(prim, tan)
    x = as_tensor(x)
    xd = x.data
    inner = _GELU_C * (xd + 0.044715 * (xd * xd * xd))
    t = np.tanh(inner)
    out = 0.5 * xd * (1.0 + t)

    def vjp(g):
        slope = _GELU_C * (1.0 + 3 * 0.044715 * xd * xd)
        grad = 0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t * t) * slope
        return (g * grad,)

    return _make("gelu", out, (x,), vjp)


def _ln_tangent_ops(x, dx, gain, dgain, dbias, eps):
    """Tangent of layer_norm via primitives on the primal input."""
    m = mean(x, -1, True)
    centered = sub(x, m)
    var = mean(mul(centered, centered), -1, True)
    inv = div(1.0, sqrt(add(var, eps)))
    xhat = mul(centered, inv)
    parts = []
    if dx is not None:
        dc = sub(dx, mean(dx, -1, True))
        dvar_term = mul(xhat, mean(mul(xhat, dc), -1, True))
        parts.append(mul(mul(sub(dc, dvar_term), inv), gain))
    if dgain is not None:
        parts.append(mul(xhat, dgain))
    if dbias is not None:
        parts.append(dbias)
    return parts


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean and unit variance, then affine."""
    if _is_dual(x) or _is_dual(gain) or _is_dual(bias):
        xp, xt = _split(x)
        gp, gt = _split(gain)
        bp, bt = _split(bias)
        prim = layer_norm(xp, gp, bp, eps)
        parts = _ln_tangent_ops(xp, xt, gp, gt, bt, eps)
        return DualTensor(prim, _combine(parts, prim.shape))
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    _check_norm_params("layer_norm", x, gain, bias)
    xd = x.data
    d = xd.shape[-1]
    m = xd.mean(axis=-1, keepdims=True)
    centered = xd - m
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out = xhat * gain.data + bias.data
    gd = gain.data

    def vjp(g):
        gx = g * gd
        inner = gx - gx.mean(axis=-1, keepdims=True)
        proj = (gx * xhat).mean(axis=-1, keepdims=True)
        dx = inv * (inner - xhat * proj)
        dgain = (g * xhat).reshape(-1, d).sum(axis=0)
        dbias = g.reshape(-1, d).sum(axis=0)
        return dx, dgain, dbias

    return _make("layer_norm", out, (x, gain, bias), vjp)


def _rms_tangent_ops(x, dx, gain, dgain, eps):
    """Tangent of rms_norm via primitives: r dx - x r^3 mean(x dx)."""
    ms = mean(mul(x, x), -1, True)
    inv = div(1.0, sqrt(add(ms, eps)))
    parts = []
    if dx is not None:
        proj = mul(mul(x, inv), mul(inv, mean(mul(x, dx), -1, True)))
        direct = mul(inv, sub(dx, proj))
        parts.append(mul(direct, gain) if gain is not None else direct)
    if dgain is not None:
        parts.append(mul(mul(x, inv), dgain))
    return parts


def rms_norm(x, gain, eps: float = 1e-5) -> Tensor:
    """Scale the last axis to unit root-mean-square, then apply a gain."""
    if _is_dual(x) or _is_dual(gain):
        xp, xt = _split(x)
        gp, gt = _split(gain)
        prim = rms_norm(xp, gp, eps)
        parts = _rms_tangent_ops(xp, xt, gp, gt, eps)
        return DualTensor(prim, _combine(parts, prim.shape))
    x, gain = as_tensor(x), as_tensor(gain)
    _check_norm_params("rms_norm", x, gain, None)
    xd = x.data
    d = xd.shape[-1]
    ms = (xd * xd).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(ms + eps)
    normed = xd * inv
    out = normed * gain.data
    gd = gain.data

    def vjp(g):
        gx = g * gd
        proj = (gx * xd).mean(axis=-1, keepdims=True)
        dx = inv * gx - xd * (inv * inv * inv) * proj
        dgain = (g * normed).reshape(-1, d).sum(axis=0)
        return dx, dgain

    return _make("rms_norm", out, (x, gain), vjp)


def simple_norm(x, eps: float = 1e-5) -> Tensor:
    """Unit-RMS normalization with no learnable parameters: x / RMS(x).

    A d-dimensional output has Euclidean norm sqrt(d), up to the eps guard.
    """
    if _is_dual(x):
        prim = simple_norm(x.primal, eps)
        tan = None
        if x.tangent is not None:
            parts = _rms_tangent_ops(x.primal, x.tangent, None, None, eps)
            tan = _combine(parts, prim.shape)
        return DualTensor(prim, tan)
    x = as_tensor(x)
    xd = x.data
    ms = (xd * xd).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(ms + eps)
    out = xd * inv

    def vjp(g):
        proj = (g * xd).mean(axis=-1, keepdims=True)
        return (inv * g - xd * (inv * inv * inv) * proj,)

    return _make("simple_norm", out, (x,), vjp)


def _check_norm_params(op, x, gain, bias):
    d = x.shape[-1]
    if gain is not None and tuple(gain.shape) != (d,):
        raise ShapeMismatchError(op, x.shape, gain.shape)
    if bias is not None and tuple(bias.shape) != (d,):
        raise ShapeMismatchError(op, x.shape, bias.shape)


def linear(x, weight, bias=None):
    out = matmul(x, weight)
    if bias is not None:
        out = add(out, bias)
    return out


def cross_entropy(logits, targets):
    """Mean negative log-likelihood of integer targets under the logits.

    ``logits`` has shape (..., V); ``targets`` holds class ids shaped like
    the leading axes.
    """
    targets = np.asarray(targets, dtype=np.int64)
    picked = take_along_last(log_softmax(logits), targets[..., None])
    return neg(mean(picked))


# ---------------------------------------------------------------------------
# operator installation on Tensor / DualTensor
# ---------------------------------------------------------------------------


def _t_add(self, other):
    return add(self, other)


def _t_radd(self, other):
    return add(other, self)


def _t_sub(self, other):
    return sub(self, other)


def _t_rsub(self, other):
    return sub(other, self)


def _t_mul(self, other):
    if isinstance(other, numbers.Number):
        return scale(self, other)
    return mul(self, other)


def _t_rmul(self, other):
    if isinstance(other, numbers.Number):
        return scale(self, other)
    return mul(other, self)


def _t_div(self, other):
    if isinstance(other, numbers.Number):
        return scale(self, 1.0 / other)
    return div(self, other)


def _t_rdiv(self, other):
    return div(other, self)


def _t_matmul(self, other):
    return matmul(self, other)


def _t_neg(self):
    return neg(self)


def _t_getitem(self, key):
    return getitem(self, key)


def _t_sum(self, axis=None, keepdims=False):
    return sum_(self, axis, keepdims)


def _t_mean(self, axis=None, keepdims=False):
    return mean(self, axis, keepdims)


def _t_reshape(self, *shape):
    if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
        shape = tuple(shape[0])
    return reshape(self, shape)


def _t_transpose(self, axes=None):
    return transpose(self, axes)


for _cls in (Tensor, DualTensor):
    _cls.__add__ = _t_add
    _cls.__radd__ = _t_radd
    _cls.__sub__ = _t_sub
    _cls.__rsub__ = _t_rsub
    _cls.__mul__ = _t_mul
    _cls.__rmul__ = _t_rmul
    _cls.__truediv__ = _t_div
    _cls.__rtruediv__ = _t_rdiv
    _cls.__matmul__ = _t_matmul
    _cls.__neg__ = _t_neg
    _cls.__getitem__ = _t_getitem
    _cls.sum = _t_sum
    _cls.mean = _t_mean
    _cls.reshape = _t_reshape
    _cls.transpose = _t_transpose
del _cls
