"""Forward values, error contracts, and reverse-mode gradients of every op."""

import numpy as np
import pytest

from looplab import Graph, Tensor, ops
from looplab.errors import (
    ContractError,
    NumericOverflowError,
    ShapeMismatchError,
)

from helpers import assert_close, check_gradients

RNG = np.random.default_rng(2024)


def leaf(shape, offset=0.0, scale=1.0, name=None):
    return Tensor(
        RNG.standard_normal(shape) * scale + offset, requires_grad=True, name=name
    )


def projector(shape):
    """A frozen random cotangent so scalar tests exercise full Jacobians."""
    r = Tensor(np.sign(RNG.standard_normal(shape)) + 0.5)
    return lambda x: ops.sum_(ops.mul(x, r))


# ---------------------------------------------------------------------------
# forward examples
# ---------------------------------------------------------------------------


def test_softmax_uniform_row():
    out = ops.softmax(Tensor([0.0, 0.0, 0.0]))
    assert_close(out.data, np.full(3, 1.0 / 3.0))


def test_softmax_rows_sum_to_one():
    out = ops.softmax(Tensor(RNG.standard_normal((5, 7))))
    assert_close(out.data.sum(axis=-1), np.ones(5), rtol=0, atol=1e-12)


def test_simple_norm_output_norm_is_sqrt_d():
    x = Tensor(RNG.standard_normal((4, 16)) * 3.0)
    out = ops.simple_norm(x.data, eps=1e-5)
    norms = np.linalg.norm(out.data, axis=-1)
    assert_close(norms, np.full(4, 4.0), rtol=1e-4, atol=1e-6)


def test_cross_entropy_uniform_logits():
    logits = Tensor(np.zeros((3, 16)))
    loss = ops.cross_entropy(logits, np.array([1, 5, 9]))
    assert_close(loss.data, np.log(16.0))


def test_layer_norm_zero_mean_unit_var():
    x = Tensor(RNG.standard_normal((6, 8)) * 5 + 2)
    gain = Tensor(np.ones(8))
    bias = Tensor(np.zeros(8))
    out = ops.layer_norm(x, gain, bias, eps=1e-12).data
    assert_close(out.mean(axis=-1), np.zeros(6), rtol=0, atol=1e-9)
    assert_close(out.var(axis=-1), np.ones(6), rtol=1e-6, atol=1e-9)


def test_gelu_known_values():
    # tanh-form values: gelu(0) = 0, gelu(x) ~ x for large x, odd-ish shape
    out = ops.gelu(Tensor([0.0, 10.0, -10.0])).data
    assert out[0] == 0.0
    assert_close(out[1], 10.0, rtol=1e-6, atol=1e-6)
    assert abs(out[2]) < 1e-5


def test_shape_mismatch_is_structured():
    with pytest.raises(ShapeMismatchError) as exc:
        ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))
    assert "matmul" in str(exc.value)
    assert "(2, 3)" in str(exc.value) and "(4, 2)" in str(exc.value)
    with pytest.raises(ShapeMismatchError):
        ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4,))))


def test_nonfinite_output_is_reported_with_op():
    with np.errstate(divide="ignore", invalid="ignore"):
        with pytest.raises(NumericOverflowError) as exc:
            ops.div(Tensor([1.0]), Tensor([0.0]))
        assert "div" in str(exc.value)
        with pytest.raises(NumericOverflowError) as exc:
            ops.log(Tensor([-1.0]))
        assert "log" in str(exc.value)


# ---------------------------------------------------------------------------
# backward contract
# ---------------------------------------------------------------------------


def test_backward_sum_of_squares():
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    with Graph() as g:
        loss = ops.sum_(ops.mul(x, x))
    grads = g.backward(loss, wrt=[x])
    assert_close(grads[x], [2.0, 4.0, 6.0])


def test_backward_requires_scalar_loss():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with Graph() as g:
        y = ops.mul(x, x)
    with pytest.raises(ContractError):
        g.backward(y)


def test_gradient_of_constant_is_zero():
    c = Tensor([4.0], requires_grad=True)
    with Graph() as g:
        pass
    grads = g.backward(c, wrt=[c])
    assert_close(grads[c], [0.0], rtol=0, atol=0)


def test_unreferenced_parameters_get_zero_gradients():
    x = Tensor([1.0, 2.0], requires_grad=True, name="x")
    unused = Tensor(np.ones((2, 2)), requires_grad=True, name="unused")
    with Graph() as g:
        loss = ops.sum_(ops.mul(x, x))
    grads = g.backward(loss, wrt=[x, unused])
    assert grads[unused].shape == (2, 2)
    assert np.all(grads[unused] == 0)


def test_grad_accumulates_over_reuse():
    x = Tensor([3.0], requires_grad=True)
    with Graph() as g:
        loss = ops.sum_(ops.add(ops.mul(x, x), x))  # x^2 + x
    grads = g.backward(loss, wrt=[x])
    assert_close(grads[x], [7.0])


# ---------------------------------------------------------------------------
# finite-difference gradient checks, one per primitive
# ---------------------------------------------------------------------------


def test_grad_add_broadcast():
    a, b = leaf((3, 4), name="a"), leaf((4,), name="b")
    p = projector((3, 4))
    check_gradients(lambda: p(ops.add(a, b)), [a, b], label="add")


def test_grad_mul_broadcast():
    a, b = leaf((3, 4), name="a"), leaf((4,), name="b")
    p = projector((3, 4))
    check_gradients(lambda: p(ops.mul(a, b)), [a, b], label="mul")


def test_grad_div():
    a = leaf((3, 4), name="a")
    b = leaf((3, 4), offset=3.0, scale=0.3, name="b")
    p = projector((3, 4))
    check_gradients(lambda: p(ops.div(a, b)), [a, b], label="div")


def test_grad_neg_scale():
    a = leaf((5,), name="a")
    p = projector((5,))
    check_gradients(lambda: p(ops.scale(ops.neg(a), 1.7)), [a], label="neg/scale")


def test_grad_exp_log_sqrt_tanh():
    a = leaf((4, 3), offset=2.5, scale=0.4, name="a")
    p = projector((4, 3))
    check_gradients(lambda: p(ops.exp(a)), [a], label="exp")
    check_gradients(lambda: p(ops.log(a)), [a], label="log")
    check_gradients(lambda: p(ops.sqrt(a)), [a], label="sqrt")
    check_gradients(lambda: p(ops.tanh(a)), [a], label="tanh")


def test_grad_relu_away_from_kink():
    data = RNG.standard_normal((4, 4))
    data[np.abs(data) < 0.1] += 0.5
    a = Tensor(data, requires_grad=True, name="a")
    p = projector((4, 4))
    check_gradients(lambda: p(ops.relu(a)), [a], label="relu")


def test_grad_gelu():
    a = leaf((4, 3), name="a")
    p = projector((4, 3))
    check_gradients(lambda: p(ops.gelu(a)), [a], label="gelu")


def test_grad_matmul_2d():
    a, b = leaf((3, 4), name="a"), leaf((4, 5), name="b")
    p = projector((3, 5))
    check_gradients(lambda: p(ops.matmul(a, b)), [a, b], label="matmul2d")


def test_grad_matmul_batched():
    a, b = leaf((2, 3, 4), name="a"), leaf((2, 4, 3), name="b")
    p = projector((2, 3, 3))
    check_gradients(lambda: p(ops.matmul(a, b)), [a, b], label="matmul3d")


def test_grad_matmul_stacked_times_flat():
    a, b = leaf((2, 3, 4), name="a"), leaf((4, 5), name="b")
    p = projector((2, 3, 5))
    check_gradients(lambda: p(ops.matmul(a, b)), [a, b], label="matmul3d2d")


def test_grad_reductions_shapes():
    a = leaf((3, 4, 2), name="a")
    p1 = projector((3, 2))
    check_gradients(lambda: p1(ops.sum_(a, 1)), [a], label="sum-axis")
    p2 = projector((1, 4, 1))
    check_gradients(lambda: p2(ops.sum_(a, (0, 2), True)), [a], label="sum-keep")
    check_gradients(lambda: ops.sumsq(a), [a], label="sumsq")
    p3 = projector((3, 4))
    check_gradients(lambda: p3(ops.mean(a, -1)), [a], label="mean")


def test_grad_reshape_transpose_broadcast_concat_getitem():
    a = leaf((3, 4), name="a")
    b = leaf((2, 4), name="b")
    p1 = projector((4, 3))
    check_gradients(lambda: p1(ops.reshape(a, (4, 3))), [a], label="reshape")
    p2 = projector((4, 3))
    check_gradients(lambda: p2(ops.transpose(a)), [a], label="transpose")
    p3 = projector((3, 2, 4))
    check_gradients(
        lambda: p3(ops.broadcast_to(b, (3, 2, 4))), [b], label="broadcast"
    )
    p4 = projector((5, 4))
    check_gradients(lambda: p4(ops.concat([a, b], 0)), [a, b], label="concat")
    p5 = projector((2, 4))
    check_gradients(
        lambda: p5(ops.getitem(a, (slice(1, 3), slice(None)))),
        [a],
        label="getitem",
    )


def test_grad_embedding_and_gather():
    table = leaf((7, 4), name="table")
    ids = np.array([[0, 3, 3], [6, 1, 0]])
    p1 = projector((2, 3, 4))
    check_gradients(
        lambda: p1(ops.embedding(table, ids)), [table], label="embedding"
    )
    x = leaf((3, 5), name="x")
    idx = np.array([[1], [4], [0]])
    p2 = projector((3, 1))
    check_gradients(
        lambda: p2(ops.take_along_last(x, idx)), [x], label="gather"
    )


def test_grad_softmax_logsoftmax():
    a = leaf((4, 6), name="a")
    p = projector((4, 6))
    check_gradients(lambda: p(ops.softmax(a)), [a], label="softmax")
    check_gradients(lambda: p(ops.log_softmax(a)), [a], label="log_softmax")


def test_grad_norms():
    x = leaf((3, 6), name="x")
    gain = leaf((6,), offset=1.0, scale=0.1, name="gain")
    bias = leaf((6,), scale=0.1, name="bias")
    p = projector((3, 6))
    check_gradients(
        lambda: p(ops.layer_norm(x, gain, bias)),
        [x, gain, bias],
        label="layer_norm",
    )
    check_gradients(lambda: p(ops.rms_norm(x, gain)), [x, gain], label="rms_norm")
    check_gradients(lambda: p(ops.simple_norm(x)), [x], label="simple_norm")


def test_grad_cross_entropy():
    logits = leaf((4, 9), name="logits")
    targets = np.array([0, 3, 8, 2])
    check_gradients(
        lambda: ops.cross_entropy(logits, targets), [logits], label="xent"
    )


def test_tiny_mlp_matches_finite_differences():
    w1 = leaf((5, 7), scale=0.5, name="w1")
    b1 = leaf((7,), scale=0.1, name="b1")
    w2 = leaf((7, 3), scale=0.5, name="w2")
    x = Tensor(RNG.standard_normal((4, 5)))

    def loss():
        h = ops.gelu(ops.add(ops.matmul(x, w1), b1))
        return ops.sumsq(ops.matmul(h, w2))

    check_gradients(loss, [w1, b1, w2], label="tiny-mlp")


def test_determinism_bitwise():
    a = Tensor(RNG.standard_normal((4, 4)), requires_grad=True)

    def run():
        with Graph() as g:
            out = ops.sum_(ops.softmax(ops.matmul(a, a)))
        grads = g.backward(out, wrt=[a])
        return out.data.copy(), grads[a].copy()

    o1, g1 = run()
    o2, g2 = run()
    assert np.array_equal(o1, o2)
    assert np.array_equal(g1, g2)
