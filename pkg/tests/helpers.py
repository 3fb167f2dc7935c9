"""Shared oracles and tiny-model builders for the test suite."""

from __future__ import annotations

import numpy as np

from looplab import Graph, ModelConfig, Tensor, init_parameters
from looplab.model import recurrent_block

GRAD_RTOL = 1e-5
GRAD_ATOL = 1e-8


def fd_grad(loss_fn, tensors: list[Tensor], step: float = 1e-5) -> list[np.ndarray]:
    """Central-difference gradient of a re-evaluable scalar loss.

    ``loss_fn`` recomputes the loss from the tensors' current data; entries
    are perturbed in place and restored.
    """
    grads = []
    for t in tensors:
        g = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + step
            up = float(loss_fn().data)
            flat[i] = keep - step
            down = float(loss_fn().data)
            flat[i] = keep
            gflat[i] = (up - down) / (2.0 * step)
        grads.append(g)
    return grads


def backward_grads(loss_fn, tensors: list[Tensor]) -> list[np.ndarray]:
    with Graph() as g:
        loss = loss_fn()
    grads = g.backward(loss, wrt=tensors)
    return [grads[t] for t in tensors]


def assert_close(got, want, rtol=GRAD_RTOL, atol=GRAD_ATOL, label=""):
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    err = np.abs(got - want) - (rtol * np.abs(want) + atol)
    assert np.all(err <= 0), (
        f"{label}: max violation {err.max():.3e} "
        f"(worst got={got.reshape(-1)[err.argmax()]}, "
        f"want={want.reshape(-1)[err.argmax()]})"
    )


def check_gradients(loss_fn, tensors, step=1e-5, label=""):
    analytic = backward_grads(loss_fn, tensors)
    numeric = fd_grad(loss_fn, tensors, step)
    for a, n, t in zip(analytic, numeric, tensors):
        assert_close(a, n, label=f"{label} wrt {t.name or 'tensor'}")


def tiny_model(seed: int = 0, **overrides):
    """A minimal block for differentiation tests: d=8, 2 heads, d_ff=16."""
    defaults = dict(
        d_model=8,
        n_heads=2,
        d_ff=16,
        n_block_layers=1,
        vocab_size=15,
        max_seq_len=8,
    )
    defaults.update(overrides)
    cfg = ModelConfig(**defaults)
    params = init_parameters(cfg, seed)
    return cfg, params


def block_fn(params, cfg):
    return lambda h: recurrent_block(params, h, cfg)
