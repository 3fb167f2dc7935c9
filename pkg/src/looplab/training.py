"""Training machinery: loop-depth sampling, losses, and the optimizer.

The combined objective couples next-token cross entropy at a randomly
sampled recurrent depth with a squared Jacobian-vector-product penalty that
pushes the recurrent map's spectral radius below one at the states the model
actually visits. An optional consistency term penalizes movement between
adjacent loop iterates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .autodiff import Graph, Tensor, jvp_forward
from .autodiff import ops
from .errors import ContractError, NumericOverflowError
from .model import ModelConfig, Parameters, coda_logits, recurrent_block, run_loop

DIRECTION_GUARD = 1e-12


# ---------------------------------------------------------------------------
# loop-depth distributions
# ---------------------------------------------------------------------------


@dataclass
class LoopDistribution:
    """Sampler spec for the recurrent depth t, always clipped to a range."""

    kind: str  # "lognormal" | "poisson" | "uniform" | "fixed"
    clip_min: int
    clip_max: int
    mu: float | None = None
    sigma: float | None = None
    rate: float | None = None
    t_fixed: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("lognormal", "poisson", "uniform", "fixed"):
            raise ContractError(f"unknown loop distribution kind {self.kind!r}")
        if self.clip_min < 1 or self.clip_max < self.clip_min:
            raise ContractError(
                f"invalid clip range [{self.clip_min}, {self.clip_max}]"
            )
        if self.kind == "lognormal" and (self.mu is None or self.sigma is None):
            raise ContractError("lognormal distribution needs mu and sigma")
        if self.kind == "poisson" and self.rate is None:
            raise ContractError("poisson distribution needs a rate")
        if self.kind == "fixed":
            if self.t_fixed is None:
                raise ContractError("fixed distribution needs t_fixed")
            if self.clip_min != self.t_fixed or self.clip_max != self.t_fixed:
                raise ContractError("fixed distribution requires clip_min == clip_max == t")

    @classmethod
    def lognormal(cls, mu: float, sigma: float, lo: int, hi: int) -> "LoopDistribution":
        return cls("lognormal", lo, hi, mu=mu, sigma=sigma)

    @classmethod
    def poisson(cls, rate: float, lo: int, hi: int) -> "LoopDistribution":
        return cls("poisson", lo, hi, rate=rate)

    @classmethod
    def uniform(cls, lo: int, hi: int) -> "LoopDistribution":
        return cls("uniform", lo, hi)

    @classmethod
    def fixed(cls, t: int) -> "LoopDistribution":
        return cls("fixed", t, t, t_fixed=t)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "clip_min": self.clip_min, "clip_max": self.clip_max}
        for k in ("mu", "sigma", "rate", "t_fixed"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LoopDistribution":
        return cls(**d)


def sample_loop_depths(
    dist: LoopDistribution, rng: np.random.Generator, size: int
) -> np.ndarray:
    """Vectorized depth sampling; every value lies in the clip range."""
    if dist.kind == "lognormal":
        raw = np.rint(np.exp(rng.normal(dist.mu, dist.sigma, size)))
    elif dist.kind == "poisson":
        raw = rng.poisson(dist.rate, size)
    elif dist.kind == "uniform":
        raw = rng.integers(dist.clip_min, dist.clip_max + 1, size)
    else:
        raw = np.full(size, dist.t_fixed)
    return np.clip(raw, dist.clip_min, dist.clip_max).astype(np.int64)


def sample_loop_depth(dist: LoopDistribution, rng: np.random.Generator) -> int:
    return int(sample_loop_depths(dist, rng, 1)[0])


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


@dataclass
class Batch:
    tokens: np.ndarray  # (B, M) int64, padded
    loss_mask: np.ndarray  # (B, M-1) bool; True where the next token is scored


def sft_loss(logits, tokens: np.ndarray, loss_mask: np.ndarray) -> Tensor:
    """Next-token cross entropy: per-sample sum over masked positions,
    averaged over the batch."""
    tokens = np.asarray(tokens, dtype=np.int64)
    mask = np.asarray(loss_mask, dtype=bool)
    if logits.ndim == 2:
        logits = ops.reshape(logits, (1,) + tuple(logits.shape))
        tokens = tokens[None, :]
        mask = mask[None, :]
    b, m = tokens.shape
    if mask.shape != (b, m - 1):
        raise ContractError(
            f"loss mask shape {mask.shape} does not match tokens {tokens.shape}"
        )
    if not mask.any():
        raise ContractError("sft_loss: empty loss mask")
    targets = tokens[:, 1:]
    logp = ops.log_softmax(ops.getitem(logits, (slice(None), slice(0, m - 1))))
    picked = ops.take_along_last(logp, targets[..., None])
    picked = ops.reshape(picked, (b, m - 1))
    masked = ops.mul(picked, Tensor(mask.astype(float)))
    return ops.scale(ops.sum_(masked), -1.0 / b)


def l2_consistency_loss(states: list[Tensor]) -> Tensor:
    """Mean squared distance between adjacent loop iterates.

    ``states`` is the recorded list h(0)..h(t); gradients flow into every
    iterate. Requires t >= 2.
    """
    if len(states) < 3:
        raise ContractError(
            f"l2_consistency_loss: need t >= 2 (got {len(states) - 1} loops)"
        )
    first = states[0]
    b = first.shape[0] if first.ndim >= 3 else 1
    pairs = len(states) - 1
    total = None
    for a, c in zip(states[:-1], states[1:]):
        term = ops.sumsq(ops.sub(c, a))
        total = term if total is None else ops.add(total, term)
    return ops.scale(total, 1.0 / (b * pairs))


def _sample_axes(h) -> tuple[tuple[int, ...], int]:
    """Axes that span one sample, and the batch size."""
    if h.ndim >= 3:
        return tuple(range(1, h.ndim)), h.shape[0]
    return tuple(range(h.ndim)), 1


def jsrr_loss(
    step_fn: Callable,
    h_t: Tensor,
    k_steps: int,
    rng: np.random.Generator,
    detach_direction: bool = True,
    guard: float = DIRECTION_GUARD,
) -> Tensor:
    """Squared norm of the power-iterated Jacobian-vector product at h_t.

    A fresh per-sample direction is drawn, normalized with an additive
    guard, and pushed through ``k_steps`` Jacobian-vector products of the
    recurrent map at the (graph-recorded) state. The returned scalar is the
    batch mean of the final squared product norms and is differentiable with
    respect to everything the state and map depend on. With
    ``detach_direction`` the intermediate directions enter as constants.
    """
    if k_steps < 1:
        raise ContractError(f"jsrr_loss: k_steps must be >= 1, got {k_steps}")
    axes, b = _sample_axes(h_t)
    start = rng.standard_normal(h_t.shape)
    norms = np.sqrt((start**2).sum(axis=axes, keepdims=True))
    v = Tensor(start / (norms + guard))
    j = None
    for k in range(k_steps):
        j = jvp_forward(step_fn, h_t, v).tangent
        if k + 1 < k_steps:
            if detach_direction:
                jd = j.data
                jn = np.sqrt((jd**2).sum(axis=axes, keepdims=True))
                v = Tensor(jd / (jn + guard))
            else:
                jn = ops.sqrt(ops.sumsq(j, axes, keepdims=True))
                v = ops.div(j, ops.add(jn, guard))
    return ops.scale(ops.sumsq(j), 1.0 / b)


# ---------------------------------------------------------------------------
# optimizer: decoupled-weight-decay adaptive moments with cosine schedule
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    lambda_weight: float = 0.1
    objective_form: str = "convex"  # "convex" | "additive"
    power_steps: int = 1
    loop: LoopDistribution = field(default_factory=lambda: LoopDistribution.fixed(4))
    l2_consistency_weight: float = 0.0
    learning_rate: float = 1e-4
    schedule: str = "cosine"  # "cosine" | "constant"
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8
    weight_decay: float = 0.0
    grad_clip: float = 1.0
    batch_size: int = 64
    total_steps: int = 4000
    detach_direction: bool = True
    loss_mask: str = "all"  # "all" | "answer"
    eval_interval: int = 200
    eval_samples: int = 256
    eval_t: int | None = None  # depth used for in-training accuracy checks
    target_accuracy: float | None = None  # early stop when reached
    checkpoint_interval: int = 0  # 0 disables periodic checkpoints
    probe_interval: int = 0  # 0 disables in-training spectral probes

    def __post_init__(self) -> None:
        if not 0.0 <= self.lambda_weight <= 1.0:
            raise ContractError("lambda_weight must lie in [0, 1]")
        if self.power_steps < 1:
            raise ContractError("power_steps must be >= 1")
        if self.objective_form not in ("convex", "additive"):
            raise ContractError(f"unknown objective_form {self.objective_form!r}")
        if self.schedule not in ("cosine", "constant"):
            raise ContractError(f"unknown schedule {self.schedule!r}")
        if self.loss_mask not in ("all", "answer"):
            raise ContractError(f"unknown loss_mask {self.loss_mask!r}")

    def to_dict(self) -> dict:
        d = {
            k: v for k, v in self.__dict__.items() if k != "loop"
        }
        d["loop"] = self.loop.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "loop" in d and isinstance(d["loop"], dict):
            d["loop"] = LoopDistribution.from_dict(d["loop"])
        return cls(**d)


@dataclass
class StepMetrics:
    step: int
    sampled_t: int
    sft_loss: float
    jsrr_loss: float
    l2_loss: float
    total_loss: float
    gradient_norm: float
    rho_probe: float | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class AdamState:
    """First/second moment accumulators for every named parameter."""

    def __init__(self, params: Parameters):
        self.m = {n: np.zeros_like(t.data) for n, t in params.items()}
        self.v = {n: np.zeros_like(t.data) for n, t in params.items()}
        self.step = 0


def schedule_lr(step_index: int, cfg: TrainConfig) -> float:
    """Learning rate at a step: constant, or cosine decay to zero over the
    configured horizon."""
    if cfg.schedule == "constant":
        return cfg.learning_rate
    total = max(1, cfg.total_steps)
    frac = min(step_index, total) / total
    return 0.5 * cfg.learning_rate * (1.0 + math.cos(math.pi * frac))


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale gradients in place to the global-norm budget; returns the
    pre-clip norm."""
    total = math.sqrt(sum(float((g**2).sum()) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        factor = max_norm / (total + 1e-12)
        for name in grads:
            grads[name] = grads[name] * factor
    return total


def optimizer_update(
    state: AdamState,
    params: Parameters,
    grads: dict[str, np.ndarray],
    step_index: int,
    cfg: TrainConfig,
) -> float:
    """One decoupled-weight-decay adaptive update; returns the lr used."""
    for g in grads.values():
        if not np.all(np.isfinite(g)):
            raise NumericOverflowError("optimizer_update", "non-finite gradient")
    state.step += 1
    t = state.step
    lr = schedule_lr(step_index, cfg)
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, tensor in params.items():
        g = grads[name]
        m = state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        v = state.v[name] = b2 * state.v[name] + (1.0 - b2) * (g * g)
        update = (m / c1) / (np.sqrt(v / c2) + cfg.eps_opt)
        if cfg.weight_decay > 0:
            update = update + cfg.weight_decay * tensor.data
        tensor.data = tensor.data - lr * update
    return lr


# ---------------------------------------------------------------------------
# one combined training step
# ---------------------------------------------------------------------------


def stars_step(
    params: Parameters,
    opt_state: AdamState,
    batch: Batch,
    model_cfg: ModelConfig,
    cfg: TrainConfig,
    loop_rng: np.random.Generator,
    direction_rng: np.random.Generator,
    step_index: int,
) -> StepMetrics:
    """Sample a depth, compute the combined loss, and apply one update.

    The convex objective blends (1 - lambda) cross entropy with lambda times
    the Jacobian penalty; the additive form keeps cross entropy at full
    weight. A non-finite loss or gradient raises before parameters are
    touched.
    """
    t = sample_loop_depth(cfg.loop, loop_rng)
    lam = cfg.lambda_weight
    need_states = cfg.l2_consistency_weight > 0 and t >= 2
    with Graph() as graph:
        h_t, states = run_loop(
            params, batch.tokens, t, model_cfg, keep_states=need_states
        )
        logits = coda_logits(params, h_t, model_cfg)
        l_sft = sft_loss(logits, batch.tokens, batch.loss_mask)
        l_jsrr = None
        if lam > 0:
            l_jsrr = jsrr_loss(
                lambda h: recurrent_block(params, h, model_cfg),
                h_t,
                cfg.power_steps,
                direction_rng,
                cfg.detach_direction,
            )
        if lam > 0 and cfg.objective_form == "convex":
            total = ops.add(ops.scale(l_sft, 1.0 - lam), ops.scale(l_jsrr, lam))
        elif lam > 0:
            total = ops.add(l_sft, ops.scale(l_jsrr, lam))
        else:
            total = l_sft
        l_l2 = None
        if need_states:
            l_l2 = l2_consistency_loss(states)
            total = ops.add(total, ops.scale(l_l2, cfg.l2_consistency_weight))
        if not np.isfinite(total.data):
            raise NumericOverflowError("stars_step", "non-finite loss")
        grads_by_tensor = graph.backward(total, wrt=params.tensors())
    grads = {name: grads_by_tensor[tensor] for name, tensor in params.items()}
    grad_norm = clip_gradients(grads, cfg.grad_clip)
    optimizer_update(opt_state, params, grads, step_index, cfg)
    return StepMetrics(
        step=step_index,
        sampled_t=t,
        sft_loss=float(l_sft.data),
        jsrr_loss=float(l_jsrr.data) if l_jsrr is not None else 0.0,
        l2_loss=float(l_l2.data) if l_l2 is not None else 0.0,
        total_loss=float(total.data),
        gradient_norm=grad_norm,
    )
