"""A depth-recurrent (looped) transformer language model.

One weight-shared block of causal transformer layers is applied ``t`` times
between an embedding prelude and an output head, with the normalization
operator and its placement around each sublayer fully configurable. The
latent state visited after each application forms a trajectory that the
diagnostics modules consume.
"""

from __future__ import annotations

import dataclasses
import json
import math
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .autodiff import Tensor, suspend_graph
from .autodiff import ops
from .autodiff.tensor import dtype as engine_dtype
from .errors import CheckpointError, ContractError, VocabularyError
from .rngs import subseed

CHECKPOINT_MAGIC = b"LPLB"
CHECKPOINT_VERSION = 1

INIT_STD = 0.02


class NormOperator(str, Enum):
    LAYERNORM = "layernorm"
    RMSNORM = "rmsnorm"
    SIMPLENORM = "simplenorm"


class NormPlacement(str, Enum):
    PRE = "pre"
    POST = "post"
    PRE_SANDWICH = "pre_sandwich"
    POST_SANDWICH = "post_sandwich"


# Which norm slots each placement uses around a sublayer f:
#   pre:            y = x + f(norm_in(x))
#   post:           y = norm_out(x + f(x))
#   pre_sandwich:   y = x + norm_out(f(norm_in(x)))
#   post_sandwich:  y = norm_out(x + f(norm_in(x)))
_NORM_SLOTS = {
    NormPlacement.PRE: ("in",),
    NormPlacement.POST: ("out",),
    NormPlacement.PRE_SANDWICH: ("in", "out"),
    NormPlacement.POST_SANDWICH: ("in", "out"),
}


@dataclass
class ModelConfig:
    d_model: int = 64
    n_heads: int = 4
    d_ff: int = 128
    n_block_layers: int = 1
    norm_operator: NormOperator = NormOperator.LAYERNORM
    norm_placement: NormPlacement = NormPlacement.POST_SANDWICH
    n_prelude_blocks: int = 0
    n_coda_blocks: int = 0
    vocab_size: int = 15
    max_seq_len: int = 16
    tie_embeddings: bool = False
    norm_eps: float = 1e-5

    def __post_init__(self) -> None:
        self.norm_operator = NormOperator(self.norm_operator)
        self.norm_placement = NormPlacement(self.norm_placement)
        if self.d_model % self.n_heads != 0:
            raise ContractError(
                f"d_model={self.d_model} not divisible by n_heads={self.n_heads}"
            )
        if self.n_block_layers < 1:
            raise ContractError("n_block_layers must be >= 1")
        for name in ("n_prelude_blocks", "n_coda_blocks", "vocab_size", "max_seq_len"):
            if getattr(self, name) < 0:
                raise ContractError(f"{name} must be >= 0")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["norm_operator"] = self.norm_operator.value
        d["norm_placement"] = self.norm_placement.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class Trajectory:
    """The ordered latent states h(0)..h(T) for one input sequence."""

    states: list[np.ndarray]  # each (M, d)
    input_tokens: list[int]

    def __len__(self) -> int:
        return len(self.states)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


class Parameters:
    """Named flat parameter storage; a thin ordered dict of tensors."""

    def __init__(self, tensors: dict[str, Tensor]):
        self._tensors = dict(tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self):
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def tensors(self) -> list[Tensor]:
        return list(self._tensors.values())

    def num_values(self) -> int:
        return sum(t.size for t in self._tensors.values())

    def copy(self) -> "Parameters":
        return Parameters({n: t.copy() for n, t in self._tensors.items()})

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(t.data)) for t in self._tensors.values())


def _block_kinds(cfg: ModelConfig) -> list[str]:
    kinds = [f"prelude.{i}" for i in range(cfg.n_prelude_blocks)]
    kinds.append("loop")
    kinds += [f"coda.{i}" for i in range(cfg.n_coda_blocks)]
    return kinds


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Canonical parameter name -> shape map for a config.

    Drives initialization, checkpoint layout, and checkpoint validation.
    """
    d, ff = cfg.d_model, cfg.d_ff
    shapes: dict[str, tuple[int, ...]] = {
        "tok_emb": (cfg.vocab_size, d),
        "pos_emb": (cfg.max_seq_len, d),
    }
    slots = _NORM_SLOTS[cfg.norm_placement]
    for kind in _block_kinds(cfg):
        for j in range(cfg.n_block_layers):
            base = f"{kind}.{j}"
            for w in ("wq", "wk", "wv", "wo"):
                shapes[f"{base}.attn.{w}"] = (d, d)
            for b in ("bq", "bk", "bv", "bo"):
                shapes[f"{base}.attn.{b}"] = (d,)
            shapes[f"{base}.ffn.w1"] = (d, ff)
            shapes[f"{base}.ffn.b1"] = (ff,)
            shapes[f"{base}.ffn.w2"] = (ff, d)
            shapes[f"{base}.ffn.b2"] = (d,)
            if cfg.norm_operator is not NormOperator.SIMPLENORM:
                for sub in ("attn", "ffn"):
                    for slot in slots:
                        shapes[f"{base}.{sub}_norm_{slot}.gain"] = (d,)
                        if cfg.norm_operator is NormOperator.LAYERNORM:
                            shapes[f"{base}.{sub}_norm_{slot}.bias"] = (d,)
    if not cfg.tie_embeddings:
        shapes["lmhead.w"] = (d, cfg.vocab_size)
    return shapes


def init_parameters(cfg: ModelConfig, seed: int) -> Parameters:
    """Draw fresh parameters: N(0, 0.02) weights with residual output
    projections shrunk by 1/sqrt(2L), unit norm gains, zero biases."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    resid_scale = 1.0 / math.sqrt(2.0 * cfg.n_block_layers)
    tensors: dict[str, Tensor] = {}
    for name, shape in param_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf == "gain":
            data = np.ones(shape)
        elif leaf == "bias" or leaf.startswith("b"):
            data = np.zeros(shape)
        else:
            data = rng.normal(0.0, INIT_STD, size=shape)
            if leaf in ("wo", "w2"):
                data = data * resid_scale
        tensors[name] = Tensor(data, requires_grad=True, name=name)
    return Parameters(tensors)


# ---------------------------------------------------------------------------
# forward computation
# ---------------------------------------------------------------------------

_MASK_CACHE: dict[tuple[int, str], np.ndarray] = {}


def _causal_mask(m: int, dt) -> Tensor:
    key = (m, np.dtype(dt).str)
    cached = _MASK_CACHE.get(key)
    if cached is None:
        cached = np.triu(np.full((m, m), -1e30, dtype=dt), k=1)
        _MASK_CACHE[key] = cached
    return Tensor._wrap(cached)


def _norm(x, params: Parameters, base: str, cfg: ModelConfig):
    op = cfg.norm_operator
    if op is NormOperator.SIMPLENORM:
        return ops.simple_norm(x, cfg.norm_eps)
    gain = params[f"{base}.gain"]
    if op is NormOperator.RMSNORM:
        return ops.rms_norm(x, gain, cfg.norm_eps)
    return ops.layer_norm(x, gain, params[f"{base}.bias"], cfg.norm_eps)


def _sublayer(x, f, params: Parameters, prefix: str, cfg: ModelConfig):
    """Wrap sublayer f around x according to the configured placement."""
    pl = cfg.norm_placement
    if pl is NormPlacement.PRE:
        return ops.add(x, f(_norm(x, params, f"{prefix}_norm_in", cfg)))
    if pl is NormPlacement.POST:
        return _norm(ops.add(x, f(x)), params, f"{prefix}_norm_out", cfg)
    if pl is NormPlacement.PRE_SANDWICH:
        inner = f(_norm(x, params, f"{prefix}_norm_in", cfg))
        return ops.add(x, _norm(inner, params, f"{prefix}_norm_out", cfg))
    inner = f(_norm(x, params, f"{prefix}_norm_in", cfg))
    return _norm(ops.add(x, inner), params, f"{prefix}_norm_out", cfg)


def _attention(h, params: Parameters, base: str, cfg: ModelConfig):
    b, m, d = h.shape
    nh = cfg.n_heads
    dh = d // nh

    def project(w, bias):
        p = ops.add(ops.matmul(h, params[f"{base}.{w}"]), params[f"{base}.{bias}"])
        return ops.transpose(ops.reshape(p, (b, m, nh, dh)), (0, 2, 1, 3))

    q = project("wq", "bq")
    k = project("wk", "bk")
    v = project("wv", "bv")
    scores = ops.scale(ops.matmul(q, ops.transpose(k)), 1.0 / math.sqrt(dh))
    scores = ops.add(scores, _causal_mask(m, engine_dtype()))
    ctx = ops.matmul(ops.softmax(scores), v)
    merged = ops.reshape(ops.transpose(ctx, (0, 2, 1, 3)), (b, m, d))
    return ops.add(ops.matmul(merged, params[f"{base}.wo"]), params[f"{base}.bo"])


def _feedforward(h, params: Parameters, base: str):
    up = ops.add(ops.matmul(h, params[f"{base}.w1"]), params[f"{base}.b1"])
    return ops.add(
        ops.matmul(ops.gelu(up), params[f"{base}.w2"]), params[f"{base}.b2"]
    )


def _apply_block(params: Parameters, h, cfg: ModelConfig, kind: str):
    for j in range(cfg.n_block_layers):
        base = f"{kind}.{j}"
        h = _sublayer(
            h,
            lambda x: _attention(x, params, f"{base}.attn", cfg),
            params,
            f"{base}.attn",
            cfg,
        )
        h = _sublayer(
            h,
            lambda x: _feedforward(x, params, f"{base}.ffn"),
            params,
            f"{base}.ffn",
            cfg,
        )
    return h


def recurrent_block(params: Parameters, h, cfg: ModelConfig):
    """One application of the weight-shared block on a (B, M, d) state."""
    m = h.shape[-2]
    if m > cfg.max_seq_len:
        raise ContractError(
            f"sequence length {m} exceeds max_seq_len {cfg.max_seq_len}"
        )
    return _apply_block(params, h, cfg, "loop")


def single_state_fn(params: Parameters, cfg: ModelConfig, m: int):
    """The recurrent block as a map on a single flattened-free (M, d) state."""
    d = cfg.d_model

    def step(h):
        batched = ops.reshape(h, (1, m, d))
        return ops.reshape(recurrent_block(params, batched, cfg), (m, d))

    return step


def _validate_tokens(tokens, cfg: ModelConfig) -> np.ndarray:
    arr = np.asarray(tokens, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ContractError(f"tokens must be 1-D or 2-D, got shape {arr.shape}")
    if arr.shape[1] > cfg.max_seq_len:
        raise ContractError(
            f"sequence length {arr.shape[1]} exceeds max_seq_len {cfg.max_seq_len}"
        )
    if arr.size and (arr.min() < 0 or arr.max() >= cfg.vocab_size):
        bad = arr[(arr < 0) | (arr >= cfg.vocab_size)][0]
        raise VocabularyError(
            f"token id {int(bad)} outside vocabulary of size {cfg.vocab_size}"
        )
    return arr


def prelude_embed(params: Parameters, tokens: np.ndarray, cfg: ModelConfig):
    """Token plus learned positional embeddings, then any prelude blocks."""
    m = tokens.shape[1]
    h = ops.add(
        ops.embedding(params["tok_emb"], tokens),
        ops.getitem(params["pos_emb"], slice(0, m)),
    )
    for i in range(cfg.n_prelude_blocks):
        h = _apply_block(params, h, cfg, f"prelude.{i}")
    return h


def coda_logits(params: Parameters, h, cfg: ModelConfig):
    """Coda blocks then the vocabulary projection, kept at every position."""
    for i in range(cfg.n_coda_blocks):
        h = _apply_block(params, h, cfg, f"coda.{i}")
    if cfg.tie_embeddings:
        return ops.matmul(h, ops.transpose(params["tok_emb"]))
    return ops.matmul(h, params["lmhead.w"])


def run_loop(
    params: Parameters,
    tokens,
    t: int,
    cfg: ModelConfig,
    keep_states: bool = False,
):
    """Embed, apply the shared block ``t`` times, and return the final state.

    Returns ``(h_t, states)`` where states is the full list h(0)..h(t) of
    graph tensors when requested, else None.
    """
    if t < 0:
        raise ContractError(f"loop count must be >= 0, got {t}")
    arr = _validate_tokens(tokens, cfg)
    h = prelude_embed(params, arr, cfg)
    states = [h] if keep_states else None
    for _ in range(t):
        h = recurrent_block(params, h, cfg)
        if keep_states:
            states.append(h)
    return h, states


def forward(
    params: Parameters,
    tokens,
    t: int,
    cfg: ModelConfig,
    record: bool = False,
):
    """Full forward pass to loop depth ``t``.

    Returns ``(logits, trajectory)``. For a 1-D token sequence the logits
    are (M, V) and the trajectory a single :class:`Trajectory`; for a 2-D
    batch they are (B, M, V) and a list of per-sample trajectories. The
    trajectory is None unless ``record`` is set.
    """
    arr = np.asarray(tokens, dtype=np.int64)
    single = arr.ndim == 1
    h, states = run_loop(params, arr, t, cfg, keep_states=record)
    logits = coda_logits(params, h, cfg)
    if single:
        m = arr.shape[0]
        logits = ops.reshape(logits, (m, cfg.vocab_size))
    traj = None
    if record:
        batch = arr if not single else arr[None, :]
        trajs = [
            Trajectory(
                states=[np.array(s.data[i], copy=True) for s in states],
                input_tokens=[int(x) for x in batch[i]],
            )
            for i in range(batch.shape[0])
        ]
        traj = trajs[0] if single else trajs
    return logits, traj


def trajectory_of(params: Parameters, tokens, t: int, cfg: ModelConfig) -> Trajectory:
    """Record the latent trajectory of one sequence without building a graph."""
    with suspend_graph():
        _, traj = forward(params, np.asarray(tokens, dtype=np.int64), t, cfg, True)
    return traj


# ---------------------------------------------------------------------------
# checkpoint io
# ---------------------------------------------------------------------------


def save_checkpoint(path, cfg: ModelConfig, params: Parameters) -> None:
    """Write config plus named tensors as raw little-endian payloads."""
    entries = []
    payload = bytearray()
    for name, t in params.items():
        arr = np.ascontiguousarray(t.data)
        code = "<f4" if arr.dtype == np.float32 else "<f8"
        entries.append({"name": name, "shape": list(arr.shape), "dtype": code})
        payload += arr.astype(code).tobytes()
    header = json.dumps(
        {
            "version": CHECKPOINT_VERSION,
            "config": cfg.to_dict(),
            "tensors": entries,
        }
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(bytes(payload))


def load_checkpoint(path) -> tuple[ModelConfig, Parameters]:
    """Read a checkpoint, validating version and shapes against its config."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    (hlen,) = struct.unpack("<I", raw[4:8])
    header = json.loads(raw[8 : 8 + hlen].decode("utf-8"))
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: version {header.get('version')} unsupported "
            f"(expected {CHECKPOINT_VERSION})"
        )
    cfg = ModelConfig.from_dict(header["config"])
    expected = param_shapes(cfg)
    offset = 8 + hlen
    tensors: dict[str, Tensor] = {}
    for entry in header["tensors"]:
        name = entry["name"]
        shape = tuple(entry["shape"])
        if name not in expected:
            raise CheckpointError(f"{path}: unexpected tensor {name!r}")
        if shape != expected[name]:
            raise CheckpointError(
                f"{path}: tensor {name!r} has shape {shape}, "
                f"config requires {expected[name]}"
            )
        dt = np.dtype(entry["dtype"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * dt.itemsize
        data = np.frombuffer(raw[offset : offset + nbytes], dtype=dt).reshape(shape)
        offset += nbytes
        tensors[name] = Tensor(data, requires_grad=True, name=name)
    missing = set(expected) - set(tensors)
    if missing:
        raise CheckpointError(f"{path}: missing tensors {sorted(missing)}")
    return cfg, Parameters(tensors)


def default_seed_for_init(seed: int) -> int:
    return subseed(seed, "init")
