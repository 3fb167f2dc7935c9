"""Multi-digit addition testbed: data, tokenization, and evaluation.

Problems are canonical strings like ``12+34=46`` wrapped in begin/end
markers. Exact-match evaluation conditions on the prefix through ``=`` and
greedily decodes the answer at a chosen recurrent depth; sweeps additionally
report state-norm, successive-delta, and spectral-radius statistics at each
depth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import suspend_graph
from .dynamics import spectral_radius_batch
from .errors import CapacityError, ContractError, VocabularyError
from .model import (
    ModelConfig,
    Parameters,
    coda_logits,
    prelude_embed,
    recurrent_block,
)
from .training import Batch

DATASET_FORMAT_VERSION = 1


class ArithVocab:
    """Digits, '+', '=', and the three special markers; 15 tokens total."""

    def __init__(self) -> None:
        self.tokens = tuple("0123456789") + ("+", "=", "<bos>", "<eos>", "<pad>")
        self.id_of = {tok: i for i, tok in enumerate(self.tokens)}
        self.bos_id = self.id_of["<bos>"]
        self.eos_id = self.id_of["<eos>"]
        self.pad_id = self.id_of["<pad>"]
        self.plus_id = self.id_of["+"]
        self.eq_id = self.id_of["="]

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, text: str) -> list[int]:
        """Token ids for a problem string, wrapped in bos/eos."""
        try:
            body = [self.id_of[ch] for ch in text]
        except KeyError as exc:
            raise VocabularyError(f"cannot encode character {exc.args[0]!r}") from None
        return [self.bos_id] + body + [self.eos_id]

    def decode(self, ids) -> str:
        """The problem string back from ids, dropping markers and padding."""
        out = []
        for i in ids:
            i = int(i)
            if i < 0 or i >= len(self.tokens):
                raise VocabularyError(f"token id {i} outside vocabulary")
            if i in (self.bos_id, self.eos_id, self.pad_id):
                continue
            out.append(self.tokens[i])
        return "".join(out)


VOCAB = ArithVocab()


@dataclass
class DatasetSpec:
    digits_a: int
    digits_b: int
    n_samples: int
    seed: int
    dedupe: bool = False

    def __post_init__(self) -> None:
        if self.digits_a < 1 or self.digits_b < 1:
            raise ContractError("operand digit counts must be >= 1")
        if self.n_samples < 1:
            raise ContractError("n_samples must be >= 1")

    def pair_capacity(self) -> int:
        """Number of distinct (A, B) operand pairs for these digit counts."""
        return (9 * 10 ** (self.digits_a - 1)) * (9 * 10 ** (self.digits_b - 1))

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSpec":
        return cls(**d)


@dataclass
class Sample:
    text: str  # canonical "A+B=C"
    token_ids: list[int]
    answer_span: tuple[int, int]  # [start, end) indices of C's digits

    @property
    def answer(self) -> str:
        lo, hi = self.answer_span
        return "".join(VOCAB.tokens[i] for i in self.token_ids[lo:hi])

    @property
    def prefix_len(self) -> int:
        """Tokens up to and including '='."""
        return self.answer_span[0]


def make_sample(a: int, b: int) -> Sample:
    text = f"{a}+{b}={a + b}"
    ids = VOCAB.encode(text)
    eq = ids.index(VOCAB.eq_id)
    return Sample(text=text, token_ids=ids, answer_span=(eq + 1, len(ids) - 1))


def _draw_operand(rng: np.random.Generator, digits: int) -> int:
    lo = 10 ** (digits - 1)
    return int(rng.integers(lo, 10 * lo))


def generate_dataset(spec: DatasetSpec) -> list[Sample]:
    """Uniformly random operand pairs (leading digits nonzero), exact sums.

    Deterministic per seed. With dedupe, repeated (A, B) pairs are dropped
    before counting toward n_samples.
    """
    if spec.dedupe and spec.n_samples > spec.pair_capacity():
        raise CapacityError(
            f"requested {spec.n_samples} distinct pairs but only "
            f"{spec.pair_capacity()} exist for "
            f"{spec.digits_a}x{spec.digits_b} digits"
        )
    rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed)]))
    samples: list[Sample] = []
    seen: set[tuple[int, int]] = set()
    while len(samples) < spec.n_samples:
        a = _draw_operand(rng, spec.digits_a)
        b = _draw_operand(rng, spec.digits_b)
        if spec.dedupe:
            if (a, b) in seen:
                continue
            seen.add((a, b))
        samples.append(make_sample(a, b))
    return samples


def max_answer_digits(spec: DatasetSpec) -> int:
    hi = (10**spec.digits_a - 1) + (10**spec.digits_b - 1)
    return len(str(hi))


# ---------------------------------------------------------------------------
# dataset files
# ---------------------------------------------------------------------------


def write_dataset(samples: list[Sample], path, spec: DatasetSpec) -> None:
    """One sample string per line plus a sidecar descriptor."""
    path = Path(path)
    path.write_text("".join(s.text + "\n" for s in samples), encoding="utf-8")
    descriptor = {"format_version": DATASET_FORMAT_VERSION, "spec": spec.to_dict()}
    sidecar_path(path).write_text(
        json.dumps(descriptor, indent=2) + "\n", encoding="utf-8"
    )


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_suffix(path.suffix + ".json")


def read_dataset(path) -> tuple[list[Sample], DatasetSpec]:
    path = Path(path)
    descriptor = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
    spec = DatasetSpec.from_dict(descriptor["spec"])
    samples = []
    for line in path.read_text(encoding="utf-8").splitlines():
        a, rest = line.split("+", 1)
        b, c = rest.split("=", 1)
        if int(a) + int(b) != int(c):
            raise ContractError(f"corrupt dataset line: {line!r}")
        samples.append(make_sample(int(a), int(b)))
    return samples, spec


# ---------------------------------------------------------------------------
# batching
# ---------------------------------------------------------------------------


def build_batch(samples: list[Sample], loss_mask: str = "all") -> Batch:
    """Pad a list of samples to a rectangle and build its scoring mask.

    ``loss_mask`` is "all" (every real next-token position) or "answer"
    (only positions whose target lies after '=').
    """
    width = max(len(s.token_ids) for s in samples)
    tokens = np.full((len(samples), width), VOCAB.pad_id, dtype=np.int64)
    mask = np.zeros((len(samples), width - 1), dtype=bool)
    for i, s in enumerate(samples):
        n = len(s.token_ids)
        tokens[i, :n] = s.token_ids
        if loss_mask == "answer":
            # score targets strictly after '='
            mask[i, s.answer_span[0] - 1 : n - 1] = True
        else:
            mask[i, : n - 1] = True
    return Batch(tokens=tokens, loss_mask=mask)


def _chunks(n: int, size: int):
    for lo in range(0, n, size):
        yield lo, min(lo + size, n)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def exact_match_eval(
    params: Parameters,
    cfg: ModelConfig,
    samples: list[Sample],
    t: int,
    mode: str = "greedy",
    batch_size: int = 256,
) -> float:
    """Fraction of samples whose full answer is reproduced at depth t.

    Greedy mode conditions on the prefix through '=' and decodes token by
    token until the end marker; teacher-forced mode checks the argmax at
    every answer position given the ground-truth prefix.
    """
    if not samples:
        raise ContractError("exact_match_eval: no samples")
    if mode not in ("greedy", "teacher"):
        raise ContractError(f"unknown eval mode {mode!r}")
    correct = 0
    with suspend_graph():
        if mode == "greedy":
            for lo, hi in _chunks(len(samples), batch_size):
                correct += _greedy_correct(params, cfg, samples[lo:hi], t)
        else:
            for lo, hi in _chunks(len(samples), batch_size):
                correct += _teacher_correct(params, cfg, samples[lo:hi], t)
    return correct / len(samples)


def _logits_at(params, cfg, tokens: np.ndarray, t: int) -> np.ndarray:
    h = prelude_embed(params, tokens, cfg)
    for _ in range(t):
        h = recurrent_block(params, h, cfg)
    return coda_logits(params, h, cfg).data


def _greedy_correct(params, cfg, samples: list[Sample], t: int) -> int:
    prefix_len = samples[0].prefix_len
    if any(s.prefix_len != prefix_len for s in samples):
        raise ContractError("greedy eval expects samples with equal prefix length")
    max_new = max(len(s.answer) for s in samples) + 1  # room for the end marker
    tokens = np.stack([s.token_ids[:prefix_len] for s in samples]).astype(np.int64)
    for _ in range(max_new):
        logits = _logits_at(params, cfg, tokens, t)
        nxt = logits[:, -1, :].argmax(axis=-1)
        tokens = np.concatenate([tokens, nxt[:, None]], axis=1)
    hits = 0
    for i, s in enumerate(samples):
        generated = tokens[i, prefix_len:]
        decoded = []
        ok = True
        for tok in generated:
            tok = int(tok)
            if tok == VOCAB.eos_id:
                break
            if tok > 9:  # any non-digit before the end marker is a miss
                ok = False
                break
            decoded.append(str(tok))
        if ok and "".join(decoded) == s.answer:
            hits += 1
    return hits


def _teacher_correct(params, cfg, samples: list[Sample], t: int) -> int:
    hits = 0
    groups: dict[int, list[Sample]] = {}
    for s in samples:
        groups.setdefault(len(s.token_ids), []).append(s)
    for group in groups.values():
        tokens = np.stack([s.token_ids for s in group]).astype(np.int64)
        logits = _logits_at(params, cfg, tokens, t)
        preds = logits.argmax(axis=-1)
        for i, s in enumerate(group):
            lo, hi = s.answer_span
            # positions lo-1 .. hi-1 predict the answer digits and the end marker
            want = np.asarray(s.token_ids[lo : hi + 1])
            got = preds[i, lo - 1 : hi]
            hits += int(np.array_equal(want, got))
    return hits


@dataclass
class SweepPoint:
    t: int
    accuracy: float
    mean_state_norm: float
    mean_successive_delta: float
    mean_rho_estimate: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def eval_sweep(
    params: Parameters,
    cfg: ModelConfig,
    samples: list[Sample],
    t_values: list[int],
    probe_steps: int = 8,
    probe_seed: int = 0,
    mode: str = "greedy",
    batch_size: int = 256,
) -> list[SweepPoint]:
    """Accuracy plus latent-state statistics at each requested depth.

    State statistics come from teacher-forced passes over the full strings:
    mean per-token state norm, mean flattened successive delta, and the mean
    power-iteration spectral-radius estimate at that depth's states.
    """
    if not t_values:
        raise ContractError("eval_sweep: t_values must be nonempty")
    if any(t < 1 for t in t_values):
        raise ContractError("eval_sweep: every t must be >= 1")
    wanted = sorted(set(int(t) for t in t_values))
    stats = {t: [0.0, 0.0, 0.0] for t in wanted}  # norm, delta, rho sums
    probe_rng = np.random.default_rng(np.random.SeedSequence([int(probe_seed)]))

    groups: dict[int, list[Sample]] = {}
    for s in samples:
        groups.setdefault(len(s.token_ids), []).append(s)
    with suspend_graph():
        for group in groups.values():
            for lo, hi in _chunks(len(group), batch_size):
                chunk = group[lo:hi]
                tokens = np.stack([s.token_ids for s in chunk]).astype(np.int64)
                h = prelude_embed(params, tokens, cfg)
                prev = h.data
                for k in range(1, max(wanted) + 1):
                    h = recurrent_block(params, h, cfg)
                    if k in stats:
                        cur = h.data
                        token_norms = np.sqrt((cur**2).sum(axis=-1))
                        delta = np.sqrt(
                            ((cur - prev) ** 2).sum(axis=(1, 2))
                        )
                        rho = spectral_radius_batch(
                            lambda s_: recurrent_block(params, s_, cfg),
                            cur,
                            probe_steps,
                            probe_rng,
                        )
                        stats[k][0] += float(token_norms.sum()) / tokens.shape[1]
                        stats[k][1] += float(delta.sum())
                        stats[k][2] += float(rho.sum())
                    prev = h.data
    n = len(samples)
    points = []
    for t in t_values:
        acc = exact_match_eval(params, cfg, samples, t, mode, batch_size)
        s = stats[int(t)]
        points.append(
            SweepPoint(
                t=int(t),
                accuracy=acc,
                mean_state_norm=s[0] / n,
                mean_successive_delta=s[1] / n,
                mean_rho_estimate=s[2] / n,
            )
        )
    return points
