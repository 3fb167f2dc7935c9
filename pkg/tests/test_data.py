"""Addition testbed: vocabulary, generation, files, and evaluation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from looplab import DatasetSpec, VOCAB, exact_match_eval, generate_dataset
from looplab.addition import (
    build_batch,
    eval_sweep,
    make_sample,
    max_answer_digits,
    read_dataset,
    write_dataset,
)
from looplab.errors import CapacityError, ContractError, VocabularyError

from helpers import tiny_model


def test_vocab_has_fifteen_tokens():
    assert len(VOCAB) == 15
    assert set("0123456789+=").issubset(set(VOCAB.tokens))


@settings(max_examples=50, deadline=None)
@given(a=st.integers(1, 9999), b=st.integers(1, 9999))
def test_encode_decode_round_trip(a, b):
    text = f"{a}+{b}={a + b}"
    ids = VOCAB.encode(text)
    assert VOCAB.decode(ids) == text
    assert VOCAB.encode(VOCAB.decode(ids)) == ids


def test_decode_rejects_out_of_range_ids():
    with pytest.raises(VocabularyError):
        VOCAB.decode([0, 99])
    with pytest.raises(VocabularyError):
        VOCAB.encode("1.5+2=3.5")


def test_four_digit_example_sample():
    s = make_sample(1234, 5678)
    assert s.text == "1234+5678=6912"
    assert s.answer == "6912"
    lo, hi = s.answer_span
    assert [VOCAB.tokens[i] for i in s.token_ids[lo:hi]] == list("6912")


def test_generated_sums_are_exact():
    samples = generate_dataset(DatasetSpec(3, 2, 500, seed=11))
    for s in samples:
        a, rest = s.text.split("+")
        b, c = rest.split("=")
        assert int(a) + int(b) == int(c)
        assert len(a) == 3 and len(b) == 2
        assert s.answer == c


def test_generation_is_deterministic():
    spec = DatasetSpec(2, 2, 200, seed=3)
    one = [s.text for s in generate_dataset(spec)]
    two = [s.text for s in generate_dataset(spec)]
    assert one == two


def test_leading_digits_are_uniform_and_nonzero():
    samples = generate_dataset(DatasetSpec(2, 2, 100_000, seed=5))
    leads = np.array([int(s.text[0]) for s in samples])
    assert leads.min() >= 1
    freq = np.bincount(leads, minlength=10)[1:] / len(samples)
    assert np.all(np.abs(freq - 1.0 / 9.0) <= 0.01)


def test_pair_capacity_and_dedupe():
    spec = DatasetSpec(4, 4, 1, seed=0)
    assert spec.pair_capacity() == 81_000_000
    with pytest.raises(CapacityError):
        generate_dataset(DatasetSpec(1, 1, 82, seed=0, dedupe=True))
    deduped = generate_dataset(DatasetSpec(1, 1, 81, seed=0, dedupe=True))
    pairs = {s.text.split("=")[0] for s in deduped}
    assert len(pairs) == 81


def test_answer_lengths_cover_carries():
    assert max_answer_digits(DatasetSpec(4, 4, 1, seed=0)) == 5
    s = make_sample(99, 99)
    assert s.answer == "198"


def test_dataset_file_round_trip(tmp_path):
    spec = DatasetSpec(2, 2, 50, seed=9)
    samples = generate_dataset(spec)
    path = tmp_path / "data.txt"
    write_dataset(samples, path, spec)
    again, spec2 = read_dataset(path)
    assert [s.text for s in again] == [s.text for s in samples]
    assert spec2 == spec
    # rewriting produces identical bytes
    raw = path.read_bytes()
    write_dataset(again, path, spec2)
    assert path.read_bytes() == raw


def test_corrupt_dataset_line_rejected(tmp_path):
    path = tmp_path / "data.txt"
    spec = DatasetSpec(1, 1, 2, seed=0)
    write_dataset(generate_dataset(spec), path, spec)
    path.write_text("2+2=5\n", encoding="utf-8")
    with pytest.raises(ContractError):
        read_dataset(path)


def test_batch_masks():
    samples = [make_sample(12, 34), make_sample(99, 99)]
    full = build_batch(samples, "all")
    ans = build_batch(samples, "answer")
    # first sample: bos 1 2 + 3 4 = 4 6 eos -> 10 tokens, 9 scored positions
    assert full.tokens.shape == (2, 11)
    assert full.loss_mask[0].sum() == 9
    assert full.loss_mask[1].sum() == 10
    # answer mask scores the sum digits and the end marker only
    assert ans.loss_mask[0].sum() == 3
    assert ans.loss_mask[1].sum() == 4
    lo, hi = samples[0].answer_span
    assert set(np.nonzero(ans.loss_mask[0])[0]) == set(range(lo - 1, hi))


def test_untrained_model_scores_at_chance():
    cfg, params = tiny_model(seed=123, max_seq_len=12)
    samples = generate_dataset(DatasetSpec(2, 2, 1000, seed=77))
    acc = exact_match_eval(params, cfg, samples, t=2)
    assert acc < 0.01


def test_perfect_stub_model_scores_one(monkeypatch):
    cfg, params = tiny_model(seed=1, max_seq_len=16)
    samples = generate_dataset(DatasetSpec(2, 2, 64, seed=13))
    by_prefix = {}
    for s in samples:
        key = tuple(s.token_ids[: s.prefix_len])
        by_prefix[key] = s.token_ids + [VOCAB.eos_id] * 8

    def oracle_logits(params_, cfg_, tokens, t):
        out = np.zeros((tokens.shape[0], tokens.shape[1], cfg_.vocab_size))
        for i, row in enumerate(tokens):
            truth = by_prefix[tuple(int(x) for x in row[: samples[0].prefix_len])]
            nxt = truth[len(row)] if len(row) < len(truth) else VOCAB.eos_id
            out[i, -1, nxt] = 20.0
        return out

    monkeypatch.setattr("looplab.addition._logits_at", oracle_logits)
    assert exact_match_eval(params, cfg, samples, t=1) == 1.0


def test_eval_modes_and_sweep():
    cfg, params = tiny_model(seed=3, max_seq_len=12)
    samples = generate_dataset(DatasetSpec(2, 2, 32, seed=21))
    greedy = exact_match_eval(params, cfg, samples, 2, mode="greedy")
    teacher = exact_match_eval(params, cfg, samples, 2, mode="teacher")
    assert 0.0 <= greedy <= 1.0 and 0.0 <= teacher <= 1.0
    with pytest.raises(ContractError):
        exact_match_eval(params, cfg, samples, 2, mode="oracle")

    points = eval_sweep(params, cfg, samples, [2, 4], probe_steps=2, probe_seed=0)
    assert [p.t for p in points] == [2, 4]
    single = exact_match_eval(params, cfg, samples, 4)
    assert points[1].accuracy == single
    for p in points:
        assert 0.0 <= p.accuracy <= 1.0
        assert p.mean_state_norm > 0
        assert p.mean_rho_estimate > 0
    with pytest.raises(ContractError):
        eval_sweep(params, cfg, samples, [])
    with pytest.raises(ContractError):
        eval_sweep(params, cfg, samples, [0, 2])


def test_four_by_four_dataset_scale():
    # the full-scale corpus: 100k random draws from an 81M-pair space
    samples = generate_dataset(DatasetSpec(4, 4, 100_000, seed=1))
    assert len(samples) == 100_000
    assert DatasetSpec(4, 4, 1, seed=0).pair_capacity() == 81_000_000
    s = samples[0]
    a, rest = s.text.split("+")
    b, _ = rest.split("=")
    assert len(a) == 4 and len(b) == 4
