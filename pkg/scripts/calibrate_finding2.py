"""Calibration for the normalization-placement failure modes (criterion 4).

Trains the two placement variants at fixed depth 4 until train accuracy
clears 99%, then sweeps test-time depth to check the divergence (internal
norm) and collapse (external norm) signatures.
"""

import sys
import time

import numpy as np

sys.path.insert(0, "src")

import looplab as ll
from looplab import addition

ll.set_precision(32)


def train_one(placement, operator, seed, max_steps=4000, lr=1e-3):
    cfg = ll.ModelConfig(
        d_model=64, n_heads=4, d_ff=128, n_block_layers=1,
        norm_placement=placement, norm_operator=operator,
    )
    params = ll.init_parameters(cfg, seed)
    samples = ll.generate_dataset(ll.DatasetSpec(2, 2, 20000, seed=7))
    tc = ll.TrainConfig(
        lambda_weight=0.0, loop=ll.LoopDistribution.fixed(4),
        learning_rate=lr, schedule="cosine", batch_size=128,
        total_steps=max_steps, loss_mask="all",
    )
    opt = ll.AdamState(params)
    r1, r2 = np.random.default_rng(20), np.random.default_rng(21)
    shuffle = np.random.default_rng(22)
    order = shuffle.permutation(len(samples))
    cursor = 0
    t0 = time.time()
    for i in range(max_steps):
        if cursor + tc.batch_size > len(samples):
            order = shuffle.permutation(len(samples))
            cursor = 0
        batch = addition.build_batch(
            [samples[j] for j in order[cursor:cursor + tc.batch_size]]
        )
        cursor += tc.batch_size
        ll.stars_step(params, opt, batch, cfg, tc, r1, r2, i)
        if (i + 1) % 250 == 0:
            acc = ll.exact_match_eval(params, cfg, samples[:512], 4)
            print(
                f"[{placement}/{operator}] step {i+1}: acc@4={acc:.4f} "
                f"({time.time()-t0:.0f}s)",
                flush=True,
            )
            if acc >= 0.995:
                print(f"[{placement}/{operator}] reached target at step {i+1}")
                break
    heldout = ll.generate_dataset(ll.DatasetSpec(2, 2, 200, seed=99))
    pts = ll.eval_sweep(params, cfg, heldout, [4, 8, 16, 32, 64],
                        probe_steps=8, probe_seed=3)
    for p in pts:
        print(
            f"    t={p.t:<3d} acc={p.accuracy:.4f} norm={p.mean_state_norm:.4f} "
            f"delta={p.mean_successive_delta:.4f} rho={p.mean_rho_estimate:.4f}",
            flush=True,
        )
    return pts


print("=== pre / layernorm ===")
train_one("pre", "layernorm", seed=101)
print("=== post_sandwich / simplenorm ===")
train_one("post_sandwich", "simplenorm", seed=101)
