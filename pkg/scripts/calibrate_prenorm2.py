"""Second calibration pass for the internal-norm run: gentler learning rate."""

import sys
import time

import numpy as np

sys.path.insert(0, "src")

import looplab as ll
from looplab import addition

ll.set_precision(32)


def train_one(lr, max_steps, seed, label):
    cfg = ll.ModelConfig(
        d_model=64, n_heads=4, d_ff=128, n_block_layers=1,
        norm_placement="pre", norm_operator="layernorm",
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
        if (i + 1) % 500 == 0:
            acc = ll.exact_match_eval(params, cfg, samples[:512], 4)
            print(f"[{label}] step {i+1}: acc@4={acc:.4f} ({time.time()-t0:.0f}s)",
                  flush=True)
            if acc >= 0.995:
                print(f"[{label}] reached target at step {i+1}")
                break
    heldout = ll.generate_dataset(ll.DatasetSpec(2, 2, 200, seed=99))
    pts = ll.eval_sweep(params, cfg, heldout, [4, 8, 16, 32, 64],
                        probe_steps=8, probe_seed=3)
    for p in pts:
        print(f"    t={p.t:<3d} acc={p.accuracy:.4f} norm={p.mean_state_norm:.4f} "
              f"rho={p.mean_rho_estimate:.4f}", flush=True)


train_one(5e-4, 8000, seed=101, label="lr5e-4")
