"""Calibration run for the stability-trained model (criterion-5 recipe).

Trains with the pinned recipe and reports the depth sweep at checkpoints so
the acceptance budget (total_steps) can be fixed empirically.
"""

import sys
import time

import numpy as np

sys.path.insert(0, "src")

import looplab as ll
from looplab import addition
from looplab.model import save_checkpoint

ll.set_precision(32)

cfg = ll.ModelConfig(
    d_model=64, n_heads=4, d_ff=128, n_block_layers=1,
    norm_placement="post_sandwich", norm_operator="layernorm",
)
params = ll.init_parameters(cfg, 12345)
samples = ll.generate_dataset(ll.DatasetSpec(2, 2, 20000, seed=7))
heldout = ll.generate_dataset(ll.DatasetSpec(2, 2, 300, seed=99))

TOTAL = 15000
tc = ll.TrainConfig(
    lambda_weight=0.1, objective_form="convex", power_steps=1,
    loop=ll.LoopDistribution.lognormal(1.6, 0.6, 1, 32),
    learning_rate=1e-4, schedule="cosine", batch_size=64,
    total_steps=TOTAL, loss_mask="all",
)
opt = ll.AdamState(params)
r1, r2 = np.random.default_rng(10), np.random.default_rng(11)
shuffle = np.random.default_rng(12)
order = shuffle.permutation(len(samples))
cursor = 0
t0 = time.time()
for i in range(TOTAL):
    if cursor + tc.batch_size > len(samples):
        order = shuffle.permutation(len(samples))
        cursor = 0
    batch = addition.build_batch(
        [samples[j] for j in order[cursor:cursor + tc.batch_size]], tc.loss_mask
    )
    cursor += tc.batch_size
    m = ll.stars_step(params, opt, batch, cfg, tc, r1, r2, i)
    if (i + 1) % 500 == 0:
        acc8 = ll.exact_match_eval(params, cfg, samples[:512], 8)
        print(
            f"step {i+1}: sft={m.sft_loss:.3f} jsrr={m.jsrr_loss:.4f} "
            f"acc@8={acc8:.4f} ({time.time()-t0:.0f}s)",
            flush=True,
        )
    if (i + 1) % 2500 == 0:
        pts = ll.eval_sweep(params, cfg, heldout, [4, 8, 16, 32, 64, 128],
                            probe_steps=8, probe_seed=3)
        for p in pts:
            print(
                f"    t={p.t:<4d} acc={p.accuracy:.4f} norm={p.mean_state_norm:.3f} "
                f"delta={p.mean_successive_delta:.5f} rho={p.mean_rho_estimate:.4f}",
                flush=True,
            )
        save_checkpoint(f"/tmp/stars_step{i+1}.bin", cfg, params)
print(f"done in {time.time()-t0:.0f}s")
