"""Experiment driver: dataset files, training runs, sweeps, and analysis.

Each run owns a directory under the experiment's output_dir holding a
manifest (config plus its hash), a line-delimited metrics log, checkpoints,
delimited result tables, JSON analysis documents, and rendered figures.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .addition import (
    DatasetSpec,
    Sample,
    SweepPoint,
    build_batch,
    eval_sweep,
    exact_match_eval,
    generate_dataset,
    make_sample,
    read_dataset,
    write_dataset,
)
from .config import ExperimentConfig
from .dynamics import estimate_spectral_radius, pca_project, trajectory_stats
from .errors import (
    CheckpointError,
    ConfigError,
    LoopLabError,
    NumericOverflowError,
    TrainingAborted,
)
from .model import (
    ModelConfig,
    Parameters,
    init_parameters,
    load_checkpoint,
    save_checkpoint,
    single_state_fn,
    trajectory_of,
)
from .rngs import generator_state, restore_generator, subseed, substream
from .training import AdamState, stars_step

SWEEP_COLUMNS = [
    "t",
    "exact_match_accuracy",
    "mean_state_norm",
    "mean_successive_delta",
    "mean_rho_estimate",
]


@dataclass
class RunArtifacts:
    run_dir: Path
    manifest_path: Path
    metrics_path: Path
    final_checkpoint: Path


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(cfg.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def run_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.output_dir) / cfg.run_name


def dataset_path(cfg: ExperimentConfig) -> Path:
    d = cfg.data
    seed = subseed(cfg.seed, "data")
    name = f"dataset_{d.digits_a}x{d.digits_b}_n{d.n_samples}_seed{seed}.txt"
    return Path(cfg.output_dir) / name


def data_spec(cfg: ExperimentConfig) -> DatasetSpec:
    d = cfg.data
    return DatasetSpec(
        digits_a=d.digits_a,
        digits_b=d.digits_b,
        n_samples=d.n_samples,
        seed=subseed(cfg.seed, "data"),
        dedupe=d.dedupe,
    )


def eval_samples(cfg: ExperimentConfig, n: int | None = None) -> list[Sample]:
    """Freshly drawn evaluation problems from the task's own substream."""
    spec = DatasetSpec(
        digits_a=cfg.data.digits_a,
        digits_b=cfg.data.digits_b,
        n_samples=n or cfg.eval.n_samples,
        seed=subseed(cfg.seed, "eval"),
        dedupe=False,
    )
    return generate_dataset(spec)


def gen_data(cfg: ExperimentConfig) -> Path:
    """Write the training dataset file (idempotent per config)."""
    path = dataset_path(cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    samples = generate_dataset(data_spec(cfg))
    write_dataset(samples, path, data_spec(cfg))
    return path


def write_manifest(cfg: ExperimentConfig, directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config_hash": config_hash(cfg),
        "code_version": __version__,
        "config": cfg.to_dict(),
    }
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def _trainer_state_path(directory: Path) -> Path:
    return directory / "trainer_state.npz"


def _save_trainer_state(
    path: Path,
    step: int,
    opt: AdamState,
    cursor: int,
    order: np.ndarray,
    rng_states: dict[str, dict],
) -> None:
    arrays = {"step": np.asarray(step), "cursor": np.asarray(cursor), "order": order}
    arrays["adam_step"] = np.asarray(opt.step)
    for name, m in opt.m.items():
        arrays[f"m::{name}"] = m
    for name, v in opt.v.items():
        arrays[f"v::{name}"] = v
    arrays["rngs"] = np.frombuffer(
        json.dumps(rng_states).encode("utf-8"), dtype=np.uint8
    )
    np.savez(path, **arrays)


def _load_trainer_state(path: Path, opt: AdamState):
    with np.load(path) as z:
        step = int(z["step"])
        cursor = int(z["cursor"])
        order = z["order"].copy()
        opt.step = int(z["adam_step"])
        for key in z.files:
            if key.startswith("m::"):
                opt.m[key[3:]] = z[key].copy()
            elif key.startswith("v::"):
                opt.v[key[3:]] = z[key].copy()
        rng_states = json.loads(bytes(z["rngs"].tobytes()).decode("utf-8"))
    return step, cursor, order, rng_states


def train_run(
    cfg: ExperimentConfig,
    resume: bool = False,
    log=print,
) -> RunArtifacts:
    """Run the configured number of steps, checkpointing along the way.

    Requires the dataset file (see :func:`gen_data`). Resumable from the
    saved trainer state; the final checkpoint is always written.
    """
    directory = run_dir(cfg)
    manifest = write_manifest(cfg, directory)
    metrics_path = directory / "metrics.jsonl"
    ckpt_dir = directory / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    final_ckpt = ckpt_dir / "final.bin"

    path = dataset_path(cfg)
    if not path.exists():
        raise ConfigError(
            f"dataset {path} not found; run gen-data with this config first"
        )
    samples, _ = read_dataset(path)

    tc = cfg.train
    params = init_parameters(cfg.model, subseed(cfg.seed, "init"))
    opt = AdamState(params)
    rng_loop = substream(cfg.seed, "loop")
    rng_dir = substream(cfg.seed, "direction")
    rng_shuffle = np.random.default_rng(
        np.random.SeedSequence([int(cfg.seed), 6])
    )
    order = rng_shuffle.permutation(len(samples))
    cursor = 0
    start_step = 0

    state_path = _trainer_state_path(directory)
    if resume:
        latest = _latest_checkpoint(ckpt_dir)
        if latest is None or not state_path.exists():
            raise CheckpointError(f"nothing to resume from in {directory}")
        _, params = load_checkpoint(latest)
        opt = AdamState(params)
        start_step, cursor, order, rng_states = _load_trainer_state(state_path, opt)
        rng_loop = restore_generator(rng_states["loop"])
        rng_dir = restore_generator(rng_states["direction"])
        rng_shuffle = restore_generator(rng_states["shuffle"])
        log(f"resumed from {latest} at step {start_step}")
    else:
        metrics_path.write_text("", encoding="utf-8")

    eval_t = tc.eval_t
    if eval_t is None:
        eval_t = (
            tc.loop.t_fixed
            if tc.loop.kind == "fixed"
            else int(np.median(range(tc.loop.clip_min, tc.loop.clip_max + 1)))
        )
    eval_subset = samples[: tc.eval_samples]

    def checkpoint(step: int, tag: str | None = None) -> Path:
        name = f"step_{step:06d}.bin" if tag is None else f"{tag}.bin"
        target = ckpt_dir / name
        save_checkpoint(target, cfg.model, params)
        _save_trainer_state(
            state_path,
            step,
            opt,
            cursor,
            order,
            {
                "loop": generator_state(rng_loop),
                "direction": generator_state(rng_dir),
                "shuffle": generator_state(rng_shuffle),
            },
        )
        return target

    stopped_early = False
    step = start_step
    with open(metrics_path, "a", encoding="utf-8") as metrics_file:
        for step in range(start_step, tc.total_steps):
            if cursor + tc.batch_size > len(samples):
                order = rng_shuffle.permutation(len(samples))
                cursor = 0
            chosen = [samples[i] for i in order[cursor : cursor + tc.batch_size]]
            cursor += tc.batch_size
            batch = build_batch(chosen, tc.loss_mask)
            try:
                metrics = stars_step(
                    params, opt, batch, cfg.model, tc, rng_loop, rng_dir, step
                )
            except NumericOverflowError as exc:
                record = {"step": step, "error": str(exc)}
                metrics_file.write(json.dumps(record) + "\n")
                metrics_file.flush()
                raise TrainingAborted(step, str(exc)) from exc
            if tc.probe_interval and step % tc.probe_interval == 0:
                metrics.rho_probe = _probe_once(
                    params, cfg.model, chosen[0], metrics.sampled_t,
                    cfg.eval.probe_steps, subseed(cfg.seed, "probe") + step,
                )
            metrics_file.write(json.dumps(metrics.to_dict()) + "\n")
            if tc.checkpoint_interval and (step + 1) % tc.checkpoint_interval == 0:
                metrics_file.flush()
                checkpoint(step + 1)
            if tc.eval_interval and (step + 1) % tc.eval_interval == 0:
                acc = exact_match_eval(
                    params, cfg.model, eval_subset, eval_t, cfg.eval.mode
                )
                log(
                    f"step {step + 1}/{tc.total_steps} "
                    f"loss {metrics.total_loss:.4f} "
                    f"acc@t={eval_t} {acc:.4f}"
                )
                if tc.target_accuracy is not None and acc >= tc.target_accuracy:
                    stopped_early = True
                    step += 1
                    break
        else:
            step = tc.total_steps

    save_checkpoint(final_ckpt, cfg.model, params)
    _save_trainer_state(
        state_path,
        step,
        opt,
        cursor,
        order,
        {
            "loop": generator_state(rng_loop),
            "direction": generator_state(rng_dir),
            "shuffle": generator_state(rng_shuffle),
        },
    )
    if stopped_early:
        log(f"target accuracy reached; stopped at step {step}")
    _render_training_figure(metrics_path, directory)
    return RunArtifacts(directory, manifest, metrics_path, final_ckpt)


def _latest_checkpoint(ckpt_dir: Path) -> Path | None:
    candidates = sorted(ckpt_dir.glob("step_*.bin"))
    if (ckpt_dir / "final.bin").exists():
        return ckpt_dir / "final.bin"
    return candidates[-1] if candidates else None


def _probe_once(params, model_cfg, sample, t, k_steps, seed) -> float:
    traj = trajectory_of(params, sample.token_ids, t, model_cfg)
    fn = single_state_fn(params, model_cfg, len(sample.token_ids))
    probe = estimate_spectral_radius(
        fn, traj.final_state, k_steps, seed=seed, at_iteration=t
    )
    return probe.rho_estimate


def _render_training_figure(metrics_path: Path, directory: Path) -> None:
    from . import figures

    rows = load_metrics(metrics_path)
    if rows:
        figures.render_training_curves(rows, directory / "training.png")


def load_metrics(path) -> list[dict]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            rows.append(json.loads(line))
    return [r for r in rows if "error" not in r]


def load_run_checkpoint(
    cfg: ExperimentConfig, checkpoint: Path | str | None
) -> tuple[ModelConfig, Parameters]:
    """Load a checkpoint and insist it matches the experiment's model config."""
    path = Path(checkpoint) if checkpoint else run_dir(cfg) / "checkpoints/final.bin"
    if not path.exists():
        raise CheckpointError(f"checkpoint {path} does not exist")
    model_cfg, params = load_checkpoint(path)
    if model_cfg.to_dict() != cfg.model.to_dict():
        raise ConfigError(
            f"checkpoint {path} was produced by a different model config"
        )
    return model_cfg, params


# ---------------------------------------------------------------------------
# evaluation sweep
# ---------------------------------------------------------------------------


def eval_sweep_run(
    cfg: ExperimentConfig,
    checkpoint: Path | str | None = None,
    out_dir: Path | str | None = None,
) -> list[SweepPoint]:
    """Sweep the test-time depth and write the delimited table plus figure."""
    model_cfg, params = load_run_checkpoint(cfg, checkpoint)
    samples = eval_samples(cfg)
    points = eval_sweep(
        params,
        model_cfg,
        samples,
        cfg.eval.t_values,
        probe_steps=cfg.eval.probe_steps,
        probe_seed=subseed(cfg.seed, "probe"),
        mode=cfg.eval.mode,
    )
    directory = Path(out_dir) if out_dir else run_dir(cfg)
    directory.mkdir(parents=True, exist_ok=True)
    table = directory / "sweep.csv"
    with open(table, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for p in points:
            writer.writerow(
                [
                    p.t,
                    f"{p.accuracy:.6f}",
                    f"{p.mean_state_norm:.6f}",
                    f"{p.mean_successive_delta:.6f}",
                    f"{p.mean_rho_estimate:.6f}",
                ]
            )
    from . import figures

    figures.render_sweep(points, directory / "sweep.png")
    return points


# ---------------------------------------------------------------------------
# single-input analysis
# ---------------------------------------------------------------------------


def analyze_run(
    cfg: ExperimentConfig,
    checkpoint: Path | str | None = None,
    sample_text: str | None = None,
    t_max: int | None = None,
    out_dir: Path | str | None = None,
) -> dict:
    """Trajectory, convergence verdict, PCA, and per-depth spectral probes
    for one input, written as a single JSON document plus figure."""
    model_cfg, params = load_run_checkpoint(cfg, checkpoint)
    if sample_text is None:
        sample = eval_samples(cfg, n=1)[0]
    else:
        a, rest = sample_text.split("+", 1)
        b = rest.split("=", 1)[0]
        sample = make_sample(int(a), int(b))
    t = t_max or max(cfg.eval.t_values)
    traj = trajectory_of(params, sample.token_ids, t, model_cfg)
    report = trajectory_stats(traj)
    pca = pca_project(traj)
    fn = single_state_fn(params, model_cfg, len(sample.token_ids))
    probe_seed = subseed(cfg.seed, "probe")
    probes = [
        estimate_spectral_radius(
            fn, state, cfg.eval.probe_steps, seed=probe_seed + k, at_iteration=k
        )
        for k, state in enumerate(traj.states)
    ]
    doc = {
        "input": sample.text,
        "t_max": t,
        "trajectory": [
            {
                "t": k,
                "state_norm": report.state_norms[k],
                "delta": report.deltas[k - 1] if k > 0 else None,
            }
            for k in range(len(traj.states))
        ],
        "pca": pca.to_dict(),
        "convergence": report.to_dict(),
        "probes": [p.to_dict() for p in probes],
    }
    directory = Path(out_dir) if out_dir else run_dir(cfg)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "analysis.json").write_text(
        json.dumps(doc, indent=2) + "\n", encoding="utf-8"
    )
    from . import figures

    figures.render_analysis(doc, directory / "analysis.png")
    return doc


# ---------------------------------------------------------------------------
# regularization-weight sweep
# ---------------------------------------------------------------------------


def lambda_sweep_run(
    cfg: ExperimentConfig,
    lambdas: list[float],
    out_dir: Path | str | None = None,
    log=print,
) -> list[dict]:
    """Train one run per weight with shared seed and data, then compare
    accuracy-over-depth curves. Individual failures are recorded and the
    sweep continues."""
    if not lambdas:
        raise ConfigError("lambda sweep needs at least one value")
    directory = Path(out_dir) if out_dir else run_dir(cfg)
    directory.mkdir(parents=True, exist_ok=True)
    results: list[dict] = []
    curves: dict[float, list[SweepPoint]] = {}
    for lam in lambdas:
        sub_dict = cfg.to_dict()
        sub_dict["run_name"] = f"{cfg.run_name}_lam{lam:g}"
        sub_dict["train"]["lambda_weight"] = lam
        sub = ExperimentConfig.from_dict(sub_dict)
        try:
            train_run(sub, log=log)
            points = eval_sweep_run(sub)
            curves[lam] = points
            for p in points:
                results.append(
                    {"lambda": lam, "t": p.t, "exact_match_accuracy": p.accuracy}
                )
        except LoopLabError as exc:
            log(f"lambda={lam}: run failed: {exc}")
            results.append({"lambda": lam, "t": None, "error": str(exc)})
    table = directory / "lambda_sweep.csv"
    with open(table, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "t", "exact_match_accuracy"])
        for row in results:
            if "error" in row:
                writer.writerow([row["lambda"], "", f"error: {row['error']}"])
            else:
                writer.writerow(
                    [row["lambda"], row["t"], f"{row['exact_match_accuracy']:.6f}"]
                )
    if curves:
        from . import figures

        figures.render_lambda_sweep(curves, directory / "lambda_sweep.png")
    return results
