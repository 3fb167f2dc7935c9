"""Experiment configuration: one strict, round-trippable JSON document.

Unknown keys are rejected anywhere in the tree so that typos in sweep grids
fail loudly instead of silently falling back to defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .model import ModelConfig
from .training import LoopDistribution, TrainConfig


def _check_keys(d: dict, cls, path: str) -> None:
    allowed = {f.name for f in dataclasses.fields(cls)}
    for key in d:
        if key not in allowed:
            raise ConfigError(f"unknown config key {path}.{key}")


@dataclass
class DataConfig:
    digits_a: int = 2
    digits_b: int = 2
    n_samples: int = 20000
    dedupe: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class EvalConfig:
    t_values: list[int] = field(default_factory=lambda: [4, 8, 16, 32, 64, 128])
    n_samples: int = 500
    probe_steps: int = 8
    mode: str = "greedy"  # "greedy" | "teacher"

    def __post_init__(self) -> None:
        if not self.t_values:
            raise ConfigError("eval.t_values must be nonempty")
        if self.mode not in ("greedy", "teacher"):
            raise ConfigError(f"unknown eval mode {self.mode!r}")

    def to_dict(self) -> dict:
        return {
            "t_values": list(self.t_values),
            "n_samples": self.n_samples,
            "probe_steps": self.probe_steps,
            "mode": self.mode,
        }


@dataclass
class ExperimentConfig:
    run_name: str
    seed: int = 0
    output_dir: str = "runs"
    model: ModelConfig = field(default_factory=ModelConfig)
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def to_dict(self) -> dict:
        return {
            "run_name": self.run_name,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "model": self.model.to_dict(),
            "data": self.data.to_dict(),
            "train": self.train.to_dict(),
            "eval": self.eval.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config root must be a JSON object")
        _check_keys(d, cls, "config")
        if "run_name" not in d:
            raise ConfigError("config.run_name is required")
        out = {}
        out["run_name"] = d["run_name"]
        out["seed"] = int(d.get("seed", 0))
        out["output_dir"] = d.get("output_dir", "runs")
        try:
            model = dict(d.get("model", {}))
            _check_keys(model, ModelConfig, "config.model")
            out["model"] = ModelConfig.from_dict(model)
            data = dict(d.get("data", {}))
            _check_keys(data, DataConfig, "config.data")
            out["data"] = DataConfig(**data)
            train = dict(d.get("train", {}))
            _check_keys(train, TrainConfig, "config.train")
            if "loop" in train:
                _check_keys(dict(train["loop"]), LoopDistribution, "config.train.loop")
            out["train"] = TrainConfig.from_dict(train)
            ev = dict(d.get("eval", {}))
            _check_keys(ev, EvalConfig, "config.eval")
            out["eval"] = EvalConfig(**ev)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc
        return cls(**out)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc})") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(raw)

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
