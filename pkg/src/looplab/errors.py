"""Exception hierarchy shared across the package."""

from __future__ import annotations


class LoopLabError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatchError(LoopLabError):
    """An operation received operands with incompatible shapes."""

    def __init__(self, op: str, *shapes) -> None:
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        pretty = " vs ".join(str(s) for s in self.shapes)
        super().__init__(f"{op}: incompatible shapes {pretty}")


class NumericOverflowError(LoopLabError):
    """An operation produced NaN or Inf values."""

    def __init__(self, op: str, detail: str = "") -> None:
        self.op = op
        msg = f"{op}: produced non-finite values"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class UnsupportedOpError(LoopLabError):
    """An operation has no registered tangent rule."""

    def __init__(self, op: str) -> None:
        self.op = op
        super().__init__(f"{op}: no tangent rule registered for this op")


class ContractError(LoopLabError):
    """A documented precondition was violated by the caller."""


class VocabularyError(LoopLabError):
    """A token id falls outside the model vocabulary."""


class CapacityError(LoopLabError):
    """A dataset request exceeds the number of distinct problems."""


class ConfigError(LoopLabError):
    """An experiment configuration is malformed or inconsistent."""


class CheckpointError(LoopLabError):
    """A checkpoint file is unreadable or inconsistent with its config."""


class TrainingAborted(LoopLabError):
    """Training stopped because a step produced a non-finite loss."""

    def __init__(self, step: int, reason: str) -> None:
        self.step = step
        super().__init__(f"training aborted at step {step}: {reason}")
