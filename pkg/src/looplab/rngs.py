"""Named random substreams derived from one experiment seed.

Every source of randomness in a run (data generation, parameter init, loop
depth sampling, probe directions, evaluation draws) pulls from its own
substream, so ablations that vary one factor share all the others.
"""

from __future__ import annotations

import numpy as np

_STREAMS = {
    "data": 0,
    "init": 1,
    "loop": 2,
    "direction": 3,
    "eval": 4,
    "probe": 5,
}


def subseed(seed: int, stream: str) -> int:
    """A 32-bit seed for the named substream of ``seed``."""
    idx = _STREAMS[stream]
    return int(np.random.SeedSequence([int(seed), idx]).generate_state(1)[0])


def substream(seed: int, stream: str) -> np.random.Generator:
    """A fresh generator for the named substream of ``seed``."""
    idx = _STREAMS[stream]
    return np.random.default_rng(np.random.SeedSequence([int(seed), idx]))


def generator_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def restore_generator(state: dict) -> np.random.Generator:
    rng = np.random.default_rng(0)
    rng.bit_generator.state = state
    return rng
