"""Deterministic random-stream derivation.

Every stochastic decision in a run draws from a stream keyed by
(run seed, step index, lane), so any step can be recomputed in isolation:
checkpoint resume and prefetch depth cannot change results, and disabling one
training component never shifts the draws of another.
"""

from __future__ import annotations

import numpy as np

LANE_SOURCE = 0
LANE_TARGET = 1
LANE_MIX = 2
LANE_MASK = 3


def step_rng(seed: int, step: int, lane: int) -> np.random.Generator:
    return np.random.default_rng([seed, step, lane])
