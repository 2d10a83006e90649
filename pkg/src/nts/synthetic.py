"""Built-in planar vector field with two affine regimes, for demos and tests.

Trajectories launched in the upper-right of the unit square first head toward
a turn point, cross into the left regime, and settle on the attractor,
tracing an angled path. The map is contractive in both regimes, so every
trajectory converges.
"""

from __future__ import annotations

import numpy as np

from .traces import Trace, TraceSet

__all__ = ["ATTRACTOR", "angle_step", "angle_traces", "DEFAULT_START_LOWER", "DEFAULT_START_UPPER"]

ATTRACTOR = np.array([0.15, 0.15])
_TURN_TARGET = np.array([0.40, 0.18])
_SPLIT = 0.5
_RATE = 0.3

DEFAULT_START_LOWER = (0.60, 0.55)
DEFAULT_START_UPPER = (0.95, 0.95)


def angle_step(x: np.ndarray) -> np.ndarray:
    """One step of the two-regime map."""
    target = _TURN_TARGET if x[0] >= _SPLIT else ATTRACTOR
    return x + _RATE * (target - x)


def angle_traces(
    num_traces: int,
    horizon: int,
    seed: int,
    start_lower=DEFAULT_START_LOWER,
    start_upper=DEFAULT_START_UPPER,
) -> TraceSet:
    """Sample trajectories of the field from uniform random starting points."""
    rng = np.random.default_rng(seed)
    lower = np.asarray(start_lower, dtype=float)
    upper = np.asarray(start_upper, dtype=float)
    traces = []
    for _ in range(num_traces):
        x = lower + rng.random(2) * (upper - lower)
        states = [x]
        for _ in range(horizon):
            states.append(angle_step(states[-1]))
        traces.append(Trace(np.array(states)))
    return TraceSet(traces)
