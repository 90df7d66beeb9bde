from __future__ import annotations

import numpy as np


class AdaGradState:
    """Diagonal accumulator M of squared gradients, zero at start."""

    def __init__(self, size, mu=1e-8):
        if mu <= 0:
            raise ValueError("mu must be positive")
        self.accumulator = np.zeros(size)
        self.mu = mu


def diag_scale(g, state):
    """Accumulate ``g**2`` into ``state`` and return ``-g / sqrt(mu + M)``."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape != state.accumulator.shape:
        raise ValueError("gradient length does not match the AdaGrad state")
    state.accumulator += g * g
    return -g / np.sqrt(state.mu + state.accumulator)
