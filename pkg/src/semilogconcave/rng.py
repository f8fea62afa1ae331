"""Counter-based Gaussian increments.

Every trajectory owns a Philox stream keyed by ``(seed, stream, trajectory
index)``.  Draws are consumed strictly in step order, ``d`` values per step, so
the increment of trajectory ``i`` at step ``k`` coordinate ``j`` is the
``k*d + j``-th output of its stream.  That makes a batch independent of how
trajectories are split across chunks or workers.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0**-53


def _uniform_from_raw(raw: np.ndarray) -> np.ndarray:
    # 53 high bits, shifted half an ulp so 0 and 1 are never produced
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53


def trajectory_key(seed: int, stream: int, index: int) -> list[int]:
    if not 0 <= index < (1 << 32):
        raise ValueError(f"trajectory index {index} outside [0, 2**32)")
    if not 0 <= stream < (1 << 32):
        raise ValueError(f"stream {stream} outside [0, 2**32)")
    return [int(seed) & _MASK64, (int(stream) << 32) | int(index)]


class NoiseSource:
    """Standard normal increments for a set of trajectory indices.

    Parameters
    ----------
    seed : int
        64-bit experiment seed.
    indices : array_like of int
        Global trajectory indices handled by this source.
    dim : int
        Number of coordinates per step.
    stream : int
        Independent stream tag (0 for the main driver, 1 for an independent
        second copy, ...).
    """

    def __init__(self, seed: int, indices, dim: int, stream: int = 0):
        self.seed = int(seed)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.dim = int(dim)
        self.stream = int(stream)
        self._gens = [
            np.random.Philox(key=trajectory_key(self.seed, self.stream, int(i)))
            for i in self.indices
        ]
        self.steps_drawn = 0

    def next(self, n_steps: int) -> np.ndarray:
        """Return increments of shape ``(n_steps, n_traj, dim)``."""
        n = len(self._gens)
        count = n_steps * self.dim
        raw = np.empty((n, count), dtype=np.uint64)
        for row, gen in enumerate(self._gens):
            raw[row] = gen.random_raw(count)
        z = ndtri(_uniform_from_raw(raw)).reshape(n, n_steps, self.dim)
        self.steps_drawn += n_steps
        return np.ascontiguousarray(z.transpose(1, 0, 2))


def child_generator(seed: int, *tags: int) -> np.random.Generator:
    """A numpy Generator for auxiliary randomness (initial samplers, bootstrap)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & _MASK64, *tags])))
