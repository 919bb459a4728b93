"""Counter-based Gaussian increments.

Every normal draw is a pure function of ``(seed, path, step, component)``:
the Philox key is ``(seed, path)`` and the Philox counter addresses the
draw position ``step * dim + component``.  Paths can therefore be produced
in any order, by any number of workers, and adding paths never changes
existing ones.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_WORDS_PER_BLOCK = 4
_MANTISSA = 2.0**-53


def _uniform_block(seed: int, path: int, start: int, count: int) -> np.ndarray:
    block, skip = divmod(start, _WORDS_PER_BLOCK)
    counter = np.array([block, 0, 0, 0], dtype=np.uint64)
    key = np.array([seed, path], dtype=np.uint64)
    raw = np.random.Philox(key=key, counter=counter).random_raw(skip + count)[skip:]
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _MANTISSA


def path_normals(seed: int, path: int, n_steps: int, dim: int, step0: int = 0) -> np.ndarray:
    """Standard normals of shape ``(n_steps, dim)`` for one path, starting at ``step0``."""
    u = _uniform_block(int(seed), int(path), int(step0) * dim, n_steps * dim)
    return ndtri(u).reshape(n_steps, dim)


def batch_normals(seed: int, paths: np.ndarray | range, n_steps: int, dim: int, step0: int = 0) -> np.ndarray:
    """Stack :func:`path_normals` for several paths, shape ``(len(paths), n_steps, dim)``."""
    paths = list(paths)
    out = np.empty((len(paths), n_steps, dim))
    for i, p in enumerate(paths):
        out[i] = path_normals(seed, p, n_steps, dim, step0)
    return out


def brownian_increments(seed: int, paths, n_steps: int, dim: int, dt: float, step0: int = 0) -> np.ndarray:
    """Brownian increments ``sqrt(dt) * N(0, I)`` with the layout of :func:`batch_normals`."""
    return np.sqrt(dt) * batch_normals(seed, paths, n_steps, dim, step0)


# Step-major layout for long simulations over many paths.  Draws for step
# ``k`` and path ``p`` come from the stream keyed by ``(seed, k, p // BLOCK)``
# at position ``p % BLOCK``; blocks are fixed, so worker count never changes
# any draw.  The high bit of the second key word separates these streams from
# the path-keyed ones above.

BLOCK = 8192
_STEP_MAJOR = np.uint64(1 << 63)


def step_normals(seed: int, step: int, paths: range, out: np.ndarray | None = None) -> np.ndarray:
    """Standard normals for one step and a contiguous path range, shape ``(len(paths),)``."""
    start, stop = paths.start, paths.stop
    if out is None:
        out = np.empty(stop - start)
    pos = 0
    for block in range(start // BLOCK, (stop - 1) // BLOCK + 1):
        lo = max(start, block * BLOCK) - block * BLOCK
        hi = min(stop, (block + 1) * BLOCK) - block * BLOCK
        word = _STEP_MAJOR | np.uint64(block << 32) | np.uint64(step)
        gen = np.random.Generator(np.random.Philox(key=np.array([seed, word], dtype=np.uint64)))
        draws = gen.standard_normal(hi)
        out[pos:pos + hi - lo] = draws[lo:hi]
        pos += hi - lo
    return out
