"""Reproducible, per-path Brownian increments.

Seeding function (stable across releases):

* each path owns a Philox-4x64 counter-based stream whose 128-bit key is
  ``(master_seed mod 2**64, path_index)`` and whose counter starts at zero;
* raw 64-bit outputs ``r`` become uniforms ``u = ((r >> 11) + 0.5) * 2**-53``,
  which lie strictly inside (0, 1);
* normals are ``ndtri(u)`` (inverse standard normal CDF), scaled by
  ``sqrt(delta)``.

Increment ``k`` of Brownian component ``j`` is raw draw number ``k * m + j``.
No generator state is shared between paths, so any partition of the path
indices over workers produces the same numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class IncrementGrid:
    master_seed: int
    path_index: int
    n_steps: int
    m: int
    delta: float
    values: np.ndarray

    def brownian_path(self) -> np.ndarray:
        """B(t_k) for k = 0..N, shape ``(N + 1, m)``."""
        out = np.zeros((self.n_steps + 1, self.m))
        np.cumsum(self.values, axis=0, out=out[1:])
        return out


def standard_normals(master_seed: int, path_index: int, count: int) -> np.ndarray:
    if path_index < 0:
        raise ValueError(f"path_index must be >= 0, got {path_index}")
    bitgen = np.random.Philox(key=np.array([master_seed & _MASK64, path_index], dtype=np.uint64))
    raw = bitgen.random_raw(count)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def generate_increments(master_seed: int, path_index: int, n_steps: int, m: int, delta: float) -> IncrementGrid:
    if n_steps < 1 or m < 1:
        raise ValueError(f"need n_steps >= 1 and m >= 1, got {n_steps}, {m}")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    z = standard_normals(master_seed, path_index, n_steps * m).reshape(n_steps, m)
    return IncrementGrid(master_seed, path_index, n_steps, m, float(delta), z * np.sqrt(delta))


def increment_block(master_seed: int, path_indices, n_steps: int, m: int, delta: float) -> np.ndarray:
    """Stacked increments for several paths, shape ``(n_paths, n_steps, m)``."""
    idx = list(path_indices)
    out = np.empty((len(idx), n_steps, m))
    scale = np.sqrt(delta)
    for row, p in enumerate(idx):
        out[row] = standard_normals(master_seed, p, n_steps * m).reshape(n_steps, m) * scale
    return out


def coarsen_values(values: np.ndarray, factor: int) -> np.ndarray:
    """Block sums along the step axis (second to last) of an increment array."""
    if factor < 2 or int(factor) != factor:
        raise ValueError(f"coarsening factor must be an integer >= 2, got {factor}")
    n_steps = values.shape[-2]
    if n_steps % factor:
        raise ValueError(f"{n_steps} steps are not divisible by factor {factor}")
    shape = values.shape[:-2] + (n_steps // factor, factor, values.shape[-1])
    return values.reshape(shape).sum(axis=-2)


def coarsen(fine: IncrementGrid, factor: int) -> IncrementGrid:
    values = coarsen_values(fine.values, factor)
    return IncrementGrid(
        fine.master_seed,
        fine.path_index,
        values.shape[0],
        fine.m,
        fine.delta * factor,
        values,
    )
