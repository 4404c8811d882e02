"""Seeded Brownian increments on dyadic grids with exact coarsening.

Grids store increments W_i(t_{k+1}) - W_i(t_k) on the uniform grid
t_k = k * horizon / n with n = 2**level.  A grid at level L - 1 derived by
``coarsen`` carries exactly the pairwise sums of its parent's increments,
so simulations at neighboring resolutions share one underlying path.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = ["IncrementGrid", "split", "generate", "coarsen", "dump_csv"]


def split(seed: int, index: int) -> int:
    """Derive an independent 64-bit stream seed from (seed, index)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class IncrementGrid:
    """d x n table of Brownian increments; entry (i, k) spans [t_k, t_{k+1}]."""

    d: int
    level: int
    horizon: float
    seed: int
    increments: np.ndarray

    def __post_init__(self):
        if self.increments.shape != (self.d, self.n):
            raise ValueError(
                f"increments must be {self.d}x{self.n}, got {self.increments.shape}"
            )
        self.increments.setflags(write=False)

    @property
    def n(self) -> int:
        return 1 << self.level

    @property
    def dt(self) -> float:
        return self.horizon / self.n


def generate(seed: int, d: int, level: int, horizon: float) -> IncrementGrid:
    """Generate a grid of Normal(0, horizon/n) increments, n = 2**level.

    Channel i draws from its own PCG64 stream keyed by (seed, i), so the
    same (seed, d, level, horizon) always reproduces the same table and
    channels are independent.
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    if d < 1:
        raise ValueError("d must be >= 1")
    if not horizon > 0.0:
        raise ValueError("horizon must be > 0")
    n = 1 << level
    scale = np.sqrt(horizon / n)
    inc = np.empty((d, n))
    for i in range(d):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        )
        inc[i] = rng.standard_normal(n) * scale
    return IncrementGrid(d=d, level=level, horizon=horizon, seed=seed, increments=inc)


def coarsen(grid: IncrementGrid) -> IncrementGrid:
    """Halve the resolution; each coarse increment is the exact sum of its two children."""
    if grid.level < 1:
        raise ValueError("cannot coarsen a level-0 grid")
    inc = grid.increments[:, 0::2] + grid.increments[:, 1::2]
    return IncrementGrid(
        d=grid.d, level=grid.level - 1, horizon=grid.horizon, seed=grid.seed, increments=inc
    )


def dump_csv(grid: IncrementGrid, path) -> None:
    """Debug dump (channel, step, increment) for cross-checking generators."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["channel", "step", "increment"])
        for i in range(grid.d):
            for k in range(grid.n):
                w.writerow([i, k, repr(float(grid.increments[i, k]))])
