"""Independent brute-force references used by several test modules."""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np


def box_radii(B: np.ndarray, r2: float) -> list[int]:
    """Per-coordinate bounds |x_i| <= |row_i(B^-1)| * r valid for every x with |Bx|^2 <= r2."""
    inv = np.linalg.inv(B)
    return [int(np.floor(v * np.sqrt(r2) * (1 + 1e-9) + 1e-9)) for v in np.linalg.norm(inv, axis=1)]


def brute_force_lambda1_sq(exact_rows, radii) -> Fraction:
    """Minimum exact squared norm over nonzero integer vectors with |x_i| <= radii[i]."""
    B = np.array([[float(v) for v in row] for row in exact_rows])
    n = B.shape[0]
    if isinstance(radii, int):
        radii = [radii] * n
    grid = np.array(list(itertools.product(*(range(-r, r + 1) for r in radii))), dtype=np.int64)
    grid = grid[np.any(grid != 0, axis=1)]
    norms = np.sum((grid @ B.T) ** 2, axis=1)
    order = np.argsort(norms)[:20]  # exact recheck of the float front-runners
    best = None
    for idx in order:
        x = grid[idx]
        v = [sum(row[k] * int(x[k]) for k in range(n)) for row in exact_rows]
        sq = sum(c * c for c in v)
        best = sq if best is None else min(best, sq)
    return best


def random_unimodular_int(n: int, rng: np.random.Generator, steps: int = 12) -> np.ndarray:
    """Product of random elementary integer matrices (det 1)."""
    G = np.eye(n, dtype=np.int64)
    for _ in range(steps):
        i, j = rng.choice(n, size=2, replace=False)
        E = np.eye(n, dtype=np.int64)
        E[i, j] = int(rng.integers(-2, 3))
        G = G @ E
    return G
