"""Unimodular lattices: LLL reduction, shortest vectors and a quotient-distance probe.

A lattice is ``basis @ Z^n`` (basis vectors are the columns).  Entries are
stored as exact rationals alongside a float64 view: reduction and enumeration
run on the floats, every reported length is recomputed exactly from the
rational entries.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import RankDeficient
from .exact import RealInterval, as_fraction

DET_TOL = 1e-10
ENUM_SLACK = 1e-9


def _outward_float(x: Fraction, up: bool) -> float:
    f = float(x)
    if up and Fraction(f) < x:
        f = math.nextafter(f, math.inf)
    if not up and Fraction(f) > x:
        f = math.nextafter(f, -math.inf)
    return f


class UnimodularLattice:
    """Point of SL(n,R)/SL(n,Z) given by a basis matrix of determinant +-1."""

    def __init__(self, basis, tol: float = DET_TOL):
        exact = tuple(tuple(as_fraction(v) if not isinstance(v, np.floating) else Fraction(float(v))
                            for v in row) for row in basis)
        n = len(exact)
        if n == 0 or any(len(row) != n for row in exact):
            raise ValueError("basis must be a nonempty square matrix")
        self.exact = exact
        self.basis = np.array([[float(v) for v in row] for row in exact], dtype=float)
        self.n = n
        det = float(np.linalg.det(self.basis))
        if not abs(abs(det) - 1.0) <= tol:
            raise ValueError(f"|det| = {abs(det)!r} is not 1 within {tol}")

    @classmethod
    def normalized(cls, basis) -> "UnimodularLattice":
        """Rescale a full-rank basis to determinant +-1."""
        B = np.asarray(basis, dtype=float)
        det = abs(np.linalg.det(B))
        if det == 0:
            raise RankDeficient("singular basis")
        return cls(B / det ** (1.0 / B.shape[0]))

    @classmethod
    def identity(cls, n: int) -> "UnimodularLattice":
        return cls(np.eye(n))

    def right_multiply(self, gamma) -> "UnimodularLattice":
        """Exact ``basis @ gamma`` for an integer matrix (same lattice when gamma is unimodular)."""
        g = [[int(v) for v in row] for row in np.asarray(gamma).tolist()]
        n = self.n
        prod = [[sum(self.exact[i][k] * g[k][j] for k in range(n)) for j in range(n)] for i in range(n)]
        return UnimodularLattice(prod)

    def left_multiply(self, M) -> "UnimodularLattice":
        M = np.asarray(M, dtype=float)
        return UnimodularLattice(M @ self.basis)

    def vector(self, coeffs: Sequence[int]) -> list[Fraction]:
        return [sum(row[k] * int(c) for k, c in enumerate(coeffs)) for row in self.exact]

    def squared_norm(self, coeffs: Sequence[int]) -> Fraction:
        return sum(v * v for v in self.vector(coeffs))

    def to_text(self) -> str:
        lines = [str(self.n)]
        for row in self.exact:
            lines.append(" ".join(str(v) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "UnimodularLattice":
        tokens = [ln.split() for ln in text.strip().splitlines() if ln.strip() and not ln.startswith("#")]
        n = int(tokens[0][0])
        rows = tokens[1:1 + n]
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ValueError("expected n followed by n rows of n entries")
        return cls([[Fraction(v) for v in r] for r in rows])

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "UnimodularLattice":
        return cls.from_text(Path(path).read_text())

    def __repr__(self):
        return f"UnimodularLattice(n={self.n}, basis={self.basis.tolist()!r})"


# ---------------------------------------------------------------------------
# LLL


@dataclass
class ReductionReport:
    reduced_basis: np.ndarray
    unimodular_transform: np.ndarray  # integer, det +-1; reduced = basis @ transform
    delta: float
    gs_norms: np.ndarray  # squared Gram-Schmidt norms of the reduced basis
    swaps: int

    def lovasz_ok(self, slack: float = 1e-9) -> bool:
        mu = _gs_mu(self.reduced_basis)
        bn = self.gs_norms
        size_ok = np.all(np.abs(np.tril(mu, -1)) <= 0.5 + slack)
        lov = all(bn[k] >= (self.delta - mu[k, k - 1] ** 2) * bn[k - 1] * (1 - slack)
                  for k in range(1, len(bn)))
        return bool(size_ok and lov)


def _gs(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    R = np.linalg.qr(B, mode="r")
    d = np.diag(R)
    mu = (R / d[:, None]).T  # mu[k, j] = <b_k, b*_j> / |b*_j|^2
    return mu, d * d


def _gs_mu(B: np.ndarray) -> np.ndarray:
    return _gs(B)[0]


def lll_reduce(L: UnimodularLattice | np.ndarray, delta: float = 0.99) -> ReductionReport:
    """LLL-reduce the columns of the basis."""
    if not 0.25 < delta < 1:
        raise ValueError("delta must lie in (1/4, 1)")
    B = np.array(L.basis if isinstance(L, UnimodularLattice) else L, dtype=float)
    n = B.shape[1]
    U = np.eye(n, dtype=np.int64)
    mu, bn = _gs(B)
    if not np.all(np.isfinite(bn)) or np.min(bn) <= 1e-26 * np.max(bn):
        raise RankDeficient("basis is (numerically) rank deficient")
    swaps = 0
    k = 1
    while k < n:
        for j in range(k - 1, -1, -1):
            r = round(mu[k, j])
            if r:
                B[:, k] -= r * B[:, j]
                U[:, k] -= r * U[:, j]
                mu[k, : j + 1] -= r * mu[j, : j + 1]
        if bn[k] >= (delta - mu[k, k - 1] ** 2) * bn[k - 1]:
            k += 1
        else:
            B[:, [k - 1, k]] = B[:, [k, k - 1]]
            U[:, [k - 1, k]] = U[:, [k, k - 1]]
            swaps += 1
            mu, bn = _gs(B)
            k = max(k - 1, 1)
    reduced = (B if not isinstance(L, UnimodularLattice) else L.basis @ U)
    mu, bn = _gs(reduced)
    return ReductionReport(reduced, U, delta, bn, swaps)


# ---------------------------------------------------------------------------
# shortest vector


@dataclass(frozen=True)
class SystoleResult:
    length: RealInterval
    squared: Fraction
    achieving_vector: tuple[int, ...]

    def as_json(self) -> dict:
        return {
            "length_lo": _outward_float(self.length.lo, up=False),
            "length_hi": _outward_float(self.length.hi, up=True),
            "vector": list(self.achieving_vector),
        }

    def __float__(self):
        return float(self.length.mid)


def _short_vectors(R: np.ndarray, radius2: float) -> list[tuple[int, ...]]:
    """Schnorr-Euchner style enumeration of x != 0 with |R x|^2 <= radius2 (R upper triangular).

    The radius shrinks to the best length found (plus slack), so the output
    contains every vector within slack of the minimum.
    """
    n = R.shape[0]
    diag = np.abs(np.diag(R))
    best = [radius2]
    found: list[tuple[float, tuple[int, ...]]] = []
    x = [0] * n

    def rec(i: int, partial: float):
        center = -sum(R[i, j] * x[j] for j in range(i + 1, n)) / R[i, i]
        rem = best[0] * (1 + ENUM_SLACK) - partial
        if rem < 0:
            return
        w = math.sqrt(rem) / diag[i]
        for xi in range(math.ceil(center - w), math.floor(center + w) + 1):
            x[i] = xi
            part = partial + (R[i, i] * (xi - center)) ** 2
            if part > best[0] * (1 + ENUM_SLACK):
                continue
            if i == 0:
                if any(x):
                    found.append((part, tuple(x)))
                    best[0] = min(best[0], part)
            else:
                rec(i - 1, part)
        x[i] = 0

    rec(n - 1, 0.0)
    cutoff = best[0] * (1 + ENUM_SLACK)
    return [v for p, v in found if p <= cutoff]


def _canonical_sign(v: Sequence[int]) -> tuple[int, ...]:
    first = next(c for c in v if c)
    return tuple(v) if first > 0 else tuple(-c for c in v)


def systole(L: UnimodularLattice, bits: int = 128) -> SystoleResult:
    """Shortest nonzero vector via LLL followed by enumeration; length certified exactly."""
    if L.n > 10:
        raise ValueError("enumeration is limited to n <= 10")
    red = lll_reduce(L)
    R = np.linalg.qr(red.reduced_basis, mode="r")
    radius2 = float(min(np.sum(red.reduced_basis**2, axis=0)))
    candidates = _short_vectors(R, radius2)
    U = red.unimodular_transform
    best = None
    for x in candidates:
        coeffs = _canonical_sign([int(c) for c in U @ np.array(x, dtype=np.int64)])
        sq = L.squared_norm(coeffs)
        key = (sq, coeffs)
        if best is None or key < best:
            best = key
    sq, coeffs = best
    return SystoleResult(RealInterval.from_value(sq, bits).sqrt(), sq, coeffs)


def gauss_reduce_2d(B: np.ndarray) -> np.ndarray:
    """Lagrange-Gauss reduction of a 2x2 basis (columns)."""
    u, v = np.array(B[:, 0], dtype=float), np.array(B[:, 1], dtype=float)
    if u @ u > v @ v:
        u, v = v, u
    while True:
        r = round((u @ v) / (u @ u))
        v = v - r * u
        if v @ v >= u @ u:
            return np.column_stack([u, v])
        u, v = v, u


# ---------------------------------------------------------------------------
# quotient distance


def _box_vectors(n: int, radius: int) -> np.ndarray:
    vecs = np.array(list(itertools.product(range(-radius, radius + 1), repeat=n)), dtype=np.int64)
    return vecs[np.any(vecs != 0, axis=1)]


def quotient_distance(L1: UnimodularLattice, L2: UnimodularLattice, search_radius: int = 1,
                      reduced: tuple[np.ndarray, np.ndarray] | None = None) -> float:
    """Upper bound on the distance between the classes of L1 and L2 in SL(n,R)/SL(n,Z).

    Both bases are LLL-reduced first; then ``min ||R1 gamma - R2||_F`` is taken
    over integer gamma with entries in ``[-search_radius, search_radius]`` and
    det +-1, by branch and bound over columns.  Returns ``inf`` when the box
    contains no unimodular matrix.
    """
    if L1.n != L2.n:
        raise ValueError("lattices of different dimension")
    n = L1.n
    if reduced is None:
        R1, R2 = lll_reduce(L1).reduced_basis, lll_reduce(L2).reduced_basis
    else:
        R1, R2 = reduced
    if search_radius < 1:
        return math.inf
    vecs = _box_vectors(n, search_radius)
    images = vecs @ R1.T  # row i: R1 @ vecs[i]
    costs = [np.sum((images - R2[:, c]) ** 2, axis=1) for c in range(n)]
    orders = [np.argsort(c, kind="stable") for c in costs]
    floor_after = [0.0] * (n + 1)
    for c in range(n - 1, -1, -1):
        floor_after[c] = floor_after[c + 1] + float(costs[c][orders[c][0]])

    best = [math.inf]
    chosen: list[int] = [0] * n

    def rec(c: int, partial: float):
        if c == n:
            M = vecs[chosen].T
            if abs(round(np.linalg.det(M))) == 1:
                best[0] = partial
            return
        for idx in orders[c]:
            cost = partial + float(costs[c][idx])
            if cost + floor_after[c + 1] >= best[0]:
                break
            if idx in chosen[:c]:
                continue
            chosen[c] = idx
            rec(c + 1, cost)

    rec(0, 0.0)
    return math.sqrt(best[0]) if math.isfinite(best[0]) else math.inf
