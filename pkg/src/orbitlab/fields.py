"""Totally real number fields as sources of compact diagonal orbits.

For a monic irreducible polynomial with real roots r_1 < ... < r_n the
matrix ``g[j][i] = c * r_j**i`` (c normalising the determinant) conjugates
multiplication by a unit u (an integer matrix of determinant +-1) to the
diagonal matrix of its embeddings:  g M_u = D_u g.  So the diagonal orbit of
``g Z^n`` is compact, with the unit lattice as its period lattice.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
from sympy import Poly, discriminant, isprime, resultant, symbols

from .errors import IndeterminatePrecision, NotAUnit, PrecisionFailure, PreconditionViolated
from .exact import (
    DEFAULT_BITS,
    RealInterval,
    escalate,
    idet,
    imatmul,
    imatsub,
    imax_abs,
    interval_root,
    subset_det,
)
from .lattices import UnimodularLattice, gauss_reduce_2d, systole

_x = symbols("x")


@dataclass(frozen=True)
class CatalogEntry:
    label: str
    poly: tuple[int, ...]  # descending coefficients, monic
    units: tuple[tuple[int, ...], ...]  # power-basis coordinates (1, theta, ..., theta^(n-1))

    def as_json(self) -> dict:
        return {"label": self.label, "poly": list(self.poly), "units": [list(u) for u in self.units]}

    @classmethod
    def from_json(cls, obj: dict) -> "CatalogEntry":
        return cls(obj["label"], tuple(int(c) for c in obj["poly"]),
                   tuple(tuple(int(c) for c in u) for u in obj.get("units", [])))


BUILTIN_CATALOG: tuple[CatalogEntry, ...] = (
    # cyclic cubic, roots 2cos(pi/9), 2cos(7pi/9), 2cos(13pi/9); theta and theta + 1 are independent units
    CatalogEntry("cubic-81", (1, 0, -3, -1), ((0, 1, 0), (1, 1, 0))),
    # cyclic cubic, roots -2cos(2 pi k / 7); theta and theta - 1 are independent units
    CatalogEntry("cubic-49", (1, -1, -2, 1), ((0, 1, 0), (-1, 1, 0))),
    CatalogEntry("quadratic-8", (1, 0, -2), ((1, 1),)),
)


def builtin_catalog() -> dict[str, CatalogEntry]:
    return {e.label: e for e in BUILTIN_CATALOG}


def load_catalog(path) -> dict[str, CatalogEntry]:
    entries = json.loads(Path(path).read_text())
    return {e.label: e for e in (CatalogEntry.from_json(o) for o in entries)}


def dump_catalog(entries: Sequence[CatalogEntry]) -> str:
    return json.dumps([e.as_json() for e in entries], indent=2)


class NumberField:
    """Q(theta) for a monic irreducible totally real integer polynomial."""

    def __init__(self, poly: Sequence[int], label: str | None = None):
        coeffs = tuple(int(c) for c in poly)
        if len(coeffs) < 2 or coeffs[0] != 1:
            raise PreconditionViolated("polynomial must be monic of degree >= 1")
        self.poly = coeffs
        self.n = len(coeffs) - 1
        self.label = label or "x^" + str(self.n)
        P = Poly(list(coeffs), _x)
        if not P.is_irreducible:
            raise PreconditionViolated(f"{P.as_expr()} is reducible over Q")
        if P.count_roots() != self.n:
            raise PreconditionViolated(f"{P.as_expr()} is not totally real")
        self._P = P
        self.disc = int(discriminant(P))
        self._isolating = [iv for iv, _ in P.intervals()]  # ascending, pairwise disjoint

    @classmethod
    def from_catalog(cls, entry: CatalogEntry) -> "NumberField":
        return cls(entry.poly, entry.label)

    def is_primitive(self) -> bool:
        """Prime degree implies no proper subfield other than Q."""
        return isprime(self.n)

    # certified roots

    @lru_cache(maxsize=16)
    def roots(self, bits: int = DEFAULT_BITS) -> tuple[RealInterval, ...]:
        out = []
        eps = Fraction(1, 1 << (bits + 2))
        for a, b in self._isolating:
            lo, hi = self._P.refine_root(a, b, eps=eps)
            lo, hi = Fraction(int(lo.p), int(lo.q)), Fraction(int(hi.p), int(hi.q))
            out.append(RealInterval.hull([RealInterval.from_value(lo, bits), RealInterval.from_value(hi, bits)]))
        return tuple(out)

    # exact element arithmetic in the power basis

    def _reduce(self, coeffs: list) -> list:
        """Reduce an ascending coefficient list modulo the monic polynomial."""
        n = self.n
        low = list(reversed(self.poly))  # ascending; low[n] == 1
        c = list(coeffs)
        for k in range(len(c) - 1, n - 1, -1):
            lead = c[k]
            if lead:
                for i in range(n):
                    c[k - n + i] -= lead * low[i]
            c[k] = 0
        return (c + [0] * n)[:n]

    def mul(self, u: Sequence, v: Sequence) -> tuple:
        prod = [0] * (len(u) + len(v) - 1)
        for i, a in enumerate(u):
            if a:
                for j, b in enumerate(v):
                    prod[i + j] += a * b
        return tuple(self._reduce(prod))

    def element(self, coords: Sequence) -> tuple:
        c = [Fraction(v) if not isinstance(v, int) else v for v in coords]
        if len(c) > self.n:
            c = self._reduce(c)
        return tuple(c + [0] * (self.n - len(c)))

    def multiplication_matrix(self, u: Sequence) -> list[list]:
        """Matrix of x -> u x; column i holds the coordinates of u * theta^i."""
        u = self.element(u)
        cols = []
        basis_vec = [1] + [0] * (self.n - 1)
        for _ in range(self.n):
            cols.append(self.mul(u, basis_vec))
            basis_vec = self.mul(basis_vec, [0, 1])
        return [[cols[j][i] for j in range(self.n)] for i in range(self.n)]

    def norm(self, u: Sequence) -> Fraction:
        """Exact field norm via the resultant Res(f, u(x))."""
        u = self.element(u)
        expr = sum(Fraction(c) * _x**i for i, c in enumerate(u))
        r = resultant(self._P.as_expr(), expr, _x)
        return Fraction(int(r.p), int(r.q))

    def is_unit(self, u: Sequence) -> bool:
        u = self.element(u)
        return all(Fraction(c).denominator == 1 for c in u) and abs(self.norm(u)) == 1

    def embeddings(self, u: Sequence, bits: int = DEFAULT_BITS) -> list[RealInterval]:
        u = self.element(u)
        out = []
        for r in self.roots(bits):
            acc = RealInterval(0, 0, bits)
            power = RealInterval(1, 1, bits)
            for c in u:
                if c:
                    acc = acc + power * c
                power = power * r
            out.append(acc)
        return out

    def __repr__(self):
        return f"NumberField({self.label!r}, poly={self.poly}, disc={self.disc})"


# ---------------------------------------------------------------------------


@dataclass
class Embedding:
    field: NumberField
    matrix: list  # interval matrix g, det 1
    scale: RealInterval  # |disc|^(-1/(2n))
    vandermonde_det: RealInterval
    lattice: UnimodularLattice  # rational midpoint of ``matrix``
    bits: int


def embedding_matrix(F: NumberField, bits: int = DEFAULT_BITS) -> Embedding:
    """Scaled Vandermonde matrix g with rows (sigma_j(theta^i))_i and det g = 1."""
    return _embedding_matrix(F, bits)


@lru_cache(maxsize=32)
def _embedding_matrix(F: NumberField, bits: int) -> Embedding:
    roots = F.roots(bits)
    V = [[r**i for i in range(F.n)] for r in roots]
    vdet = idet(V)
    if vdet.lo <= 0 <= vdet.hi:
        raise PrecisionFailure("Vandermonde determinant sign not certified")
    if vdet.hi < 0:  # cannot happen with ascending roots; kept as a guard
        V[-1] = [-v for v in V[-1]]
        vdet = -vdet
    scale = 1 / interval_root(abs(F.disc), 2 * F.n, bits)
    g = [[scale * v for v in row] for row in V]
    lattice = UnimodularLattice([[v.mid for v in row] for row in g])
    return Embedding(F, g, scale, vdet, lattice, bits)


@dataclass
class UnitAction:
    unit: tuple
    M: list[list[int]]
    D: list[RealInterval]
    norm: int
    residual: Fraction  # certified upper bound on max |g M - D g|

    @property
    def det(self) -> int:
        return int(subset_det(self.M, 0, 1))


def unit_action_matrix(F: NumberField, u: Sequence, bits: int = DEFAULT_BITS) -> UnitAction:
    """Integer matrix of multiplication by u and the diagonal of its embeddings."""
    u = F.element(u)
    if any(Fraction(c).denominator != 1 for c in u):
        raise NotAUnit(f"{u} is not integral in the power basis")
    norm = F.norm(u)
    if abs(norm) != 1:
        raise NotAUnit(f"norm of {u} is {norm}, not +-1")
    M = [[int(v) for v in row] for row in F.multiplication_matrix(u)]
    emb = embedding_matrix(F, bits)
    D = F.embeddings(u, bits)
    gM = imatmul(emb.matrix, [[RealInterval(v, v, bits) for v in row] for row in M])
    Dg = [[D[j] * emb.matrix[j][i] for i in range(F.n)] for j in range(F.n)]
    return UnitAction(tuple(u), M, D, int(norm), imax_abs(imatsub(gM, Dg)))


def is_torsion(u: Sequence) -> bool:
    """Torsion units of a real field are +-1."""
    return all(c == 0 for c in u[1:]) and abs(u[0]) == 1


@dataclass
class WallReport:
    field_label: str
    checked_units: list[tuple]
    skipped_torsion: list[tuple]
    pairs: list[tuple[int, int]]
    min_separation: Fraction | None  # certified lower bound on |sigma_k(u) - sigma_l(u)|
    bits_used: int

    @property
    def passed(self) -> bool:
        return self.min_separation is not None and self.min_separation > 0


def wall_avoidance_check(F: NumberField, units: Sequence[Sequence[int]],
                         pairs: Sequence[tuple[int, int]] | None = None) -> WallReport:
    """Certify sigma_k(u) != sigma_l(u) for every non-torsion unit and pair k < l (1-based)."""
    if not F.is_primitive():
        raise PreconditionViolated(f"degree {F.n} is not prime; subfield structure not handled")
    units = [F.element(u) for u in units]
    for u in units:
        if not F.is_unit(u):
            raise NotAUnit(f"{u} is not a unit of {F.label}")
    if pairs is None:
        pairs = [(k, l) for k in range(1, F.n + 1) for l in range(k + 1, F.n + 1)]
    checked = [u for u in units if not is_torsion(u)]
    skipped = [u for u in units if is_torsion(u)]
    used = [0]

    def attempt(bits: int) -> Fraction | None:
        used[0] = bits
        best = None
        for u in checked:
            emb = F.embeddings(u, bits)
            for k, l in pairs:
                diff = emb[k - 1] - emb[l - 1]
                if diff.lo <= 0 <= diff.hi:
                    raise IndeterminatePrecision(f"embeddings {k},{l} of {u} not separated at {bits} bits")
                sep = diff.mignitude()
                best = sep if best is None else min(best, sep)
        return best

    best = escalate(attempt, start_bits=64)
    return WallReport(F.label, checked, skipped, list(pairs), best, used[0])


def log_embedding(F: NumberField, units: Sequence[Sequence[int]], bits: int = DEFAULT_BITS) -> list[list[RealInterval]]:
    return [[abs(e).log() for e in F.embeddings(u, bits)] for u in units]


def units_independent(F: NumberField, units: Sequence[Sequence[int]], bits: int = DEFAULT_BITS) -> bool:
    """Certified rank check: n-1 units with a nonsingular (n-1)x(n-1) log-embedding minor."""
    if len(units) != F.n - 1:
        return False
    logs = log_embedding(F, units, bits)
    minor = [row[:-1] for row in logs]
    d = idet(minor) if len(minor) > 1 else minor[0][0]
    return d.lo > 0 or d.hi < 0


def diagonal_translate(emb: Embedding, logs: Sequence, bits: int | None = None) -> list:
    """Interval matrix diag(exp(logs)) @ g."""
    bits = bits or emb.bits
    factors = [RealInterval.from_value(v, bits).exp() if not isinstance(v, RealInterval) else v.exp()
               for v in logs]
    return [[factors[j] * emb.matrix[j][i] for i in range(emb.field.n)] for j in range(emb.field.n)]


def lattice_of(M: list) -> UnimodularLattice:
    return UnimodularLattice([[v.mid for v in row] for row in M])


@dataclass
class OrbitProbe:
    field_label: str
    grid: tuple[int, ...]
    min_systole: float
    max_systole: float
    count: int
    values: list[float] = field(default_factory=list)


def compact_orbit_probe(F: NumberField, units: Sequence[Sequence[int]], grid: int | Sequence[int],
                        bits: int = 96) -> OrbitProbe:
    """Systole of ``d g Z^n`` for d on a grid over the fundamental domain of the unit lattice.

    ``units`` are supplied (and verified to be units); the grid runs over
    ``sum_k t_k log|sigma(u_k)|`` with each ``t_k`` in ``[0, 1)``.
    """
    units = [F.element(u) for u in units]
    for u in units:
        if not F.is_unit(u):
            raise NotAUnit(f"{u} is not a unit of {F.label}")
    r = len(units)
    grid = (grid,) * r if isinstance(grid, int) else tuple(grid)
    emb = embedding_matrix(F, bits)
    logs = [[float(v.mid) for v in row] for row in log_embedding(F, units, bits)]
    values = []
    for ts in np.ndindex(*grid):
        t = [Fraction(i, m) for i, m in zip(ts, grid)]
        point = [sum(float(t[k]) * logs[k][j] for k in range(r)) for j in range(F.n)]
        point[-1] = -sum(point[:-1])
        lat = lattice_of(diagonal_translate(emb, point, bits))
        values.append(float(systole(lat).length.mid))
    return OrbitProbe(F.label, grid, min(values), max(values), len(values), values)


def sweep_systole_2d(F: NumberField, unit: Sequence[int], steps: int) -> tuple[float, float]:
    """Independent 1-parameter sweep for quadratic fields, via Gauss reduction in floats."""
    if F.n != 2:
        raise ValueError("sweep_systole_2d is for quadratic fields")
    emb = embedding_matrix(F)
    g = np.array([[float(v.mid) for v in row] for row in emb.matrix])
    e = [float(v.mid) for v in F.embeddings(unit)]
    span = math.log(abs(e[0]))
    lengths = []
    for i in range(steps):
        s = span * i / steps
        B = np.diag([math.exp(s), math.exp(-s)]) @ g
        red = gauss_reduce_2d(B)
        lengths.append(float(np.linalg.norm(red[:, 0])))
    return min(lengths), max(lengths)
