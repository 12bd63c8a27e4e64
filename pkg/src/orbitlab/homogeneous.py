"""Diagonal flows on SL(n1,R)/G1 x SL(n2,R)/G2 and the quartic lattice SU(n, Z[2^(1/4)], sigma).

Real matrices are lists of rows of :class:`RealInterval`; diagonal elements
are kept in exact rational log-coordinates so that the product and
block-ratio constraints are checked exactly.  Quartic matrices have entries in
Z[t], t = 2^(1/4), and every membership test is exact.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import MembershipFailure, PreconditionViolated
from .exact import (
    ALPHA,
    DEFAULT_BITS,
    QuarticInt,
    RealInterval,
    as_fraction,
    imatmul,
    imatsub,
    imax_abs,
    subset_det,
)
from .fields import NumberField, embedding_matrix, lattice_of, log_embedding
from .lattices import UnimodularLattice, quotient_distance, lll_reduce

RESIDUAL_TOL = Fraction(1, 10**12)


def _iv(x, bits: int) -> RealInterval:
    if isinstance(x, RealInterval):
        return x
    x = as_fraction(x)
    return RealInterval(x, x, bits)


def _exp(x, bits: int) -> RealInterval:
    if isinstance(x, RealInterval):
        return x.exp()
    x = as_fraction(x)
    if x == 0:
        return RealInterval(1, 1, bits)
    return RealInterval.from_value(x, bits).exp()


def ident(n: int, bits: int = DEFAULT_BITS) -> list:
    return [[RealInterval(int(i == j), int(i == j), bits) for j in range(n)] for i in range(n)]


def a_matrix(n: int, s, bits: int = DEFAULT_BITS) -> list:
    """diag(e^(s/2), 1, ..., 1, e^(-s/2))."""
    M = ident(n, bits)
    half = s / 2 if not isinstance(s, RealInterval) else s * Fraction(1, 2)
    M[0][0] = _exp(half, bits)
    M[n - 1][n - 1] = _exp(-half, bits)
    return M


def h_matrix(n: int, t, bits: int = DEFAULT_BITS) -> list:
    """Identity plus ``t`` in the top-right corner."""
    M = ident(n, bits)
    M[0][n - 1] = _iv(t, bits)
    return M


def residual(A: list, B: list) -> Fraction:
    return imax_abs(imatsub(A, B))


# ---------------------------------------------------------------------------
# diagonal groups


@dataclass(frozen=True)
class DiagonalElement:
    """Positive diagonal matrix of determinant 1, stored by exact log-coordinates."""

    logs: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "logs", tuple(as_fraction(v) for v in self.logs))
        if sum(self.logs) != 0:
            raise ValueError("log-coordinates of a determinant-one diagonal must sum to 0")

    @property
    def n(self) -> int:
        return len(self.logs)

    @classmethod
    def identity(cls, n: int) -> "DiagonalElement":
        return cls((0,) * n)

    @classmethod
    def a(cls, n: int, s) -> "DiagonalElement":
        s = as_fraction(s)
        return cls((s / 2,) + (0,) * (n - 2) + (-s / 2,))

    @classmethod
    def in_N(cls, n: int, free: Sequence) -> "DiagonalElement":
        """Element of N = {d_1 = d_n}; ``free`` = (u_1, u_2, ..., u_{n-2}) and u_{n-1} closes the sum."""
        free = [as_fraction(v) for v in free]
        if len(free) != n - 2:
            raise ValueError(f"N has dimension {n - 2}")
        u1, mid = free[0], free[1:]
        last = -(2 * u1 + sum(mid, Fraction(0)))
        return cls((u1, *mid, last, u1))

    def in_N_check(self) -> bool:
        return self.logs[0] == self.logs[-1]

    def in_Nkl(self, k: int, l: int) -> bool:
        return self.logs[k - 1] == self.logs[l - 1]

    def __mul__(self, other: "DiagonalElement") -> "DiagonalElement":
        return DiagonalElement(tuple(x + y for x, y in zip(self.logs, other.logs)))

    def inverse(self) -> "DiagonalElement":
        return DiagonalElement(tuple(-x for x in self.logs))

    def entries(self, bits: int = DEFAULT_BITS) -> list[RealInterval]:
        return [_exp(v, bits) for v in self.logs]

    def matrix(self, bits: int = DEFAULT_BITS) -> list:
        M = ident(self.n, bits)
        for i, e in enumerate(self.entries(bits)):
            M[i][i] = e
        return M


@dataclass(frozen=True)
class A1Element:
    """``(a_1(s) d1, a_2(-s) d2)`` with d_i in N_i."""

    s: Fraction
    d1: DiagonalElement
    d2: DiagonalElement

    def __post_init__(self):
        object.__setattr__(self, "s", as_fraction(self.s))
        if not (self.d1.in_N_check() and self.d2.in_N_check()):
            raise ValueError("d1, d2 must have equal first and last entries")

    def blocks(self) -> tuple[DiagonalElement, DiagonalElement]:
        n1, n2 = self.d1.n, self.d2.n
        A = DiagonalElement.a(n1, self.s) * self.d1
        B = DiagonalElement.a(n2, -self.s) * self.d2
        if not satisfies_block_constraint(A, B):
            raise AssertionError("block constraint violated")  # unreachable for valid inputs
        return A, B

    @classmethod
    def from_blocks(cls, A: DiagonalElement, B: DiagonalElement) -> "A1Element":
        if not satisfies_block_constraint(A, B):
            raise ValueError("pair does not satisfy a1 b1 = a_n1 b_n2")
        s = A.logs[0] - A.logs[-1]
        d1 = DiagonalElement.a(A.n, s).inverse() * A
        d2 = DiagonalElement.a(B.n, -s).inverse() * B
        return cls(s, d1, d2)

    def __mul__(self, other: "A1Element") -> "A1Element":
        A, B = self.blocks()
        C, D = other.blocks()
        return A1Element.from_blocks(A * C, B * D)

    def inverse(self) -> "A1Element":
        A, B = self.blocks()
        return A1Element.from_blocks(A.inverse(), B.inverse())

    def matrix(self, bits: int = DEFAULT_BITS) -> list:
        A, B = self.blocks()
        return psi_embed(A.matrix(bits), B.matrix(bits), RealInterval(0, 0, bits))


def satisfies_block_constraint(A: DiagonalElement, B: DiagonalElement) -> bool:
    """Both blocks have determinant 1 and a_1 b_1 / (a_n1 b_n2) = 1, checked on exact logs."""
    return sum(A.logs) == 0 and sum(B.logs) == 0 and A.logs[0] + B.logs[0] - A.logs[-1] - B.logs[-1] == 0


@dataclass
class GroupWord:
    """Product of factors ('a', s), ('h', t), ('diag', logs) or ('matrix', M), left to right."""

    n: int
    factors: list = field(default_factory=list)

    def a(self, s) -> "GroupWord":
        self.factors.append(("a", s))
        return self

    def h(self, t) -> "GroupWord":
        self.factors.append(("h", t))
        return self

    def diag(self, d: DiagonalElement) -> "GroupWord":
        self.factors.append(("diag", d))
        return self

    def matrix(self, M) -> "GroupWord":
        self.factors.append(("matrix", M))
        return self

    def materialize(self, bits: int = DEFAULT_BITS) -> list:
        out = ident(self.n, bits)
        for kind, val in self.factors:
            if kind == "a":
                F = a_matrix(self.n, val, bits)
            elif kind == "h":
                F = h_matrix(self.n, val, bits)
            elif kind == "diag":
                F = val.matrix(bits)
            else:
                F = [[_iv(v, bits) for v in row] for row in val]
            out = imatmul(out, F)
        return out

    def det(self, bits: int = DEFAULT_BITS) -> RealInterval:
        M = self.materialize(bits)
        return subset_det(M, RealInterval(0, 0, bits), RealInterval(1, 1, bits))


# ---------------------------------------------------------------------------
# contraction / expansion


def commutation_check(s, t, n: int = 3, bits: int = DEFAULT_BITS) -> Fraction:
    """Certified upper bound on max |a(s) h(t) - h(e^s t) a(s)|."""
    lhs = imatmul(a_matrix(n, s, bits), h_matrix(n, t, bits))
    rhs = imatmul(h_matrix(n, _exp(s, bits) * _iv(t, bits), bits), a_matrix(n, s, bits))
    return residual(lhs, rhs)


def build_y_matrix(F: NumberField, t=1, bits: int = DEFAULT_BITS) -> list:
    if F.n < 3:
        raise PreconditionViolated("y is built for degree >= 3")
    return imatmul(h_matrix(F.n, t, bits), embedding_matrix(F, bits).matrix)


def build_y(F: NumberField, t=1, bits: int = DEFAULT_BITS) -> UnimodularLattice:
    """The lattice (h(1) g) Z^n."""
    return lattice_of(build_y_matrix(F, t, bits))


@dataclass
class Decomposition:
    s: Fraction
    t_prime: RealInterval  # e^s, inside (0, 1]
    torus_part: DiagonalElement  # a(s) d
    residual: Fraction

    @property
    def passed(self) -> bool:
        return self.residual < RESIDUAL_TOL and self.t_prime.lo > 0 and self.t_prime.lo <= 1

    def point_matrix(self, F: NumberField, bits: int = DEFAULT_BITS) -> list:
        g = embedding_matrix(F, bits).matrix
        return imatmul(h_matrix(F.n, self.t_prime, bits), imatmul(self.torus_part.matrix(bits), g))


def k_membership_decompose(s, d: DiagonalElement, F: NumberField, bits: int = DEFAULT_BITS) -> Decomposition:
    """Write a(s) d h(1) g as h(e^s) (a(s) d) g for s <= 0, certifying the identity entrywise."""
    s = as_fraction(s)
    if s > 0:
        raise PreconditionViolated(f"s = {s} > 0: the corner is expanded, not contracted")
    if d.n != F.n or not d.in_N_check():
        raise PreconditionViolated("d must lie in N for the field's degree")
    g = embedding_matrix(F, bits).matrix
    n = F.n
    torus = DiagonalElement.a(n, s) * d
    T = torus.matrix(bits)
    lhs = imatmul(imatmul(T, h_matrix(n, 1, bits)), g)
    tp = _exp(s, bits)
    tp = RealInterval(tp.lo, min(tp.hi, Fraction(1)), bits)  # s <= 0 exactly, so e^s <= 1
    rhs = imatmul(imatmul(h_matrix(n, tp, bits), T), g)
    return Decomposition(s, tp, torus, residual(lhs, rhs))


# ---------------------------------------------------------------------------
# avoidance and density experiments


def torus_net(F: NumberField, units, grid: int, t_steps: int, bits: int = 96) -> list[np.ndarray]:
    """Float bases h(t) d g for t in [0,1] and d over the unit fundamental domain."""
    g = np.array([[float(v.mid) for v in row] for row in embedding_matrix(F, bits).matrix])
    logs = [[float(v.mid) for v in row] for row in log_embedding(F, units, bits)]
    r = len(logs)
    out = []
    for ts in itertools.product(range(grid), repeat=r):
        point = [sum(ts[k] / grid * logs[k][j] for k in range(r)) for j in range(F.n)]
        point[-1] = -sum(point[:-1])
        D = np.diag(np.exp(point))
        for i in range(t_steps):
            t = i / max(t_steps - 1, 1)
            H = np.eye(F.n)
            H[0, F.n - 1] = t
            out.append(H @ D @ g)
    return out


def _float_point(F: NumberField, d: DiagonalElement, s, bits: int = 96) -> np.ndarray:
    """a(s) d h(1) g in floats."""
    M = imatmul(imatmul(DiagonalElement.a(F.n, s).matrix(bits), d.matrix(bits)), build_y_matrix(F, 1, bits))
    return np.array([[float(v.mid) for v in row] for row in M])


def net_distance(point: np.ndarray, net_reduced: Sequence[np.ndarray], search_radius: int = 1) -> float:
    """Smallest quotient distance from ``point`` to an LLL-reduced net."""
    L = UnimodularLattice(point, tol=1e-6)
    Rp = lll_reduce(L).reduced_basis
    return min(quotient_distance(L, L, search_radius, reduced=(Rn, Rp)) for Rn in net_reduced)


@dataclass
class AvoidanceSample:
    s: Fraction
    d1: tuple
    d2: tuple
    coordinate: int  # which factor certified K-membership (1 or 2); both when s == 0
    t_prime_lo: Fraction
    t_prime_hi: Fraction
    residual: Fraction
    passed: bool


@dataclass
class AvoidanceReport:
    labels: tuple[str, str]
    samples: list[AvoidanceSample]
    control_s: Fraction | None = None
    control_precondition_violated: bool | None = None
    control_margin: float | None = None  # statistical only

    @property
    def pass_count(self) -> int:
        return sum(1 for x in self.samples if x.passed)

    @property
    def all_passed(self) -> bool:
        return self.pass_count == len(self.samples)


def _avoidance_one(args) -> list[AvoidanceSample]:
    F1, F2, s, d1f, d2f, bits = args
    d1 = DiagonalElement.in_N(F1.n, d1f)
    d2 = DiagonalElement.in_N(F2.n, d2f)
    A1Element(s, d1, d2).blocks()  # exact block constraint
    out = []
    if s <= 0:
        dec = k_membership_decompose(s, d1, F1, bits)
        out.append(AvoidanceSample(s, tuple(d1f), tuple(d2f), 1, dec.t_prime.lo, dec.t_prime.hi,
                                   dec.residual, dec.passed))
    if s >= 0:
        dec = k_membership_decompose(-s, d2, F2, bits)
        out.append(AvoidanceSample(s, tuple(d1f), tuple(d2f), 2, dec.t_prime.lo, dec.t_prime.hi,
                                   dec.residual, dec.passed))
    return out


def avoidance_experiment(F1: NumberField, F2: NumberField, s_values: Iterable, d_values: Iterable,
                         units1=None, control_s=None, net_grid: int = 4, net_t_steps: int = 5,
                         bits: int = DEFAULT_BITS, workers: int = 1) -> AvoidanceReport:
    """Certify, for every (s, d1, d2) on the grid, that one factor of the A1-orbit point lies in its K_i.

    ``d_values`` are the grid values used for each free coordinate of N_i.
    When ``control_s`` (> 0) and ``units1`` are given, also reports the distance
    from a(control_s) d1 y_1 to a sampled net of K_1 (statistical).
    """
    if F1.n < 3 or F2.n < 3:
        raise PreconditionViolated("both factors need degree >= 3")
    s_values = [as_fraction(s) for s in s_values]
    d_values = [as_fraction(v) for v in d_values]
    grid1 = list(itertools.product(d_values, repeat=F1.n - 2))
    grid2 = list(itertools.product(d_values, repeat=F2.n - 2))
    jobs = [(F1, F2, s, a, b, bits) for s in s_values for a in grid1 for b in grid2]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            chunks = list(ex.map(_avoidance_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        chunks = [_avoidance_one(j) for j in jobs]
    samples = [x for c in chunks for x in c]
    report = AvoidanceReport((F1.label, F2.label), samples)
    if control_s is not None:
        cs = as_fraction(control_s)
        report.control_s = cs
        try:
            k_membership_decompose(cs, DiagonalElement.identity(F1.n), F1, bits)
            report.control_precondition_violated = False
        except PreconditionViolated:
            report.control_precondition_violated = True
        if units1:
            net = [lll_reduce(B).reduced_basis for B in torus_net(F1, units1, net_grid, net_t_steps)]
            margins = [net_distance(_float_point(F1, DiagonalElement.in_N(F1.n, d), cs), net) for d in grid1]
            report.control_margin = min(margins)
    return report


def random_unimodular(n: int, rng: np.random.Generator) -> UnimodularLattice:
    B = rng.standard_normal((n, n))
    if np.linalg.det(B) < 0:
        B[:, 0] = -B[:, 0]
    return UnimodularLattice.normalized(B)


def nested_grid(m: int, step: Fraction, dim: int) -> list[tuple[Fraction, ...]]:
    """Points i*step for i in range(-m//2, m - m//2), so grid(m) is contained in grid(2m)."""
    axis = [step * i for i in range(-(m // 2), m - m // 2)]
    return list(itertools.product(axis, repeat=dim))


@dataclass
class DensitySeries:
    target_index: int
    sizes: list[int]
    distances: list[float]  # min over the grid of the given size

    def weakly_decreasing(self) -> bool:
        return all(b <= a for a, b in zip(self.distances, self.distances[1:]))


def _density_point(args) -> list[float]:
    y, logs, target_red = args
    y.shape[0]
    full = list(logs) + [-sum(logs)]
    B = np.diag(np.exp(np.array(full, dtype=float))) @ y
    L = UnimodularLattice(B, tol=1e-6)
    R = lll_reduce(L).reduced_basis
    return [quotient_distance(L, L, 1, reduced=(R, T)) for T in target_red]


def density_probe(F: NumberField, sizes: Sequence[int], targets: Sequence[UnimodularLattice],
                  step=Fraction(3, 20), workers: int = 1) -> list[DensitySeries]:
    """Closest approach of d y (d over nested log-grids on the diagonal group) to each target."""
    y = np.array(build_y(F).basis)
    step = as_fraction(step)
    sizes = sorted(sizes)
    target_red = [lll_reduce(T).reduced_basis for T in targets]
    biggest = nested_grid(sizes[-1], step, F.n - 1)
    jobs = [(y, [float(v) for v in p], target_red) for p in biggest]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            dists = list(ex.map(_density_point, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        dists = [_density_point(j) for j in jobs]
    by_point = dict(zip(biggest, dists))
    out = []
    for ti in range(len(targets)):
        series = []
        for m in sizes:
            series.append(min(by_point[p][ti] for p in nested_grid(m, step, F.n - 1)))
        out.append(DensitySeries(ti, list(sizes), series))
    return out


# ---------------------------------------------------------------------------
# block embeddings


def psi_embed(M, N, zero=0):
    """Block-diagonal matrix [[M, 0], [0, N]] as a list of rows."""
    n1, n2 = len(M), len(N)
    rows = []
    for i in range(n1):
        rows.append(list(M[i]) + [zero] * n2)
    for i in range(n2):
        rows.append([zero] * n1 + list(N[i]))
    return rows


def phi_embed(X, Y, t) -> np.ndarray:
    """[[e^(n2 t) X, 0], [0, e^(-n1 t) Y]] in floats."""
    X, Y = np.asarray(X, dtype=float), np.asarray(Y, dtype=float)
    n1, n2 = X.shape[0], Y.shape[0]
    return np.array(psi_embed(math.exp(n2 * t) * X, math.exp(-n1 * t) * Y, 0.0), dtype=float)


# ---------------------------------------------------------------------------
# quartic matrices


class QuarticMatrix:
    """Square matrix over Z[2^(1/4)]."""

    def __init__(self, rows):
        self.rows = tuple(tuple(QuarticInt.coerce(v) for v in row) for row in rows)
        self.n = len(self.rows)
        if any(len(r) != self.n for r in self.rows):
            raise ValueError("QuarticMatrix must be square")
        self.member = False  # set only by su_membership

    @classmethod
    def identity(cls, n: int) -> "QuarticMatrix":
        return cls([[int(i == j) for j in range(n)] for i in range(n)])

    @classmethod
    def diagonal(cls, entries) -> "QuarticMatrix":
        n = len(entries)
        return cls([[entries[i] if i == j else 0 for j in range(n)] for i in range(n)])

    def __eq__(self, other):
        return isinstance(other, QuarticMatrix) and self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def __matmul__(self, other: "QuarticMatrix") -> "QuarticMatrix":
        n = self.n
        out = []
        for i in range(n):
            row = []
            for j in range(n):
                acc = QuarticInt()
                for k in range(n):
                    x = self.rows[i][k]
                    if x:
                        acc = acc + x * other.rows[k][j]
                row.append(acc)
            out.append(row)
        return QuarticMatrix(out)

    def __sub__(self, other: "QuarticMatrix") -> "QuarticMatrix":
        return QuarticMatrix([[a - b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)])

    def transpose(self) -> "QuarticMatrix":
        return QuarticMatrix([list(col) for col in zip(*self.rows)])

    def sigma(self) -> "QuarticMatrix":
        return QuarticMatrix([[v.sigma() for v in row] for row in self.rows])

    def det(self) -> QuarticInt:
        return subset_det(self.rows, QuarticInt(), QuarticInt(1))

    def is_zero(self) -> bool:
        return not any(v for row in self.rows for v in row)

    def to_json(self) -> list:
        return [[list(v.coords) for v in row] for row in self.rows]

    @classmethod
    def from_json(cls, data) -> "QuarticMatrix":
        return cls([[tuple(v) for v in row] for row in data])

    def to_real(self, bits: int = DEFAULT_BITS) -> list:
        return [[v.enclose(bits) for v in row] for row in self.rows]

    def to_pair(self) -> "PairForm":
        return PairForm([[v.even_part() for v in r] for r in self.rows],
                        [[v.odd_part() for v in r] for r in self.rows])

    def __repr__(self):
        return f"QuarticMatrix({self.to_json()!r})"


@dataclass
class MembershipResult:
    ok: bool
    det: QuarticInt
    witness: QuarticMatrix | None  # (tM^sigma) M - I when that is nonzero

    def __bool__(self):
        return self.ok


def su_membership(M: QuarticMatrix) -> MembershipResult:
    """Exact test of (tM^sigma) M = I and det M = 1."""
    R = M.sigma().transpose() @ M - QuarticMatrix.identity(M.n)
    d = M.det()
    ok = R.is_zero() and d == QuarticInt(1)
    M.member = ok
    return MembershipResult(ok, d, None if R.is_zero() else R)


def h_quartic(n: int, t: int = 1) -> QuarticMatrix:
    rows = [[int(i == j) for j in range(n)] for i in range(n)]
    rows[0][n - 1] = t
    return QuarticMatrix(rows)


def even_permutations(n: int) -> list[QuarticMatrix]:
    out = []
    for perm in itertools.permutations(range(n)):
        inversions = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        if inversions % 2 == 0:
            out.append(QuarticMatrix([[int(perm[i] == j) for j in range(n)] for i in range(n)]))
    return out


def alpha_block(n: int, i: int, j: int, power: int = 1) -> QuarticMatrix:
    """Diagonal matrix with alpha^power at i and sigma(alpha)^power at j."""
    entries = [QuarticInt(1)] * n
    entries[i] = ALPHA ** power
    entries[j] = ALPHA.sigma() ** power
    return QuarticMatrix.diagonal(entries)


def sign_pair(n: int, i: int, j: int) -> QuarticMatrix:
    entries = [1] * n
    entries[i] = entries[j] = -1
    return QuarticMatrix.diagonal(entries)


def generators(n: int) -> list[QuarticMatrix]:
    gens = even_permutations(n)
    for i, j in itertools.permutations(range(n), 2):
        gens.append(alpha_block(n, i, j))
    for i, j in itertools.combinations(range(n), 2):
        gens.append(sign_pair(n, i, j))
    return gens


def random_product(n: int, length: int, rng: np.random.Generator, gens=None) -> QuarticMatrix:
    gens = gens or generators(n)
    M = QuarticMatrix.identity(n)
    for k in rng.integers(0, len(gens), size=length):
        M = M @ gens[int(k)]
    return M


# pair form (X, Y) with M = X + t Y


def _qmat_mul(A, B):
    n = len(A)
    return [[sum((A[i][k] * B[k][j] for k in range(n)), QuarticInt()) for j in range(n)] for i in range(n)]


def _qmat_add(A, B):
    return [[a + b for a, b in zip(r, s)] for r, s in zip(A, B)]


def _qmat_t(A):
    return [list(c) for c in zip(*A)]


@dataclass
class PairForm:
    X: list
    Y: list

    def __post_init__(self):
        self.X = [[QuarticInt.coerce(v) for v in r] for r in self.X]
        self.Y = [[QuarticInt.coerce(v) for v in r] for r in self.Y]
        if not all(v.is_even() for M in (self.X, self.Y) for r in M for v in r):
            raise ValueError("pair entries must lie in Z[sqrt 2]")

    @property
    def n(self) -> int:
        return len(self.X)

    def to_matrix(self) -> QuarticMatrix:
        t = QuarticInt.t()
        return QuarticMatrix([[x + t * y for x, y in zip(rx, ry)] for rx, ry in zip(self.X, self.Y)])

    def __matmul__(self, other: "PairForm") -> "PairForm":
        r2 = QuarticInt.sqrt2()
        YY = _qmat_mul(self.Y, other.Y)
        X = _qmat_add(_qmat_mul(self.X, other.X), [[r2 * v for v in r] for r in YY])
        Y = _qmat_add(_qmat_mul(self.X, other.Y), _qmat_mul(self.Y, other.X))
        return PairForm(X, Y)


def det_split(X, Y) -> tuple[QuarticInt, QuarticInt]:
    """(P, Q) in Z[sqrt 2] with det(X + t Y) = P + t Q."""
    d = PairForm(X, Y).to_matrix().det()
    return d.even_part(), d.odd_part()


@dataclass
class TwinReport:
    relations_ok: bool
    max_entry_modulus: Fraction  # certified upper bound on |X^tau + i 2^(1/4) Y^tau| entries
    ok: bool


def compact_twin_check(P: PairForm, bits: int = DEFAULT_BITS, tol: float = 1e-9) -> TwinReport:
    """Relations tXX - sqrt2 tYY = I, tXY = tYX, and unitarity bounds for the tau-twin."""
    n = P.n
    r2 = QuarticInt.sqrt2()
    Xt, Yt = _qmat_t(P.X), _qmat_t(P.Y)
    lhs = _qmat_add(_qmat_mul(Xt, P.X), [[-(r2 * v) for v in r] for r in _qmat_mul(Yt, P.Y)])
    eye = [[QuarticInt(int(i == j)) for j in range(n)] for i in range(n)]
    rel = lhs == eye and _qmat_mul(Xt, P.Y) == _qmat_mul(Yt, P.X)
    root2 = RealInterval.from_value(2, bits).sqrt()
    worst = Fraction(0)
    for rx, ry in zip(P.X, P.Y):
        for x, y in zip(rx, ry):
            xt, yt = x.tau(), y.tau()
            xv = root2 * xt.c + xt.a
            yv = root2 * yt.c + yt.a
            mod2 = xv * xv + root2 * (yv * yv)
            worst = max(worst, mod2.hi)
    bound = worst  # squared modulus bound; modulus <= sqrt(bound)
    ok = rel and bound <= Fraction(1 + tol) ** 2
    return TwinReport(rel, RealInterval.from_value(bound, bits).sqrt().hi, ok)


def phi_quartic(M1: QuarticMatrix, M2: QuarticMatrix, k: int) -> QuarticMatrix:
    """Exact image of (M1, M2, k log alpha): alpha^(n2 k) M1 and sigma(alpha)^(n1 k) M2 blocks."""
    n1, n2 = M1.n, M2.n
    c1 = ALPHA ** (n2 * k)
    c2 = ALPHA.sigma() ** (n1 * k)
    A = [[c1 * v for v in r] for r in M1.rows]
    B = [[c2 * v for v in r] for r in M2.rows]
    return QuarticMatrix(psi_embed(A, B, QuarticInt()))


@dataclass
class InclusionReport:
    checked: int
    results: list[bool]

    @property
    def all_passed(self) -> bool:
        return all(self.results)


def inclusion_check(samples: Iterable[tuple[QuarticMatrix, QuarticMatrix, int]]) -> InclusionReport:
    results = []
    for M1, M2, k in samples:
        for M in (M1, M2):
            if not M.member and not su_membership(M).ok:
                raise PreconditionViolated("inclusion samples must be members of their factor lattices")
        image = phi_quartic(M1, M2, int(k))
        res = su_membership(image)
        if not res.ok:
            raise MembershipFailure(f"image of k={k} is not in the lattice", witness=res.witness or res.det)
        results.append(True)
    return InclusionReport(len(results), results)
