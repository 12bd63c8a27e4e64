"""Orbit of a lacunary-series point under a multiplicative semigroup of toral endomorphisms.

The point ``z`` of the 2q-torus has coordinates

    z_j     = sum_{k>=1} p_j ** -(N ** (2k))
    z_{j+q} = sum_{k>=1} p_j ** -(N ** (2k+1))

and the semigroup is generated by ``z -> p_i z mod 1``.  Coordinates are kept
symbolically as lists of terms ``m * p**-e`` so that multiplying by
``p**n`` is an exponent subtraction; rationals are only materialised for the
surviving (non-integer) terms.  The omitted tail of every coordinate is
bounded by ``2 * m * p**-e_next`` (the series is dominated by its first
omitted term because consecutive exponents differ by a factor ``N**2 >= 4``).
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterator, Sequence

from sympy import perfect_power

from .errors import IndeterminatePrecision, PreconditionViolated
from .exact import RealInterval, escalate

EXACT_TAIL_LIMIT = 4096  # exponents above this get a dyadic tail bound instead of an exact one
MAX_TRUNCATION = 16


# ---------------------------------------------------------------------------
# parameters


def _primitive_root(p: int) -> int:
    """Smallest r with p = r**k."""
    pp = perfect_power(p)
    if not pp:
        return p
    return _primitive_root(int(pp[0]))


def check_nonlacunary(primes: Sequence[int]) -> bool:
    """True iff the integers are not all powers of one common integer."""
    if any(p <= 1 for p in primes):
        raise ValueError("all generators must be > 1")
    return len({_primitive_root(int(p)) for p in primes}) >= 2


def _exceeds(base: int, exponent: int, target: int) -> bool:
    """Exact test ``base**exponent > target`` without building huge powers needlessly."""
    if exponent * (base.bit_length() - 1) > target.bit_length():
        return True
    if exponent * base.bit_length() < target.bit_length() - 1:
        return False
    return base**exponent > target


def _smallest_exceeding_power(base: int, target: int) -> int:
    """Smallest integer L >= 0 with base**L > target."""
    if target < 1:
        return 0
    guess = max(0, int(math.log(target) / math.log(base)) - 1)
    while _exceeds(base, guess, target):
        guess -= 1
        if guess < 0:
            return 0
    while not _exceeds(base, guess, target):
        guess += 1
    return guess


def minimal_N(q: int, primes: Sequence[int]) -> int:
    """Smallest integer strictly greater than ``q * log(p_q) / log(p_1)``.

    The ratio is bracketed with interval logarithms; when an integer falls
    inside the bracket the exact test ``p_1**N > p_q**q`` decides.
    """
    p1, pq = int(primes[0]), int(primes[-1])
    if p1 <= 1:
        raise ValueError("generators must be > 1")

    def attempt(bits: int) -> int:
        ratio = q * RealInterval.from_value(pq, bits).log() / RealInterval.from_value(p1, bits).log()
        lo, hi = math.floor(ratio.lo), math.floor(ratio.hi)
        if lo == hi and ratio.lo != lo:
            return lo + 1
        # an integer lies in the bracket: exact log-ratio test
        return _smallest_exceeding_power(p1, pq**q)

    return escalate(attempt, start_bits=64)


@dataclass(frozen=True)
class TorusParams:
    primes: tuple[int, ...]
    N: int

    def __post_init__(self):
        primes = tuple(int(p) for p in self.primes)
        object.__setattr__(self, "primes", primes)
        if len(primes) < 2:
            raise PreconditionViolated("need q >= 2 generators")
        if primes[0] <= 1 or any(a >= b for a, b in zip(primes, primes[1:])):
            raise PreconditionViolated("generators must satisfy 1 < p_1 < ... < p_q")
        if not check_nonlacunary(primes):
            raise PreconditionViolated(f"generators {primes} are all powers of one integer (lacunary)")
        if not _exceeds(primes[0], self.N, primes[-1] ** self.q):
            raise PreconditionViolated(
                f"N={self.N} must exceed q*log(p_q)/log(p_1); smallest admissible N is "
                f"{minimal_N(self.q, primes)}"
            )

    @property
    def q(self) -> int:
        return len(self.primes)

    def exponent(self, j: int, k: int) -> int:
        """Exponent of the k-th term of coordinate j (0-based j)."""
        return self.N ** (2 * k + (1 if j >= self.q else 0))

    def base(self, j: int) -> int:
        return self.primes[j % self.q]

    def as_dict(self) -> dict:
        return {"primes": list(self.primes), "q": self.q, "N": self.N}


@dataclass(frozen=True, order=True)
class SemigroupElement:
    exponents: tuple[int, ...]

    def __post_init__(self):
        exps = tuple(int(n) for n in self.exponents)
        if any(n < 0 for n in exps):
            raise ValueError("semigroup exponents must be nonnegative")
        object.__setattr__(self, "exponents", exps)

    def __add__(self, other: "SemigroupElement") -> "SemigroupElement":
        return semigroup_compose(self, other)

    @property
    def total(self) -> int:
        return sum(self.exponents)

    def multiplier(self, primes: Sequence[int]) -> int:
        return math.prod(p**n for p, n in zip(primes, self.exponents))


def semigroup_compose(m: SemigroupElement, n: SemigroupElement) -> SemigroupElement:
    if len(m.exponents) != len(n.exponents):
        raise ValueError("semigroup elements of different rank")
    return SemigroupElement(tuple(a + b for a, b in zip(m.exponents, n.exponents)))


# ---------------------------------------------------------------------------
# points


@lru_cache(maxsize=None)
def _log2_lower(p: int) -> Fraction:
    k = 16
    return Fraction((p ** (1 << k)).bit_length() - 1, 1 << k)


def _inv_pow_upper(p: int, e: int) -> Fraction:
    """Upper bound on ``p**-e``; exact for moderate e, dyadic beyond."""
    if e <= EXACT_TAIL_LIMIT:
        return Fraction(1, p**e)
    return Fraction(1, 1 << math.floor(e * _log2_lower(p)))


@dataclass(frozen=True)
class Coordinate:
    """``sum(m * base**-e for m, e in terms) + tail`` modulo 1, with
    ``0 <= tail <= 2 * tail_mult * base**-tail_exp``."""

    base: int
    terms: tuple[tuple[int, int], ...]
    tail_mult: int
    tail_exp: int

    def scaled(self, other_mult: int, shift: int) -> "Coordinate":
        """Multiply by ``other_mult * base**shift``, dropping terms that become integers."""
        terms = []
        for m, e in self.terms:
            e2 = e - shift
            if e2 <= 0:
                continue
            m2 = (m * other_mult) % self.base**e2
            if m2:
                terms.append((m2, e2))
        return Coordinate(self.base, tuple(terms), self.tail_mult * other_mult, self.tail_exp - shift)

    def value(self) -> Fraction:
        """Exact fractional part of the retained terms, in [0, 1)."""
        if not self.terms:
            return Fraction(0)
        top = max(e for _, e in self.terms)
        den = self.base**top
        num = sum(m * self.base ** (top - e) for m, e in self.terms) % den
        return Fraction(num, den)

    def tail_upper(self) -> Fraction:
        if self.tail_exp <= 0:
            return Fraction(2 * self.tail_mult * self.base ** (-self.tail_exp))
        return 2 * self.tail_mult * _inv_pow_upper(self.base, self.tail_exp)


@dataclass(frozen=True)
class CertifiedFrac:
    """Fractional part known to lie in ``[exact, exact + tail.hi]``."""

    exact: Fraction
    tail: RealInterval

    @property
    def upper(self) -> Fraction:
        return self.exact + self.tail.hi

    def enclosure(self) -> RealInterval:
        return RealInterval(self.exact, self.upper)


@dataclass(frozen=True)
class TorusPoint:
    params: TorusParams
    K: int
    coords: tuple[Coordinate, ...]

    @property
    def values(self) -> tuple[Fraction, ...]:
        return tuple(c.value() for c in self.coords)

    @property
    def tail_bounds(self) -> tuple[RealInterval, ...]:
        return tuple(RealInterval(0, c.tail_upper()) for c in self.coords)

    def fractional_parts(self) -> list[CertifiedFrac]:
        out = []
        for j, c in enumerate(self.coords):
            exact, ub = c.value(), c.tail_upper()
            if exact + ub >= 1:
                raise IndeterminatePrecision(
                    f"coordinate {j + 1}: tail bound {float(ub):.3g} too large at truncation K={self.K}"
                )
            out.append(CertifiedFrac(exact, RealInterval(0, ub)))
        return out


@lru_cache(maxsize=64)
def make_point(params: TorusParams, K: int) -> TorusPoint:
    """The point z truncated to K terms per coordinate, with tail certificates."""
    if K < 1:
        raise ValueError("truncation depth K must be >= 1")
    coords = []
    for j in range(2 * params.q):
        terms = tuple((1, params.exponent(j, k)) for k in range(1, K + 1))
        coords.append(Coordinate(params.base(j), terms, 1, params.exponent(j, K + 1)))
    return TorusPoint(params, K, tuple(coords))


def act_symbolic(elem: SemigroupElement, point: TorusPoint) -> TorusPoint:
    """Image of ``point`` under ``elem`` without certifying the fractional parts."""
    params = point.params
    primes = params.primes
    if len(elem.exponents) != params.q:
        raise ValueError("element rank does not match the number of generators")
    coords = []
    for j, c in enumerate(point.coords):
        idx = j % params.q
        other = math.prod(p**n for i, (p, n) in enumerate(zip(primes, elem.exponents)) if i != idx)
        coords.append(c.scaled(other, elem.exponents[idx]))
    return TorusPoint(params, point.K, tuple(coords))


def act(elem: SemigroupElement, point: TorusPoint) -> TorusPoint:
    """Apply ``z -> p_1**n_1 ... p_q**n_q z mod 1`` exactly.

    Raises IndeterminatePrecision if some coordinate's fractional part is not
    separated from 1 at the point's truncation depth.
    """
    image = act_symbolic(elem, point)
    image.fractional_parts()
    return image


# ---------------------------------------------------------------------------
# hitting coordinate


@dataclass(frozen=True)
class HittingIndex:
    j: int  # 1-based coordinate index
    s: int  # 1-based generator index maximising p_s ** n_s
    k0: int
    case: int  # 1: N^(2k0) <= n_s < N^(2k0+1); 2: N^(2k0+1) <= n_s < N^(2k0+2)
    bound: Fraction  # upper bound on the fractional part of coordinate j


def hitting_index(params: TorusParams, elem: SemigroupElement) -> HittingIndex:
    """Coordinate forced close to 0 by the element, with its explicit upper bound."""
    if elem.total < 1:
        raise ValueError("hitting_index needs a nontrivial element")
    q, N = params.q, params.N
    powers = [p**n for p, n in zip(params.primes, elem.exponents)]
    s = max(range(q), key=lambda i: (powers[i], -i))
    ns = elem.exponents[s]
    ps = params.primes[s]
    k0 = 0
    while N ** (2 * k0 + 2) <= ns:
        k0 += 1
    if ns < N ** (2 * k0 + 1):
        j, case, exp = s + 1, 1, N ** (2 * k0 + 1) * (N - q)
    else:
        j, case, exp = s + q + 1, 2, N ** (2 * k0 + 2) * (N - q)
    return HittingIndex(j, s + 1, k0, case, Fraction(2, ps**exp))


# ---------------------------------------------------------------------------
# non-density verification


def nondensity_threshold(params: TorusParams, eps) -> int:
    """Smallest L such that the explicit bound is <= eps for every element with sum(n) >= L.

    Uses the lower bound ``k0 >= log(L log p_1 / (q log p_q)) / (2 log N)``
    and the integrality of k0; every comparison is an exact integer test.
    """
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    q, N, p1, pq = params.q, params.N, params.primes[0], params.primes[-1]
    target = math.ceil(2 / eps)
    k = 0
    while not (_exceeds(p1, N ** (2 * k + 1) * (N - q), target - 1)):
        k += 1
    if k == 0:
        return 0
    # k0 >= k  <=>  log(L log p1 / (q log pq)) / (2 log N) > k - 1  <=>  p1**L > pq**(q N^(2k-2))
    return max(1, _smallest_exceeding_power(p1, pq ** (q * N ** (2 * (k - 1)))))


def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All nonnegative integer vectors of the given length and sum, lexicographic (descending first)."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass
class ElementCheck:
    exponents: tuple[int, ...]
    K: int
    best_j: int | None
    best_upper: Fraction | None
    margin: Fraction | None
    hitting_j: int | None
    hitting_bound_ok: bool | None
    passed: bool


def _check_element(params: TorusParams, eps: Fraction, exps: tuple[int, ...], K0: int) -> ElementCheck:
    elem = SemigroupElement(exps)
    hit = hitting_index(params, elem) if elem.total >= 1 else None
    K = K0
    while True:
        image = act_symbolic(elem, make_point(params, K))
        uppers = []
        for c in image.coords:
            exact, ub = c.value(), c.tail_upper()
            uppers.append(exact + ub if exact + ub < 1 else None)
        hits = [(u, j) for j, u in enumerate(uppers) if u is not None and u <= eps]
        hit_ok = None
        if hit is not None:
            u = uppers[hit.j - 1]
            hit_ok = u is not None and u <= hit.bound
        resolved = all(u is not None for u in uppers) and hit_ok is not False
        if (hits and resolved) or K >= MAX_TRUNCATION:
            break
        K *= 2
    if hits:
        best_upper, best_j = min(hits)
        return ElementCheck(exps, K, best_j + 1, best_upper, eps - best_upper, hit.j if hit else None,
                            hit_ok, True)
    return ElementCheck(exps, K, None, None, None, hit.j if hit else None, hit_ok, False)


def _check_batch(args) -> list[ElementCheck]:
    params, eps, batch, K0 = args
    return [_check_element(params, eps, exps, K0) for exps in batch]


@dataclass
class NondensityReport:
    params: TorusParams
    eps: Fraction
    L: int
    window: int
    checked_count: int
    failures: int
    worst_margin: Fraction | None
    deepened: list[tuple[tuple[int, ...], int]]
    hitting_violations: int
    rows: list[ElementCheck] = field(default_factory=list)

    @property
    def status(self) -> str:
        return "certified" if self.failures == 0 and self.hitting_violations == 0 else "failed"


def verify_nondensity(params: TorusParams, eps, window: int = 10, workers: int = 1,
                      keep_rows: bool = False, K0: int = 2) -> NondensityReport:
    """Check every element with L <= sum(n) <= L + window has a coordinate in [0, eps] mod 1."""
    eps = Fraction(eps)
    if not 0 < eps < Fraction(1, 2):
        raise ValueError("eps must lie in (0, 1/2)")
    if window < 0:
        raise ValueError("window must be >= 0")
    L = nondensity_threshold(params, eps)
    elems = [c for total in range(L, L + window + 1) for c in compositions(total, params.q)]
    if workers > 1 and len(elems) > 1:
        size = max(1, len(elems) // (4 * workers))
        batches = [(params, eps, elems[i:i + size], K0) for i in range(0, len(elems), size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [r for chunk in pool.map(_check_batch, batches) for r in chunk]
    else:
        results = _check_batch((params, eps, elems, K0))
    passed = [r for r in results if r.passed]
    return NondensityReport(
        params=params,
        eps=eps,
        L=L,
        window=window,
        checked_count=len(results),
        failures=len(results) - len(passed),
        worst_margin=min((r.margin for r in passed), default=None),
        deepened=[(r.exponents, r.K) for r in results if r.K > K0],
        hitting_violations=sum(1 for r in results if r.hitting_bound_ok is False),
        rows=results if keep_rows else [],
    )


# ---------------------------------------------------------------------------
# rational independence of (z_1, ..., z_2q, 1)


@dataclass(frozen=True)
class RelationCertificate:
    H: int
    K: int
    checked_count: int
    min_abs_lower: Fraction  # every candidate satisfies |value| >= this


@dataclass(frozen=True)
class RelationCounterexample:
    candidate: tuple[int, ...]  # (a_1..a_q, b_1..b_q, c)
    K: int


def sufficient_depth(params: TorusParams, H: int) -> int:
    """Smallest k0 >= 1 with ``4 q H exp(N^(2k0+1) (q log p_q - N log p_1)) < 1``."""
    q, N, p1, pq = params.q, params.N, params.primes[0], params.primes[-1]

    def attempt(bits: int) -> int:
        gap = N * RealInterval.from_value(p1, bits).log() - q * RealInterval.from_value(pq, bits).log()
        need = RealInterval.from_value(4 * q * H, bits).log()
        k0 = 1
        while True:
            margin = N ** (2 * k0 + 1) * gap - need
            if margin.lo > 0:
                return k0
            if margin.hi > 0:
                raise IndeterminatePrecision("depth bound undecided")
            k0 += 1

    return escalate(attempt, start_bits=64)


def max_norm_shell(h: int, length: int) -> Iterator[tuple[int, ...]]:
    """Integer vectors of the given length with max-norm exactly h, in a fixed order."""
    if h == 0:
        yield (0,) * length
        return
    for i in range(length):
        for head in itertools.product(range(-(h - 1), h), repeat=i):
            for pivot in (-h, h):
                for tail in itertools.product(range(-h, h + 1), repeat=length - i - 1):
                    yield head + (pivot,) + tail


def _scaled_system(params: TorusParams, K: int, overrides: dict[int, Fraction] | None):
    point = make_point(params, K)
    values = list(point.values)
    tails = [tb.hi for tb in point.tail_bounds]
    for j, v in (overrides or {}).items():
        values[j - 1] = Fraction(v)
        tails[j - 1] = Fraction(0)
    D = math.lcm(*(v.denominator for v in values))
    Z = [v.numerator * (D // v.denominator) for v in values] + [-D]
    W = [math.ceil(t * D) for t in tails] + [0]
    return D, Z, W


def _scan_unit(args):
    """Scan one (shell, pivot) block; returns (count, min_slack, first_undecided, first_exact)."""
    h, i, length, Z, W = args
    count = 0
    min_slack = None
    undecided = []
    exact = None
    for head in itertools.product(range(-(h - 1), h), repeat=i):
        for pivot in (-h, h):
            for tail in itertools.product(range(-h, h + 1), repeat=length - i - 1):
                cand = head + (pivot,) + tail
                count += 1
                S = 0
                slack_bound = 0
                for x, z, w in zip(cand, Z, W):
                    if x:
                        S += x * z
                        slack_bound += abs(x) * w
                slack = abs(S) - slack_bound
                if slack > 0:
                    if min_slack is None or slack < min_slack:
                        min_slack = slack
                elif S == 0 and slack_bound == 0:
                    if exact is None:
                        exact = cand
                else:
                    undecided.append(cand)
    return count, min_slack, undecided, exact


def certify_no_relation(params: TorusParams, H: int, K: int | None = None,
                        overrides: dict[int, Fraction] | None = None, workers: int = 1,
                        on_row: Callable[[tuple[int, ...], Fraction], None] | None = None,
                        max_K: int = 8) -> RelationCertificate | RelationCounterexample:
    """Certify that no nonzero integer relation of height <= H holds among (z, 1).

    Candidates are visited in increasing max-norm.  For each, the truncated
    value and the tail bounds give an interval; the candidate is certified
    when that interval excludes 0.  ``overrides`` replaces coordinates
    (1-based) by exact rationals, e.g. to plant a relation.
    """
    if H < 1:
        raise ValueError("height H must be >= 1")
    if K is None:
        K = sufficient_depth(params, H)
    length = 2 * params.q + 1
    D, Z, W = _scaled_system(params, K, overrides)

    if on_row is not None:
        return _certify_serial_rows(params, H, K, length, D, Z, W, on_row, overrides, max_K)

    units = [(h, i, length, Z, W) for h in range(1, H + 1) for i in range(length)]
    if workers > 1:
        pool = ProcessPoolExecutor(max_workers=workers)
        results = pool.map(_scan_unit, units)
    else:
        pool = None
        results = map(_scan_unit, units)

    checked = 0
    min_slack = None
    undecided = []
    for count, slack, und, exact in results:
        if exact is not None:
            if pool is not None:
                pool.shutdown(cancel_futures=True)
            return RelationCounterexample(_normalise_sign(exact), K)
        checked += count
        undecided.extend(und)
        if slack is not None and (min_slack is None or slack < min_slack):
            min_slack = slack
    if pool is not None:
        pool.shutdown()
    min_lower = Fraction(min_slack, D) if min_slack is not None else None

    # undecided candidates are re-examined at doubled depth
    depth = K
    while undecided:
        depth *= 2
        if depth > max_K:
            raise IndeterminatePrecision(f"{len(undecided)} candidates undecided at K={depth // 2}")
        D2, Z2, W2 = _scaled_system(params, depth, overrides)
        still = []
        for cand in undecided:
            S = sum(x * z for x, z in zip(cand, Z2))
            sb = sum(abs(x) * w for x, w in zip(cand, W2))
            if abs(S) > sb:
                lower = Fraction(abs(S) - sb, D2)
                min_lower = lower if min_lower is None else min(min_lower, lower)
            elif S == 0 and sb == 0:
                return RelationCounterexample(_normalise_sign(cand), depth)
            else:
                still.append(cand)
        undecided = still
    return RelationCertificate(H=H, K=K, checked_count=checked, min_abs_lower=min_lower)


def _normalise_sign(cand: Sequence[int]) -> tuple[int, ...]:
    first = next(x for x in cand if x)
    return tuple(cand) if first > 0 else tuple(-x for x in cand)


def _certify_serial_rows(params, H, K, length, D, Z, W, on_row, overrides, max_K):
    checked = 0
    min_lower = None
    for h in range(1, H + 1):
        for cand in max_norm_shell(h, length):
            checked += 1
            S = sum(x * z for x, z in zip(cand, Z))
            sb = sum(abs(x) * w for x, w in zip(cand, W))
            if abs(S) > sb:
                lower = Fraction(abs(S) - sb, D)
            elif S == 0 and sb == 0:
                on_row(cand, Fraction(0))
                return RelationCounterexample(_normalise_sign(cand), K)
            else:
                res = certify_single(params, cand, K * 2, overrides, max_K)
                if isinstance(res, RelationCounterexample):
                    on_row(cand, Fraction(0))
                    return res
                lower = res
            on_row(cand, lower)
            min_lower = lower if min_lower is None else min(min_lower, lower)
    return RelationCertificate(H=H, K=K, checked_count=checked, min_abs_lower=min_lower)


def certify_single(params: TorusParams, cand: Sequence[int], K: int,
                   overrides: dict[int, Fraction] | None = None, max_K: int = 8):
    """Lower bound on |value| for one candidate, deepening K as needed."""
    while K <= max_K:
        D, Z, W = _scaled_system(params, K, overrides)
        S = sum(x * z for x, z in zip(cand, Z))
        sb = sum(abs(x) * w for x, w in zip(cand, W))
        if abs(S) > sb:
            return Fraction(abs(S) - sb, D)
        if S == 0 and sb == 0:
            return RelationCounterexample(_normalise_sign(cand), K)
        K *= 2
    raise IndeterminatePrecision(f"candidate {tuple(cand)} undecided up to K={max_K}")
