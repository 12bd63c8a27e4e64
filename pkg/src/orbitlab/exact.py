"""Exact scalars: rationals, the ring Z[2^(1/4)] and certified real intervals.

Rationals are :class:`fractions.Fraction` (always reduced, positive
denominator).  ``RealInterval`` endpoints are dyadic rationals rounded
outward after every operation, so an interval always encloses the real
number it was built to certify.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, TypeVar

from mpmath import libmp
from sympy import integer_nthroot

from .errors import IndeterminatePrecision

BigRational = Fraction

DEFAULT_BITS = 128
DEFAULT_PRECISION_CAP = 4096

T = TypeVar("T")


def precision_cap() -> int:
    """Upper limit for precision escalation, overridable via ORBITLAB_PRECISION_CAP."""
    env = os.environ.get("ORBITLAB_PRECISION_CAP")
    if env:
        return int(env)
    return DEFAULT_PRECISION_CAP


def escalate(fn: Callable[[int], T], start_bits: int = 64, cap: int | None = None) -> T:
    """Call ``fn(bits)`` with doubling precision until it stops raising IndeterminatePrecision."""
    cap = precision_cap() if cap is None else cap
    bits = start_bits
    while True:
        try:
            return fn(bits)
        except IndeterminatePrecision:
            if bits >= cap:
                raise
            bits = min(2 * bits, cap)


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(x)
    return Fraction(x)


def fraction_to_str(x: Fraction, digits: int = 30) -> str:
    """Decimal rendering of a rational with ``digits`` significant figures."""
    return libmp.to_str(libmp.from_rational(x.numerator, x.denominator, int(digits * 3.33) + 8, "n"), digits)


def _round_dyadic(x: Fraction, bits: int, up: bool) -> Fraction:
    """Round ``x`` to a dyadic with about ``bits`` significant bits, toward +inf if ``up``."""
    num, den = x.numerator, x.denominator
    if num == 0:
        return x
    if den & (den - 1) == 0 and abs(num).bit_length() <= bits:
        return x
    shift = bits - (abs(num).bit_length() - den.bit_length())
    if shift >= 0:
        q, r = divmod(num << shift, den)
    else:
        q, r = divmod(num, den << -shift)
    if r and up:
        q += 1
    if shift >= 0:
        return Fraction(q, 1 << shift)
    return Fraction(q << -shift)


def _to_mpf(x: Fraction, prec: int, rnd: str):
    return libmp.from_rational(x.numerator, x.denominator, prec, rnd)


def _from_mpf(m) -> Fraction:
    sign, man, exp, _ = m
    man = int(man)
    if sign:
        man = -man
    if exp >= 0:
        return Fraction(man << exp)
    return Fraction(man, 1 << -exp)


def _sqrt_bounds(x: Fraction, bits: int) -> tuple[Fraction, Fraction]:
    """Dyadic lower and upper bounds for sqrt(x), x >= 0 (equal when the root is rational)."""
    if x == 0:
        return Fraction(0), Fraction(0)
    num, den = x.numerator, x.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Fraction(rn, rd), Fraction(rn, rd)
    s = max(0, bits - (num.bit_length() - den.bit_length()) // 2)
    r = math.isqrt((num << (2 * s)) // den)
    return Fraction(r, 1 << s), Fraction(r + 1, 1 << s)


@dataclass(frozen=True)
class RealInterval:
    """Closed interval ``[lo, hi]`` with dyadic endpoints."""

    lo: Fraction
    hi: Fraction
    bits: int = DEFAULT_BITS

    def __post_init__(self):
        lo, hi = as_fraction(self.lo), as_fraction(self.hi)
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_value(cls, x, bits: int = DEFAULT_BITS) -> "RealInterval":
        """Tightest dyadic enclosure of an exact value (int, Fraction, float, decimal string)."""
        if isinstance(x, RealInterval):
            return x
        f = as_fraction(x)
        return cls(_round_dyadic(f, bits, False), _round_dyadic(f, bits, True), bits)

    @classmethod
    def hull(cls, values: Iterable["RealInterval"]) -> "RealInterval":
        values = list(values)
        return cls(min(v.lo for v in values), max(v.hi for v in values), max(v.bits for v in values))

    def _make(self, lo: Fraction, hi: Fraction, bits: int) -> "RealInterval":
        return RealInterval(_round_dyadic(lo, bits, False), _round_dyadic(hi, bits, True), bits)

    def _coerce(self, other) -> "RealInterval":
        if isinstance(other, RealInterval):
            return other
        return RealInterval.from_value(other, self.bits)

    # arithmetic

    def __add__(self, other):
        o = self._coerce(other)
        return self._make(self.lo + o.lo, self.hi + o.hi, max(self.bits, o.bits))

    __radd__ = __add__

    def __neg__(self):
        return RealInterval(-self.hi, -self.lo, self.bits)

    def __sub__(self, other):
        o = self._coerce(other)
        return self._make(self.lo - o.hi, self.hi - o.lo, max(self.bits, o.bits))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        products = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return self._make(min(products), max(products), max(self.bits, o.bits))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o.lo <= 0 <= o.hi:
            raise ZeroDivisionError("divisor interval contains 0")
        quotients = (self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi)
        return self._make(min(quotients), max(quotients), max(self.bits, o.bits))

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            return NotImplemented
        if k == 0:
            return RealInterval(1, 1, self.bits)
        if self.lo >= 0:
            return self._make(self.lo**k, self.hi**k, self.bits)
        if self.hi <= 0:
            a, b = self.hi**k, self.lo**k
            return self._make(min(a, b), max(a, b), self.bits)
        top = max(-self.lo, self.hi) ** k
        if k % 2 == 0:
            return self._make(Fraction(0), top, self.bits)
        return self._make(self.lo**k, self.hi**k, self.bits)

    def __abs__(self):
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return RealInterval(0, max(-self.lo, self.hi), self.bits)

    # elementary functions (monotone, rounded outward)

    def sqrt(self) -> "RealInterval":
        if self.lo < 0:
            raise ValueError("sqrt of an interval with negative part")
        lo = _sqrt_bounds(self.lo, self.bits)[0]
        hi = _sqrt_bounds(self.hi, self.bits)[1]
        return RealInterval(lo, hi, self.bits)

    def exp(self) -> "RealInterval":
        p = self.bits + 10
        lo = libmp.mpf_exp(_to_mpf(self.lo, p, "f"), p, "f")
        hi = libmp.mpf_exp(_to_mpf(self.hi, p, "c"), p, "c")
        return self._make(_from_mpf(lo), _from_mpf(hi), self.bits)

    def log(self) -> "RealInterval":
        if self.lo <= 0:
            raise ValueError("log of an interval that is not strictly positive")
        p = self.bits + 10
        lo = libmp.mpf_log(_to_mpf(self.lo, p, "f"), p, "f")
        hi = libmp.mpf_log(_to_mpf(self.hi, p, "c"), p, "c")
        return self._make(_from_mpf(lo), _from_mpf(hi), self.bits)

    def with_bits(self, bits: int) -> "RealInterval":
        return RealInterval(self.lo, self.hi, bits)

    # queries

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def magnitude(self) -> Fraction:
        """Upper bound on |x| over the interval."""
        return max(-self.lo, self.hi)

    def mignitude(self) -> Fraction:
        """Lower bound on |x| over the interval."""
        if self.lo > 0:
            return self.lo
        if self.hi < 0:
            return -self.hi
        return Fraction(0)

    def contains(self, x) -> bool:
        if isinstance(x, RealInterval):
            return self.lo <= x.lo and x.hi <= self.hi
        x = as_fraction(x)
        return self.lo <= x <= self.hi

    __contains__ = contains

    def excludes(self, x) -> bool:
        x = as_fraction(x)
        return x < self.lo or x > self.hi

    def overlaps(self, other: "RealInterval") -> bool:
        return not (self.hi < other.lo or other.hi < self.lo)

    def compare(self, other) -> int:
        """Certified sign of ``self - other``: -1 or 1; raises if the intervals overlap."""
        o = self._coerce(other)
        if self.hi < o.lo:
            return -1
        if self.lo > o.hi:
            return 1
        raise IndeterminatePrecision(f"cannot separate {self} from {o}")

    def __float__(self):
        return float(self.mid)

    def __repr__(self):
        return f"RealInterval({float(self.lo)!r}, {float(self.hi)!r}, bits={self.bits})"


# ---------------------------------------------------------------------------
# Z[t], t = 2^(1/4), power basis (1, t, t^2, t^3)


@dataclass(frozen=True)
class QuarticInt:
    """``a + b*t + c*t^2 + d*t^3`` with ``t^4 = 2``."""

    a: int = 0
    b: int = 0
    c: int = 0
    d: int = 0

    @classmethod
    def coerce(cls, x) -> "QuarticInt":
        if isinstance(x, QuarticInt):
            return x
        if isinstance(x, int):
            return cls(x)
        if isinstance(x, (tuple, list)) and len(x) == 4:
            return cls(*(int(v) for v in x))
        raise TypeError(f"cannot interpret {x!r} as an element of Z[2^(1/4)]")

    @classmethod
    def sqrt2(cls) -> "QuarticInt":
        return cls(0, 0, 1, 0)

    @classmethod
    def t(cls) -> "QuarticInt":
        return cls(0, 1, 0, 0)

    @property
    def coords(self) -> tuple[int, int, int, int]:
        return (self.a, self.b, self.c, self.d)

    def __add__(self, other):
        o = QuarticInt.coerce(other)
        return QuarticInt(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)

    __radd__ = __add__

    def __neg__(self):
        return QuarticInt(-self.a, -self.b, -self.c, -self.d)

    def __sub__(self, other):
        return self + (-QuarticInt.coerce(other))

    def __rsub__(self, other):
        return QuarticInt.coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, int):
            return QuarticInt(self.a * other, self.b * other, self.c * other, self.d * other)
        return quartic_mul(self, QuarticInt.coerce(other))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        result, base = QuarticInt(1), self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __bool__(self):
        return any(self.coords)

    def sigma(self) -> "QuarticInt":
        return sigma(self)

    def is_even(self) -> bool:
        """True when the element lies in Z[sqrt 2]."""
        return self.b == 0 and self.d == 0

    def even_part(self) -> "QuarticInt":
        return QuarticInt(self.a, 0, self.c, 0)

    def odd_part(self) -> "QuarticInt":
        """``y`` in Z[sqrt 2] with ``self = even_part + t*y``."""
        return QuarticInt(self.b, 0, self.d, 0)

    def tau(self) -> "QuarticInt":
        """Conjugation sqrt2 -> -sqrt2, defined on the even subring only."""
        if not self.is_even():
            raise ValueError("tau is only defined on Z[sqrt 2]")
        return QuarticInt(self.a, 0, -self.c, 0)

    def inverse(self) -> "QuarticInt":
        """Inverse in Z[t]; raises ValueError unless the element is a unit."""
        y = self * self.sigma()  # in Z[sqrt 2]
        rational_norm = y.a * y.a - 2 * y.c * y.c
        if rational_norm not in (1, -1):
            raise ValueError(f"{self} is not a unit of Z[2^(1/4)]")
        return self.sigma() * (y.tau() * rational_norm)

    def enclose(self, precision_bits: int = DEFAULT_BITS) -> RealInterval:
        return enclose(self, precision_bits)

    def __str__(self):
        return f"({self.a}, {self.b}, {self.c}, {self.d})"


def quartic_mul(x: QuarticInt, y: QuarticInt) -> QuarticInt:
    a0, a1, a2, a3 = x.coords
    b0, b1, b2, b3 = y.coords
    return QuarticInt(
        a0 * b0 + 2 * (a1 * b3 + a2 * b2 + a3 * b1),
        a0 * b1 + a1 * b0 + 2 * (a2 * b3 + a3 * b2),
        a0 * b2 + a1 * b1 + a2 * b0 + 2 * a3 * b3,
        a0 * b3 + a1 * b2 + a2 * b1 + a3 * b0,
    )


def sigma(x: QuarticInt) -> QuarticInt:
    """The automorphism t -> -t of Q(2^(1/4)) over Q(sqrt 2)."""
    return QuarticInt(x.a, -x.b, x.c, -x.d)


ALPHA = QuarticInt(3, 2, 2, 2)  # (3 + 2 sqrt2) + t (2 + 2 sqrt2), a unit with inverse sigma(ALPHA)


def _power_enclosures(p: int) -> list[tuple[Fraction, Fraction]]:
    """Enclosures of t^k, k = 0..3, with denominators 2^p."""
    scale = 1 << p
    r1 = math.isqrt(math.isqrt(2 << (4 * p)))  # floor(2^(1/4) * 2^p)
    r2 = math.isqrt(2 << (2 * p))  # floor(sqrt2 * 2^p)
    r3 = integer_nthroot(8 << (4 * p), 4)[0]  # floor(2^(3/4) * 2^p)
    return [
        (Fraction(1), Fraction(1)),
        (Fraction(r1, scale), Fraction(r1 + 1, scale)),
        (Fraction(r2, scale), Fraction(r2 + 1, scale)),
        (Fraction(r3, scale), Fraction(r3 + 1, scale)),
    ]


def enclose(x: QuarticInt, precision_bits: int = DEFAULT_BITS) -> RealInterval:
    """Interval around the real value of ``x`` (t the positive real 4th root of 2).

    The width is at most ``2**-precision_bits * max(1, |value|)``.
    """
    if precision_bits < 8:
        raise ValueError("precision_bits must be at least 8")
    coeffs = x.coords
    if not any(coeffs[1:]):
        return RealInterval(x.a, x.a, precision_bits)
    p = precision_bits + max(abs(c) for c in coeffs).bit_length() + 8
    while True:
        lo = hi = Fraction(0)
        for c, (plo, phi) in zip(coeffs, _power_enclosures(p)):
            if c >= 0:
                lo += c * plo
                hi += c * phi
            else:
                lo += c * phi
                hi += c * plo
        bits = precision_bits + 4
        out = RealInterval(_round_dyadic(lo, bits, False), _round_dyadic(hi, bits, True), precision_bits)
        bound = Fraction(1, 1 << precision_bits) * max(Fraction(1), out.mignitude())
        if out.width <= bound:
            return out
        p *= 2


def interval_root(x, k: int, bits: int = DEFAULT_BITS) -> RealInterval:
    """Enclosure of the positive k-th root of an exact positive rational."""
    x = as_fraction(x)
    if x <= 0:
        raise ValueError("interval_root needs a positive rational")
    num, den = x.numerator, x.denominator
    s = max(0, bits - (num.bit_length() - den.bit_length()) // k + 2)
    scaled_num = num << (k * s)
    r, exact = integer_nthroot(scaled_num // den, k)
    r = int(r)
    exact = exact and scaled_num % den == 0
    lo = Fraction(r, 1 << s)
    hi = lo if exact else Fraction(r + 1, 1 << s)
    return RealInterval(lo, hi, bits)


# ---------------------------------------------------------------------------
# small interval-matrix helpers (lists of rows)

IMatrix = list  # list[list[RealInterval]]


def imatrix(rows, bits: int = DEFAULT_BITS) -> IMatrix:
    return [[RealInterval.from_value(v, bits) for v in row] for row in rows]


def imatmul(A: IMatrix, B: IMatrix) -> IMatrix:
    n, m, p = len(A), len(B), len(B[0])
    out = []
    for i in range(n):
        row = []
        for j in range(p):
            acc = A[i][0] * B[0][j]
            for k in range(1, m):
                acc = acc + A[i][k] * B[k][j]
            row.append(acc)
        out.append(row)
    return out


def imatsub(A: IMatrix, B: IMatrix) -> IMatrix:
    return [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def imax_abs(A: IMatrix) -> Fraction:
    """Certified upper bound on the largest absolute entry."""
    return max(v.magnitude() for row in A for v in row)


def imid(A: IMatrix) -> list[list[Fraction]]:
    return [[v.mid for v in row] for row in A]


def idet(A: IMatrix) -> RealInterval:
    """Determinant by cofactor expansion over column subsets (fine for n <= 8)."""
    return subset_det(A, RealInterval(0, 0, A[0][0].bits), RealInterval(1, 1, A[0][0].bits))


def subset_det(A, zero, one):
    """Division-free determinant over any commutative ring, O(n 2^n) ring operations.

    Expands along rows; ``minors[S]`` is the determinant of the top ``|S|`` rows
    restricted to the column set ``S`` (a bitmask).
    """
    n = len(A)
    minors = {0: one}
    for i in range(n):
        nxt = {}
        for cols, val in minors.items():
            # position parity of the new column among the chosen ones gives the sign
            for j in range(n):
                bit = 1 << j
                if cols & bit:
                    continue
                above = bin(cols >> (j + 1)).count("1")
                term = A[i][j] * val
                if above % 2:
                    term = -term
                key = cols | bit
                nxt[key] = nxt[key] + term if key in nxt else term
        minors = nxt
    return minors.get((1 << n) - 1, zero)
