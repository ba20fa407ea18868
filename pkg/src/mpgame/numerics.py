"""Arbitrary-precision scalars, monotone root solving and closed intervals.

Real numbers are gmpy2 ``mpfr`` values (aliased ``HPReal``).  Every public
routine takes an explicit precision and evaluates inside its own gmpy2
context, so callers never depend on the ambient context.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import gmpy2
from gmpy2 import mpfr

HPReal = mpfr
DEFAULT_PREC = 256
MIN_PREC = 64


class MPGameError(Exception):
    """Base class for library errors."""


class DomainError(MPGameError, ValueError):
    pass


class BracketError(MPGameError, ValueError):
    pass


class ResourceError(MPGameError):
    """A configured budget (cache length, cylinder count, depth) was exceeded."""


class PrecisionError(MPGameError):
    """Working precision is insufficient to decide a comparison; retry with more bits."""

    def __init__(self, message, prec=None):
        super().__init__(message)
        self.prec = prec


class BranchBoundaryError(PrecisionError):
    pass


def precision(prec: int):
    """Context manager fixing the working precision in bits."""
    prec = int(prec)
    if prec < MIN_PREC:
        raise DomainError(f"precision must be >= {MIN_PREC} bits, got {prec}")
    return gmpy2.context(precision=prec)


def hp(value, prec: int = DEFAULT_PREC) -> mpfr:
    """Convert ``value`` (int, float, str, mpfr, Fraction) to an HPReal at ``prec`` bits."""
    with precision(prec):
        if isinstance(value, str):
            return mpfr(value.strip())
        if hasattr(value, "numerator") and hasattr(value, "denominator") and not isinstance(value, int):
            return mpfr(value.numerator) / mpfr(value.denominator)
        return mpfr(value)


def prec_of(*xs) -> int:
    return max(int(x.precision) for x in xs)


def pow_real(x, e, prec: int | None = None) -> mpfr:
    """x**e for x >= 0, e > 0, correctly rounded at the working precision."""
    if prec is None:
        given = [v for v in (x, e) if isinstance(v, mpfr)]
        prec = prec_of(*given) if given else DEFAULT_PREC
    with precision(prec):
        x = mpfr(x)
        e = mpfr(e)
        if x < 0:
            raise DomainError("pow_real: negative base")
        if not e > 0:
            raise DomainError("pow_real: exponent must be positive")
        if x == 0:
            return mpfr(0)
        return x ** e


def solve_increasing(g, lo, hi, target, prec: int = DEFAULT_PREC, dg=None, tol_bits: int = 8,
                     max_iter: int = 10_000) -> mpfr:
    """Root of g(x) = target on [lo, hi] for strictly increasing g.

    Newton steps (analytic ``dg`` if given, secant otherwise) guarded by a
    bisection bracket.  Stops when |g(x) - target| <= 2**(-prec + tol_bits)
    or the bracket collapses to adjacent floats.
    """
    with precision(prec):
        lo, hi, target = mpfr(lo), mpfr(hi), mpfr(target)
        if not lo <= hi:
            raise BracketError("solve_increasing: lo > hi")
        glo, ghi = g(lo) - target, g(hi) - target
        if glo > 0 or ghi < 0:
            raise BracketError(
                f"target outside [g(lo), g(hi)]: g(lo)-t={float(glo):.3g}, g(hi)-t={float(ghi):.3g}")
        tol = mpfr(2) ** (-prec + tol_bits)
        if abs(glo) <= tol:
            return lo
        if abs(ghi) <= tol:
            return hi
        a, b, ga, gb = lo, hi, glo, ghi
        x = a - ga * (b - a) / (gb - ga)
        width = b - a
        for _ in range(max_iter):
            gx = g(x) - target
            if abs(gx) <= tol:
                return x
            if gx < 0:
                a, ga = x, gx
            else:
                b, gb = x, gx
            if gmpy2.next_above(a) >= b:
                return a if -ga <= gb else b
            if dg is not None:
                d = dg(x)
                xn = x - gx / d if d > 0 else a
            else:
                xn = a - ga * (b - a) / (gb - ga)
            # bracket guard: bisect if the model step leaves the bracket
            # or the bracket failed to halve
            if not (a < xn < b) or (b - a) > width / 2:
                xn = (a + b) / 2
            width = b - a
            x = xn
        raise ResourceError("solve_increasing: iteration budget exhausted")


@dataclass(frozen=True)
class ClosedInterval:
    """[left, right] with 0 <= left < right <= 1."""

    left: mpfr
    right: mpfr

    def __post_init__(self):
        if not isinstance(self.left, mpfr) or not isinstance(self.right, mpfr):
            raise DomainError("ClosedInterval endpoints must be mpfr values")
        if not (0 <= self.left < self.right <= 1):
            raise DomainError(f"invalid interval [{self.left}, {self.right}]")

    @classmethod
    def make(cls, left, right, prec: int = DEFAULT_PREC) -> "ClosedInterval":
        return cls(hp(left, prec), hp(right, prec))

    @property
    def prec(self) -> int:
        return prec_of(self.left, self.right)

    def width(self) -> mpfr:
        with precision(self.prec):
            return self.right - self.left

    def midpoint(self) -> mpfr:
        with precision(self.prec):
            return (self.left + self.right) / 2

    def contains(self, x) -> bool:
        if isinstance(x, ClosedInterval):
            return x.subset(self)
        return self.left <= x <= self.right

    def subset(self, other: "ClosedInterval") -> bool:
        return other.left <= self.left and self.right <= other.right

    def intersects(self, other: "ClosedInterval") -> bool:
        return self.left <= other.right and other.left <= self.right

    def gap(self, other: "ClosedInterval") -> mpfr:
        with precision(max(self.prec, other.prec)):
            if self.right < other.left:
                return other.left - self.right
            if other.right < self.left:
                return self.left - other.right
            return mpfr(0)

    def __repr__(self):
        return f"[{float(self.left):.12g}, {float(self.right):.12g}]"


def interval_algebra(a: ClosedInterval, b: ClosedInterval) -> dict:
    """Bundle of the basic relations between two intervals (a against b)."""
    return {
        "width": a.width(),
        "midpoint": a.midpoint(),
        "contains": a.contains(b),
        "subset": a.subset(b),
        "intersects": a.intersects(b),
        "gap": a.gap(b),
    }


def needs_escalation(width, prec: int) -> bool:
    """True when a width is below the resolvable scale 2**(-prec/2)."""
    return width < mpfr(2) ** (-(prec // 2))


def decimal_digits(prec: int) -> int:
    return 1 + math.ceil(prec * math.log10(2))


def to_decimal(x: mpfr, prec: int | None = None) -> str:
    """Exact-enough decimal string: round-trips to the same mpfr at ``prec`` bits."""
    if prec is None:
        prec = int(x.precision)
    if x == 0:
        return "0"
    mant, exp, _ = x.digits(10, decimal_digits(prec))
    sign = ""
    if mant.startswith("-"):
        sign, mant = "-", mant[1:]
    mant = mant.rstrip("0") or "0"
    frac = mant[1:] or "0"
    return f"{sign}{mant[0]}.{frac}e{exp - 1}"


def from_decimal(s: str, prec: int) -> mpfr:
    return hp(s, prec)
