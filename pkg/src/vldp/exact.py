"""Rigorous rational enclosures of the exponential function."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

Rational = Union[Fraction, int]


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x: Rational) -> "Interval":
        x = Fraction(x)
        return cls(x, x)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    def __float__(self) -> float:
        return float((self.lo + self.hi) / 2)


def _round_down(x: Fraction, prec: int) -> Fraction:
    """Largest m*2**e <= x with m of at most ``prec`` bits (x > 0)."""
    e = x.numerator.bit_length() - x.denominator.bit_length() - prec
    if e >= 0:
        return Fraction((x.numerator // (x.denominator << e)) << e)
    return Fraction((x.numerator << -e) // x.denominator, 1 << -e)


def _round_up(x: Fraction, prec: int) -> Fraction:
    e = x.numerator.bit_length() - x.denominator.bit_length() - prec
    if e >= 0:
        q = -(-x.numerator // (x.denominator << e))
        return Fraction(q << e)
    return Fraction(-(-(x.numerator << -e) // x.denominator), 1 << -e)


def exp_interval(x: Rational, prec: int = 128) -> Interval:
    """Enclosure of exp(x) for rational x, relative width about 2**-prec.

    Argument reduction by halving until |x| <= 1/2, a Taylor sum with an
    explicit geometric tail bound, then repeated outward-rounded squaring.
    """
    x = Fraction(x)
    if x == 0:
        return Interval.point(1)
    if x < 0:
        inv = exp_interval(-x, prec)
        return Interval(_round_down(1 / inv.hi, prec + 8), _round_up(1 / inv.lo, prec + 8))
    work = prec + 16 + x.numerator.bit_length()
    s = 0
    y = x
    while y > Fraction(1, 2):
        y /= 2
        s += 1
    term = Fraction(1)
    total = Fraction(1)
    n = 0
    while True:
        n += 1
        term = term * y / n
        total += term
        # remaining tail <= term * y/(n+1) / (1 - y/(n+2)) <= 2 * term * y/(n+1)
        tail = 2 * term * y / (n + 1)
        if tail < Fraction(1, 1 << work):
            break
    lo = _round_down(total, work)
    hi = _round_up(total + tail, work)
    for _ in range(s):
        lo = _round_down(lo * lo, work)
        hi = _round_up(hi * hi, work)
    return Interval(lo, hi)


def ceil_log2(n: int) -> int:
    if n < 1:
        raise ValueError("n must be positive")
    return (n - 1).bit_length()
