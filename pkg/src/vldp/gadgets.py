"""Standard gadgets: bit decomposition, recomposition, zero/equality tests,
constant comparison and modular reduction.

All gadgets are branchless: the constraints they emit depend only on their
compile-time parameters, never on witness values.
"""

from __future__ import annotations

from typing import Sequence

from .field import FIELD_BITS, P, inv_int
from .r1cs import ConstraintSystem, LCLike, LinearCombination, Signal

MODULO_BIT_WIDTH = 16


def _lc(x: LCLike) -> LinearCombination:
    return LinearCombination.of(x)


def gadget_num2bits(cs: ConstraintSystem, value: LCLike, n: int) -> list[Signal]:
    """Little-endian bits of ``value``; unsatisfiable unless value < 2**n.

    At n = 254 two decompositions of some values exist (x and x + P), so the
    bits are additionally forced below P.
    """
    if not 1 <= n <= FIELD_BITS:
        raise ValueError(f"n must be in [1, {FIELD_BITS}], got {n}")
    value = _lc(value)
    bits = []
    for i in range(n):
        b = cs.hint(lambda w, i=i: (value.evaluate(w) >> i) & 1)
        cs.enforce(b, b - 1, 0)
        bits.append(b)
    cs.enforce(gadget_weighted_sum(bits), 1, value)
    if (1 << n) > P:
        gadget_less_than_constant(cs, bits, P)
    return bits


def gadget_weighted_sum(bits: Sequence[LCLike]) -> LinearCombination:
    acc = LinearCombination()
    for i, b in enumerate(bits):
        acc = acc + _lc(b) * (1 << i)
    return acc


def gadget_bits2num(cs: ConstraintSystem, bits: Sequence[LCLike]) -> Signal:
    return cs.lin(gadget_weighted_sum(bits))


def gadget_less_than_constant(cs: ConstraintSystem, bits: Sequence[Signal], bound: int) -> None:
    """Force the little-endian boolean ``bits`` to encode a number < bound.

    Walks from the most significant bit keeping a running "equal so far"
    flag; the number is smaller exactly when the flag drops at a position
    where the bound has a 1.
    """
    n = len(bits)
    if bound >= 1 << n:
        return
    if bound <= 0:
        raise ValueError("bound must be positive")
    eq: LCLike = 1
    smaller = LinearCombination()
    for i in reversed(range(n)):
        bound_bit = (bound >> i) & 1
        same = bits[i].lc() if bound_bit else 1 - bits[i]
        nxt = cs.mul(eq, same)
        if bound_bit:
            smaller = smaller + _lc(eq) - nxt
        eq = nxt
    cs.enforce(smaller, 1, 1)


def gadget_is_zero(cs: ConstraintSystem, a: LCLike) -> Signal:
    """1 if a == 0 else 0.

    The auxiliary inverse is pinned to 0 when a == 0 so that every witness
    entry is uniquely determined.
    """
    a = _lc(a)
    inv = cs.hint(lambda w: inv_int(a.evaluate(w)))
    out = cs.hint(lambda w: 1 if a.evaluate(w) == 0 else 0)
    cs.enforce(a, inv, 1 - out)
    cs.enforce(a, out, 0)
    cs.enforce(out, inv, 0)
    return out


def gadget_is_equal(cs: ConstraintSystem, a: LCLike, b: LCLike) -> Signal:
    return gadget_is_zero(cs, _lc(a) - b)


def gadget_range(cs: ConstraintSystem, value: LCLike, n: int) -> list[Signal]:
    """Constrain 0 <= value < 2**n (alias for num2bits, bits discarded by most callers)."""
    return gadget_num2bits(cs, value, n)


def gadget_modulo(cs: ConstraintSystem, value: LCLike, modulus: int,
                  bit_width: int = MODULO_BIT_WIDTH) -> Signal:
    """Remainder of ``value`` by a constant modulus.

    Allocates quotient and remainder hints with value = q*modulus + r,
    q < 2**bit_width and 0 <= r < modulus. The value must be a non-negative
    integer below 2**bit_width for the honest witness to exist.
    """
    if modulus <= 0 or modulus >= 1 << bit_width:
        raise ValueError("modulus must be in [1, 2**bit_width)")
    value = _lc(value)
    q = cs.hint(lambda w: value.evaluate(w) // modulus)
    r = cs.hint(lambda w: value.evaluate(w) % modulus)
    cs.enforce(q, modulus, value - r)
    gadget_num2bits(cs, q, bit_width)
    gadget_num2bits(cs, r, bit_width)
    gadget_num2bits(cs, (modulus - 1) - r.lc(), bit_width)
    return r
