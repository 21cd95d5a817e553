"""Arithmetic in the BN254 scalar field.

Circuits and the sponge work on plain ``int`` values reduced mod ``P`` for
speed; :class:`FieldElement` is the typed value used at API and wire
boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

P = 21888242871839275222246405745257275088548364400416034343698204186575808495617
FIELD_BITS = 254
HEX_WIDTH = 64
_HEX_DIGITS = frozenset("0123456789abcdefABCDEF")


class FieldError(ValueError):
    pass


class ZeroInverse(FieldError, ZeroDivisionError):
    pass


class RangeExceeded(FieldError):
    pass


@dataclass(frozen=True, order=True)
class FieldElement:
    value: int

    def __post_init__(self):
        if not 0 <= self.value < P:
            object.__setattr__(self, "value", self.value % P)

    def __int__(self) -> int:
        return self.value

    def __index__(self) -> int:
        return self.value

    def __add__(self, other: "Elementish") -> "FieldElement":
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other: "Elementish") -> "FieldElement":
        return FieldElement(self.value - int(other))

    def __rsub__(self, other: "Elementish") -> "FieldElement":
        return FieldElement(int(other) - self.value)

    def __mul__(self, other: "Elementish") -> "FieldElement":
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> "FieldElement":
        return FieldElement(-self.value)

    def __truediv__(self, other: "Elementish") -> "FieldElement":
        return mul(self, inverse(other))

    def __pow__(self, e: int) -> "FieldElement":
        return FieldElement(pow(self.value, e, P))

    def hex(self) -> str:
        return to_hex(self)

    @classmethod
    def from_hex(cls, text: str) -> "FieldElement":
        return from_hex(text)

    def __repr__(self) -> str:
        return f"FieldElement({self.value})"


Elementish = Union[FieldElement, int]


def fe(x: Elementish) -> FieldElement:
    return x if isinstance(x, FieldElement) else FieldElement(int(x))


def add(a: Elementish, b: Elementish) -> FieldElement:
    return FieldElement((int(a) + int(b)) % P)


def mul(a: Elementish, b: Elementish) -> FieldElement:
    return FieldElement((int(a) * int(b)) % P)


def inverse(a: Elementish) -> FieldElement:
    v = int(a) % P
    if v == 0:
        raise ZeroInverse("0 has no multiplicative inverse")
    return FieldElement(pow(v, P - 2, P))


def inv_int(v: int) -> int:
    """Inverse on raw ints, 0 maps to 0 (the convention used by witness hints)."""
    v %= P
    return pow(v, P - 2, P) if v else 0


def to_bits(a: Elementish, n: int) -> list[int]:
    """Little-endian decomposition of ``a`` into exactly ``n`` bits."""
    if not 0 <= n <= FIELD_BITS:
        raise RangeExceeded(f"bit width {n} outside [0, {FIELD_BITS}]")
    v = int(a) % P
    if v >> n:
        raise RangeExceeded(f"{v} does not fit in {n} bits")
    return [(v >> i) & 1 for i in range(n)]


def from_bits(bits: Iterable[int]) -> FieldElement:
    acc = 0
    for i, b in enumerate(bits):
        if b not in (0, 1):
            raise FieldError(f"bit {i} is {b!r}, not 0/1")
        acc |= b << i
    return FieldElement(acc)


def to_hex(a: Elementish) -> str:
    return format(int(a) % P, f"0{HEX_WIDTH}x")


def from_hex(text: str) -> FieldElement:
    s = text[2:] if text.startswith(("0x", "0X")) else text
    if len(s) != HEX_WIDTH or not all(c in _HEX_DIGITS for c in s):
        raise FieldError(f"expected exactly {HEX_WIDTH} hex digits")
    v = int(s, 16)
    if v >= P:
        raise FieldError("hex value is not a canonical field element")
    return FieldElement(v)


def tag(label: str) -> int:
    """Encode a short ASCII domain label as a field integer."""
    raw = label.encode()
    if len(raw) > 31:
        raise FieldError(f"tag {label!r} longer than 31 bytes")
    return int.from_bytes(raw, "big")


def hex_list(values: Sequence[int]) -> list[str]:
    return [to_hex(v) for v in values]
