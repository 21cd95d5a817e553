import pytest
from hypothesis import given, strategies as st

from vldp.field import (
    P, FieldElement, FieldError, RangeExceeded, ZeroInverse,
    add, from_bits, from_hex, inverse, mul, tag, to_bits, to_hex,
)

elements = st.integers(min_value=0, max_value=P - 1)


def test_add_examples():
    assert add(P - 1, 1) == FieldElement(0)
    assert add(0, 7) == FieldElement(7)
    assert add(5, 5) == FieldElement(10)


def test_mul_examples():
    assert mul(1, 12345) == FieldElement(12345)
    assert mul(0, 99) == FieldElement(0)
    assert mul(2, P - 1) == FieldElement(P - 2)


def test_inverse_examples():
    assert inverse(1) == FieldElement(1)
    with pytest.raises(ZeroInverse):
        inverse(0)
    with pytest.raises(ZeroDivisionError):
        FieldElement(3) / 0


@given(st.integers(min_value=1, max_value=P - 1))
def test_inverse_property(a):
    assert mul(a, inverse(a)) == FieldElement(1)


def test_to_bits_examples():
    assert to_bits(6, 3) == [0, 1, 1]
    assert to_bits(0, 4) == [0, 0, 0, 0]
    with pytest.raises(RangeExceeded):
        to_bits(8, 3)


@given(elements, elements, elements)
def test_ring_laws(a, b, c):
    assert add(a, b) == add(b, a)
    assert mul(a, b) == mul(b, a)
    assert add(add(a, b), c) == add(a, add(b, c))
    assert mul(mul(a, b), c) == mul(a, mul(b, c))
    assert mul(a, add(b, c)) == add(mul(a, b), mul(a, c))
    assert add(a, P - a) == FieldElement(0)


@given(st.integers(min_value=1, max_value=254).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(min_value=0, max_value=min(2**n, P) - 1))))
def test_bits_round_trip(case):
    n, a = case
    bits = to_bits(a, n)
    assert len(bits) == n
    assert from_bits(bits) == FieldElement(a)


@given(elements)
def test_hex_round_trip(a):
    text = to_hex(a)
    assert len(text) == 64
    assert from_hex(text) == FieldElement(a)
    assert FieldElement(a).hex() == text


def test_hex_rejects_non_canonical():
    with pytest.raises(FieldError):
        from_hex(format(P, "064x"))
    with pytest.raises(FieldError):
        from_hex("ff")
    with pytest.raises(FieldError):
        from_hex("0" * 62 + "_1")


def test_values_always_reduced():
    assert FieldElement(P + 3).value == 3
    assert FieldElement(-1).value == P - 1
    assert (FieldElement(2) - 5).value == P - 3


def test_tag_limits():
    assert tag("a") == 97
    with pytest.raises(FieldError):
        tag("x" * 32)
