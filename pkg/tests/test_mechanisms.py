import itertools
import random
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vldp.exact import exp_interval
from vldp.mechanisms import (
    InvalidParams, NoiseParams, TruthfulValue, bias_expansion, bias_table,
    biased_coin_threshold, bit_bias, delta_ledger, draw_noise, dyadic_value,
    exponential_noise, exponential_noise_batch, randomized_response, rr_debias,
    sample_biased_bit,
)

REF_PARAMS = NoiseParams(Fraction(10), 0, 128, 20)


def _exact(x):
    """mpmath binary float as an exact Fraction."""
    man, exp = x.man_exp
    return Fraction(man) * Fraction(2) ** exp


def _mp_bias(eps, k, delta, dps=60):
    with mpmath.workdps(dps):
        x = mpmath.mpf(eps.numerator) / eps.denominator * 2**k / delta
        return _exact(1 / (1 + mpmath.exp(x)))


def _mp_exp(x, dps=120):
    with mpmath.workdps(dps):
        return _exact(mpmath.exp(mpmath.mpf(x.numerator) / x.denominator))


def test_params_invariants():
    assert REF_PARAMS.delta == 128 and REF_PARAMS.n_bits == 7 and REF_PARAMS.domain_size == 128
    assert REF_PARAMS.bits_required == 7 * 23 + 1
    assert NoiseParams(Fraction(1), 0, 129).n_bits == 8
    assert NoiseParams(Fraction(1), -5, 5).n_bits == 4
    with pytest.raises(InvalidParams):
        NoiseParams(Fraction(1), 5, 5)
    with pytest.raises(InvalidParams):
        NoiseParams(Fraction(0), 0, 10)
    with pytest.raises(InvalidParams):
        NoiseParams(Fraction(1), 0, 10, d=0)
    assert NoiseParams.from_config(REF_PARAMS.to_config()) == REF_PARAMS
    assert NoiseParams.from_config({"epsilon": "3/2", "l": 0, "u": 4}).epsilon == Fraction(3, 2)
    with pytest.raises(InvalidParams):
        NoiseParams.from_config({"epsilon": 0.5, "l": 0, "u": 4})


def test_index_map_matches_circuit_layout():
    d, nb = REF_PARAMS.d, REF_PARAMS.n_bits
    assert REF_PARAMS.stream_slice(3) == slice(3 * d, 4 * d)
    assert REF_PARAMS.uniform_slice == slice((d + 2) * nb, (d + 2) * nb + nb)
    assert REF_PARAMS.sign_index == nb * (d + 3)


def test_exp_interval_against_mpmath():
    for x in (Fraction(0), Fraction(1, 3), Fraction(10, 128), Fraction(5), Fraction(-7, 2), Fraction(40)):
        e = exp_interval(x, 200)
        ref = _mp_exp(x, 150)  # ~500 bits, far tighter than the enclosure
        assert e.lo <= ref <= e.hi
        assert e.width <= e.hi / 2**190


def test_bit_bias_examples():
    p0 = bit_bias(0, REF_PARAMS)
    p6 = bit_bias(6, REF_PARAMS)
    ref0, ref6 = _mp_bias(REF_PARAMS.epsilon, 0, 128), _mp_bias(REF_PARAMS.epsilon, 6, 128)
    for p, ref in ((p0, ref0), (p6, ref6)):
        assert p.lo <= ref <= p.hi
        assert p.width < Fraction(1, 2 ** (REF_PARAMS.d + 8))
    assert abs(float(p0.lo) - 0.4804787) < 1e-7
    assert abs(float(p0.lo) - 0.4804766) < 5e-6  # value quoted as an approximation
    assert abs(float(p6.lo) - 0.0066929) < 1e-7
    assert abs(float(p6.lo) - 1 / (1 + float(mpmath.e) ** 5)) < 1e-12
    assert abs(ref0 - Fraction(4804787, 10**7)) < Fraction(1, 10**7)


@settings(max_examples=60, deadline=None)
@given(st.fractions(min_value=Fraction(1, 100), max_value=40, max_denominator=1000),
       st.integers(min_value=2, max_value=300), st.integers(min_value=1, max_value=60))
def test_bias_floor_matches_mpmath(eps, delta, d):
    params = NoiseParams(eps, 0, delta, d)
    table = bias_table(params)
    for k in range(params.n_bits):
        ref = _mp_bias(eps, k, delta, dps=d // 3 + 40)
        assert ref < Fraction(1, 2)
        floor = (ref.numerator << d) // ref.denominator
        assert table.expansions[k] == tuple(int(b) for b in format(floor, f"0{d}b"))
        assert table.q[k] <= table.p[k].lo and table.p[k].hi < table.q[k] + Fraction(1, 2**d)


def test_bias_expansion_examples():
    assert bias_expansion(Fraction(5, 8), 3) == (1, 0, 1)
    assert bias_expansion(Fraction(1, 3), 4) == (0, 1, 0, 1)
    assert bias_expansion(Fraction(1, 2), 1) == (1,)
    assert dyadic_value((0, 1, 0, 1)) == Fraction(5, 16)


def test_sample_biased_bit_examples():
    exp = (1, 0, 1)
    assert sample_biased_bit(exp, (0, 1, 1)).bit == 1
    assert sample_biased_bit(exp, (1, 1, 0)).bit == 0
    outcomes = [sample_biased_bit(exp, s) for s in itertools.product((0, 1), repeat=3)]
    assert Fraction(sum(o.bit for o in outcomes), 8) == Fraction(5, 8)
    assert sum(o.exhausted for o in outcomes) == 1
    assert all(o.consumed == 3 for o in outcomes)
    assert sample_biased_bit(exp, exp) == (0, 3, True)


def test_randomized_response_examples():
    assert randomized_response(1, [0, 0]) == 1
    assert randomized_response(1, [1, 0]) == 0
    assert randomized_response(0, [1, 1]) == 1
    for v in (0, 1):
        truthful = sum(randomized_response(v, r) == v for r in itertools.product((0, 1), repeat=2))
        assert Fraction(truthful, 4) == Fraction(3, 4)
        for r in itertools.product((0, 1), repeat=2):
            assert randomized_response(v, r) == (1 - r[0]) * v + r[0] * r[1]
    with pytest.raises(InvalidParams):
        randomized_response(2, [0, 0])
    with pytest.raises(InvalidParams):
        TruthfulValue(3, "binary")


def _bits_for(params, magnitude, sign, uniform=0):
    """A bit array that forces the given magnitude, sign and fallback bits."""
    table = bias_table(params)
    r = [0] * params.bits_required
    for k, exp in enumerate(table.expansions):
        want = (magnitude >> k) & 1
        stream = list(exp)
        positions = [j for j, e in enumerate(exp) if e == want]
        if positions:
            j = positions[0]
            stream[j] = 1 - exp[j]  # first mismatch lands where the expansion holds `want`
        else:
            assert want == 0  # stream equal to the expansion: exhausted, yields 0
        r[params.stream_slice(k)] = stream
    for i in range(params.n_bits):
        r[params.uniform_slice.start + i] = (uniform >> i) & 1
    r[params.sign_index] = sign
    return r


def test_exponential_noise_examples():
    assert exponential_noise(50, REF_PARAMS, _bits_for(REF_PARAMS, 0, 1)) == 50
    assert exponential_noise(120, REF_PARAMS, _bits_for(REF_PARAMS, 15, 1)) == 7
    assert exponential_noise(3, REF_PARAMS, _bits_for(REF_PARAMS, 5, 0)) == 126
    draw = draw_noise(120, REF_PARAMS, _bits_for(REF_PARAMS, 15, 1))
    assert (draw.magnitude, draw.sign, draw.uniform) == (15, 1, False)
    with pytest.raises(InvalidParams):
        exponential_noise(129, REF_PARAMS, _bits_for(REF_PARAMS, 0, 1))
    assert exponential_noise(128, REF_PARAMS, _bits_for(REF_PARAMS, 0, 1)) == 0


def test_negative_zero_uses_uniform_fallback():
    outs = {exponential_noise(50, REF_PARAMS, _bits_for(REF_PARAMS, 0, 0, u)) for u in range(128)}
    assert outs == set(range(128))
    # conditional on the "-0" event, sampled outputs look uniform
    rng = np.random.default_rng(4)
    bits = rng.integers(0, 2, size=(200_000, REF_PARAMS.bits_required), dtype=np.uint8)
    table = bias_table(REF_PARAMS)
    zero = np.ones(len(bits), dtype=bool)
    for k, exp in enumerate(table.expansions):
        stream = bits[:, REF_PARAMS.stream_slice(k)]
        e = np.array(exp, dtype=np.uint8)
        diff = stream != e
        zero &= ~(diff.any(axis=1) & (e[diff.argmax(axis=1)] == 1))
    cond = zero & (bits[:, REF_PARAMS.sign_index] == 0)
    outs = exponential_noise_batch(50, REF_PARAMS, bits[cond])
    counts = np.bincount(outs, minlength=128)
    from scipy.stats import chisquare
    assert cond.sum() > 5000
    assert chisquare(counts).pvalue > 0.001


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=-20, max_value=20), st.integers(min_value=2, max_value=70),
       st.integers(min_value=1, max_value=8), st.data())
def test_noise_in_range_and_pure(l, width, d, data):
    params = NoiseParams(Fraction(3, 2), l, l + width, d)
    v = data.draw(st.integers(min_value=l, max_value=l + width))
    r = data.draw(st.lists(st.integers(0, 1), min_size=params.bits_required,
                           max_size=params.bits_required))
    out = exponential_noise(v, params, r)
    assert l <= out < l + width
    assert out == exponential_noise(v, params, list(r))
    assert out == int(exponential_noise_batch(v, params, np.array([r]))[0])


def test_batch_matches_scalar():
    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2, size=(3000, REF_PARAMS.bits_required), dtype=np.uint8)
    batch = exponential_noise_batch(77, REF_PARAMS, bits)
    assert all(int(b) == exponential_noise(77, REF_PARAMS, row.tolist()) for b, row in zip(batch, bits))


def test_delta_ledger():
    led = delta_ledger(REF_PARAMS)
    assert led.base == Fraction(7, 2**20)
    assert abs(float(led.base) - 6.68e-6) < 1e-8
    table = bias_table(REF_PARAMS)
    prob0 = Fraction(1)
    for exp in table.expansions:
        prob0 *= 1 - Fraction(int("".join(map(str, exp)), 2), 2**REF_PARAMS.d)
    assert led.mixing == prob0 / 2 / 128
    assert 0 <= led.truncation <= led.base
    # 2 exp(-81920) underflows every float; check the exponent bound instead
    assert 0 < led.tail <= Fraction(1, 2**1024)
    assert -81920 / mpmath.log(2) <= led.tail_log2 <= -81920 / mpmath.log(2) + 2
    assert led.total == led.base + led.tail + led.mixing + led.truncation
    fine = delta_ledger(NoiseParams(Fraction(10), 0, 128, 54))
    assert fine.base <= Fraction(7, 2**54) and fine.base < Fraction(1, 10**15)
    assert fine.tail_log2 < -(10**15)
    doc = led.to_json()
    assert doc["base"]["exact"] == "7/1048576"


def test_ledger_tail_bounds_small_precision():
    params = NoiseParams(Fraction(1, 10), 0, 128, 4)
    led = delta_ledger(params)
    true_tail = 2 / _mp_exp(Fraction(1, 10) * 16 / 128)
    assert led.tail >= true_tail


def test_rr_debias_examples():
    assert rr_debias(3, 4) == 1.0
    assert rr_debias(1, 4) == 0.0
    assert rr_debias(1, 2) == 0.5
    assert rr_debias(0, 10) == 0.0
    with pytest.raises(ValueError):
        rr_debias(0, 0)


def test_biased_coin_threshold_examples():
    assert biased_coin_threshold([0], Fraction(1, 2), 1) == 1
    assert biased_coin_threshold([1], Fraction(1, 2), 1) == 0
    hits = sum(biased_coin_threshold(r, Fraction(5, 8), 3) for r in itertools.product((0, 1), repeat=3))
    assert Fraction(hits, 8) == Fraction(5, 8)
    assert all(biased_coin_threshold(r, Fraction(1, 100), 4) == 0
               for r in itertools.product((0, 1), repeat=4))


def test_biased_coin_methods_agree_in_law():
    rng = random.Random(8)
    for _ in range(50):
        d = rng.randrange(1, 10)
        p = Fraction(rng.randrange(1, 997), 997)
        exp = bias_expansion(p, d)
        streams = list(itertools.product((0, 1), repeat=d))
        a = sum(sample_biased_bit(exp, s).bit for s in streams)
        b = sum(biased_coin_threshold(s, p, d) for s in streams)
        assert a == b == (p.numerator << d) // p.denominator
