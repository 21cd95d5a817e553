import math
from collections import Counter
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from vldp.mechanisms import NoiseParams, exponential_noise
from vldp.stats import (
    EnumerationTooLarge,
    InsufficientSamples,
    chi_square_fit,
    dp_check_distributions,
    dp_ratio_check,
    emit_histogram,
    exact_distribution,
    parse_histogram,
    rr_distribution,
    sample_outputs,
)

SMALL = NoiseParams(Fraction(2), 0, 4, 3)  # nBits = 2, 13 random bits


def test_exact_matches_brute_force_enumeration():
    # every one of the 2**13 bit strings pushed through the scalar mechanism
    for v in range(SMALL.l, SMALL.u):
        counts = Counter(exponential_noise(v, SMALL, bits)
                         for bits in product((0, 1), repeat=SMALL.bits_required))
        total = 2 ** SMALL.bits_required
        dist = exact_distribution(v, SMALL)
        for j in range(SMALL.l, SMALL.u):
            assert dist.prob(j) == Fraction(counts[j], total)


def test_exact_matches_brute_force_offset_domain():
    params = NoiseParams(Fraction(1, 2), -3, 2, 2)  # N = 5, nBits = 3
    for v in (-3, 0, 1):
        counts = Counter(exponential_noise(v, params, bits)
                         for bits in product((0, 1), repeat=params.bits_required))
        dist = exact_distribution(v, params)
        for j in range(-3, 2):
            assert dist.prob(j) == Fraction(counts[j], 2 ** params.bits_required)


def test_reference_total_and_mode(ref_params):
    dist = exact_distribution(50, ref_params)
    assert dist.total() == 1
    assert len(dist) == 128
    assert dist.mode() == 50
    assert dist.prob(49) == dist.prob(51)
    assert dist.prob(50) > dist.prob(49)


def test_symmetry_about_center(ref_params):
    dist = exact_distribution(64, ref_params)
    for m in range(1, 64):
        assert dist.prob(64 + m) == dist.prob(64 - m)


def test_denominator_structure():
    params = NoiseParams(Fraction(3), 0, 100, 10)
    dist = exact_distribution(37, params)
    assert dist.total() == 1
    for p in dist.probabilities().values():
        den = p.denominator
        while den % 2 == 0:
            den //= 2
        assert 100 % den == 0


def test_enumeration_bound():
    with pytest.raises(EnumerationTooLarge):
        exact_distribution(0, NoiseParams(Fraction(1), 0, 2 ** 17 + 1, 4))
    with pytest.raises(ValueError):
        exact_distribution(200, NoiseParams(Fraction(1), 0, 128, 4))


def test_monte_carlo_agrees_with_exact(ref_params):
    rng = np.random.default_rng(2024)
    n = 10 ** 6
    samples = sample_outputs(50, ref_params, n, rng)
    counts = np.bincount(samples, minlength=128)
    p = exact_distribution(50, ref_params).as_floats()
    sigma = np.sqrt(n * p * (1 - p))
    z = np.abs(counts - n * p) / np.maximum(sigma, 1e-12)
    assert z.max() < 5


def test_rr_distribution():
    assert rr_distribution(1).probabilities() == {0: Fraction(1, 4), 1: Fraction(3, 4)}
    assert rr_distribution(0).probabilities() == {0: Fraction(3, 4), 1: Fraction(1, 4)}


def test_rr_dp_at_ratio_three_and_below():
    dists = [rr_distribution(0), rr_distribution(1)]
    rep = dp_check_distributions(dists, 3, Fraction(0))
    assert rep.delta_emp.hi == 0
    assert rep.worst_ratio == 3
    rep2 = dp_check_distributions(dists, 2, Fraction(0))
    assert rep2.delta_emp.lo == Fraction(1, 4)


def test_dp_check_small_within_ledger():
    from vldp.mechanisms import delta_ledger
    params = NoiseParams(Fraction(4), 0, 16, 12)
    rep = dp_ratio_check(params, 4)
    assert rep.delta_emp.hi <= delta_ledger(params).total


def test_dp_check_epsilon_zero_has_positive_delta():
    params = NoiseParams(Fraction(4), 0, 16, 12)
    rep = dp_ratio_check(params, 0)
    assert rep.delta_emp.lo > 0


def test_dp_check_monotone_in_epsilon():
    params = NoiseParams(Fraction(2), 0, 8, 10)
    deltas = [dp_ratio_check(params, e).delta_emp.hi for e in (0, Fraction(1, 2), 1, 2, 4)]
    assert deltas == sorted(deltas, reverse=True)


def test_dp_check_order_independent():
    params = NoiseParams(Fraction(2), 0, 8, 10)
    a = dp_ratio_check(params, 1, values=range(8))
    b = dp_ratio_check(params, 1, values=reversed(range(8)))
    assert a.delta_emp == b.delta_emp


def test_chi_square_self_consistency(ref_params):
    dist = exact_distribution(50, ref_params)
    p = dist.as_floats()
    p = p / p.sum()
    rng = np.random.default_rng(11)
    passes = 0
    for _ in range(100):
        counts = rng.multinomial(10 ** 6, p)
        if chi_square_fit(dict(enumerate(counts)), dist) > 0.001:
            passes += 1
    assert passes >= 99


def test_chi_square_detects_wrong_value(ref_params):
    rng = np.random.default_rng(5)
    samples = sample_outputs(50, ref_params, 10 ** 4, rng)
    assert chi_square_fit(samples, exact_distribution(60, ref_params)) < 1e-6


def test_chi_square_needs_samples(ref_params):
    dist = exact_distribution(50, ref_params)
    with pytest.raises(InsufficientSamples):
        chi_square_fit([50] * 29, dist)
    with pytest.raises(ValueError):
        chi_square_fit([500] * 100, dist)


def test_histogram_rows(ref_params):
    rng = np.random.default_rng(0)
    samples = sample_outputs(50, ref_params, 10 ** 4, rng)
    text = emit_histogram(samples, 0, 128)
    rows = text.strip().splitlines()
    assert rows[0] == "value,count"
    assert len(rows) == 129
    hist = parse_histogram(text)
    assert sum(hist.values()) == 10 ** 4
    assert max(hist, key=hist.get) == 50


def test_histogram_empty():
    hist = parse_histogram(emit_histogram([], 0, 128))
    assert len(hist) == 128 and not any(hist.values())


def test_histogram_exact_export(ref_params):
    hist = parse_histogram(emit_histogram(exact_distribution(50, ref_params), 0, 128))
    assert sum(hist.values()) == 1
    assert all(isinstance(x, Fraction) for x in hist.values())


def test_sample_outputs_deterministic(ref_params):
    a = sample_outputs(50, ref_params, 1000, np.random.default_rng(3))
    b = sample_outputs(50, ref_params, 1000, np.random.default_rng(3))
    assert np.array_equal(a, b)
    assert a.min() >= 0 and a.max() < 128
    assert math.isclose(np.mean(a == 50), 0.0379, abs_tol=0.02)
