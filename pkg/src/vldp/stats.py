"""Exact output distributions, (epsilon, delta) checks, goodness of fit and
histogram export.

The distribution oracle enumerates the coin process directly (magnitude bit
patterns, sign, uniform fallback) with integer numerators over one common
power-of-two denominator; it shares no sampling code with the mechanism.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from scipy import stats as sps

from .exact import Interval, exp_interval
from .mechanisms import NoiseParams, bias_table, exponential_noise_batch, randomized_response

MAX_ENUM_BITS = 16
MIN_EXPECTED = 5
MIN_SAMPLES = 30


class EnumerationTooLarge(ValueError):
    pass


class InsufficientSamples(ValueError):
    pass


@dataclass(frozen=True)
class ExactDistribution:
    """P(out = l + i) = numerators[i] / denominator."""

    v: int
    params: Optional[NoiseParams]
    numerators: tuple[int, ...]
    denominator: int
    q: tuple[Fraction, ...] = ()
    l: int = 0

    def __len__(self) -> int:
        return len(self.numerators)

    def prob(self, j: int) -> Fraction:
        return Fraction(self.numerators[j - self.l], self.denominator)

    def probabilities(self) -> dict[int, Fraction]:
        return {self.l + i: Fraction(n, self.denominator) for i, n in enumerate(self.numerators)}

    def total(self) -> Fraction:
        return Fraction(sum(self.numerators), self.denominator)

    def mode(self) -> int:
        return self.l + max(range(len(self.numerators)), key=self.numerators.__getitem__)

    def as_floats(self) -> np.ndarray:
        return np.array([n / self.denominator for n in self.numerators])


def _realised_bias(expansion: Sequence[int]) -> int:
    """Numerator over 2**d of Pr[coin = 1].

    The first disagreement happens at position j with probability 2**-(j+1)
    and then returns expansion[j]; a stream matching every position yields 0.
    """
    d = len(expansion)
    return sum(1 << (d - 1 - j) for j, e in enumerate(expansion) if e)


def exact_distribution(v: int, params: NoiseParams) -> ExactDistribution:
    nb, d, n_dom = params.n_bits, params.d, params.domain_size
    if nb > MAX_ENUM_BITS:
        raise EnumerationTooLarge(f"2**{nb} magnitude patterns exceed the enumeration bound")
    if not params.l <= v <= params.u:
        raise ValueError(f"value {v} outside [{params.l}, {params.u}]")
    scale = 1 << d
    q = [_realised_bias(e) for e in bias_table(params).expansions]
    counts = [0] * n_dom
    unif_patterns = 1 << nb
    for m in range(1 << nb):
        weight = 1
        for k in range(nb):
            weight *= q[k] if (m >> k) & 1 else scale - q[k]
        # sign = 1: +m
        counts[(v + m - params.l) % n_dom] += weight * unif_patterns
        if m:
            counts[(v - m - params.l) % n_dom] += weight * unif_patterns
        else:
            for u in range(unif_patterns):
                counts[u % n_dom] += weight
    denominator = (scale ** nb) * 2 * unif_patterns
    return ExactDistribution(v, params, tuple(counts), denominator,
                             tuple(Fraction(x, scale) for x in q), params.l)


def rr_distribution(v: int) -> ExactDistribution:
    """Randomized response output law by enumerating both coins."""
    counts = [0, 0]
    for r in product((0, 1), repeat=2):
        counts[randomized_response(v, r)] += 1
    return ExactDistribution(v, None, tuple(counts), 4, (), 0)


# -- DP checks ----------------------------------------------------------------

RatioBound = Union[Interval, Fraction, int]


def _as_interval(bound: RatioBound) -> Interval:
    return bound if isinstance(bound, Interval) else Interval.point(bound)


def set_level_excess(p: Sequence[int], q: Sequence[int], denominator: int,
                     ratio: RatioBound) -> Interval:
    """Enclosure of sum_j max(0, P(j) - ratio * Q(j)) for P, Q over a common denominator.

    This is the worst-case delta over all output sets S for the pair (P, Q).
    """
    r = _as_interval(ratio)

    def excess(x: Fraction) -> Fraction:
        a, b = x.numerator, x.denominator
        s = 0
        for pj, qj in zip(p, q):
            t = b * pj - a * qj
            if t > 0:
                s += t
        return Fraction(s, b * denominator)

    return Interval(excess(r.hi), excess(r.lo))


@dataclass(frozen=True)
class DpCheckReport:
    """``worst_ratio`` is None when some output is impossible under one input
    and possible under another."""

    epsilon: Fraction
    worst_pair: tuple[int, int]
    delta_emp: Interval
    worst_ratio: Optional[Fraction]

    def to_json(self) -> dict:
        return {
            "epsilon": str(self.epsilon),
            "worst_pair": list(self.worst_pair),
            "delta_emp_upper": float(self.delta_emp.hi),
            "delta_emp_lower": float(self.delta_emp.lo),
            "delta_emp_upper_exact": f"{self.delta_emp.hi.numerator}/{self.delta_emp.hi.denominator}",
            "worst_pointwise_ratio": None if self.worst_ratio is None else float(self.worst_ratio),
        }


def dp_check_distributions(dists: Sequence[ExactDistribution], ratio: RatioBound,
                           epsilon: Fraction) -> DpCheckReport:
    """Worst set-level excess over all ordered pairs of output distributions."""
    denominator = dists[0].denominator
    if any(d.denominator != denominator for d in dists):
        raise ValueError("distributions must share a denominator")
    best: Optional[tuple[Interval, tuple[int, int]]] = None
    worst_ratio: Optional[Fraction] = Fraction(1)
    for a in dists:
        for b in dists:
            if a is b:
                continue
            ex = set_level_excess(a.numerators, b.numerators, denominator, ratio)
            if best is None or ex.hi > best[0].hi:
                best = (ex, (a.v, b.v))
            if worst_ratio is None:
                continue
            for pa, pb in zip(a.numerators, b.numerators):
                if pb == 0:
                    if pa:
                        worst_ratio = None  # unbounded
                        break
                elif pa * worst_ratio.denominator > worst_ratio.numerator * pb:
                    worst_ratio = Fraction(pa, pb)
    if best is None:
        return DpCheckReport(Fraction(epsilon), (dists[0].v, dists[0].v),
                             Interval.point(0), Fraction(1))
    return DpCheckReport(Fraction(epsilon), best[1], best[0], worst_ratio)


def dp_ratio_check(params: NoiseParams, epsilon_claimed, values: Optional[Sequence[int]] = None,
                   prec: int = 96) -> DpCheckReport:
    """Check the claimed epsilon against the exact output laws for all pairs.

    ``values`` defaults to the whole domain {l, ..., u-1}; v = u behaves like
    v = l after the remap.
    """
    eps = Fraction(epsilon_claimed)
    if eps < 0:
        raise ValueError("epsilon must be >= 0")
    vals = list(values) if values is not None else list(range(params.l, params.u))
    dists = [exact_distribution(v, params) for v in vals]
    return dp_check_distributions(dists, exp_interval(eps, prec), eps)


# -- goodness of fit ----------------------------------------------------------

def _counts_vector(samples, dist: ExactDistribution) -> np.ndarray:
    n = len(dist)
    if isinstance(samples, Mapping):
        out = np.zeros(n, dtype=np.int64)
        for j, c in samples.items():
            out[int(j) - dist.l] += int(c)
        return out
    arr = np.asarray(samples, dtype=np.int64).ravel() - dist.l
    if arr.size and (arr.min() < 0 or arr.max() >= n):
        raise ValueError("sample outside the distribution's support")
    return np.bincount(arr, minlength=n)


def chi_square_statistic(counts: np.ndarray, dist: ExactDistribution) -> tuple[float, int]:
    n = int(counts.sum())
    if n < MIN_SAMPLES:
        raise InsufficientSamples(f"{n} samples, need at least {MIN_SAMPLES}")
    expected = dist.as_floats() * n
    keep = expected >= MIN_EXPECTED
    obs = list(counts[keep].astype(float))
    exp = list(expected[keep])
    pooled_obs, pooled_exp = float(counts[~keep].sum()), float(expected[~keep].sum())
    if pooled_exp > 0:
        if pooled_exp >= MIN_EXPECTED or not exp:
            obs.append(pooled_obs)
            exp.append(pooled_exp)
        else:
            i = int(np.argmin(exp))
            obs[i] += pooled_obs
            exp[i] += pooled_exp
    if len(exp) < 2:
        raise InsufficientSamples("fewer than two bins with enough expected mass")
    obs_a, exp_a = np.array(obs), np.array(exp)
    stat = float(((obs_a - exp_a) ** 2 / exp_a).sum())
    return stat, len(exp) - 1


def chi_square_fit(samples, dist: ExactDistribution) -> float:
    """Pearson p-value of observed outputs against ``dist``.

    ``samples`` is a flat sequence of output values or a mapping value -> count.
    Bins expected to hold fewer than 5 samples are pooled.
    """
    stat, dof = chi_square_statistic(_counts_vector(samples, dist), dist)
    return float(sps.chi2.sf(stat, dof))


# -- sampling and export ------------------------------------------------------

def sample_outputs(v: int, params: NoiseParams, n: int, rng: np.random.Generator,
                   chunk: int = 200_000) -> np.ndarray:
    """Draw mechanism outputs with uniform bits from ``rng`` (statistical runs only)."""
    out = []
    left = n
    while left > 0:
        m = min(chunk, left)
        bits = rng.integers(0, 2, size=(m, params.bits_required), dtype=np.uint8)
        out.append(exponential_noise_batch(v, params, bits))
        left -= m
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def emit_histogram(data, l: int, u: int) -> str:
    """CSV covering every value in [l, u): ``value,count`` for samples or
    ``value,probability`` (exact fractions) for an :class:`ExactDistribution`."""
    buf = io.StringIO()
    if isinstance(data, ExactDistribution):
        buf.write("value,probability\n")
        for j in range(l, u):
            p = data.prob(j)
            buf.write(f"{j},{p.numerator}/{p.denominator}\n")
        return buf.getvalue()
    counts: dict[int, int] = {}
    if isinstance(data, Mapping):
        counts = {int(k): int(c) for k, c in data.items()}
    else:
        for x in np.asarray(data, dtype=np.int64).ravel():
            counts[int(x)] = counts.get(int(x), 0) + 1
    buf.write("value,count\n")
    for j in range(l, u):
        buf.write(f"{j},{counts.get(j, 0)}\n")
    return buf.getvalue()


def parse_histogram(text: str) -> dict[int, Union[int, Fraction]]:
    lines = text.strip().splitlines()
    header, rows = lines[0], lines[1:]
    out: dict[int, Union[int, Fraction]] = {}
    for row in rows:
        k, val = row.split(",")
        out[int(k)] = Fraction(val) if "probability" in header else int(val)
    return out
