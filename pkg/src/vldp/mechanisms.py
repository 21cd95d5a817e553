"""Native reference implementations of randomized response and
exponentially distributed noise built from biased coins.

All probability bookkeeping is exact: epsilon is a ``Fraction``, biases are
carried as rational enclosures of ``1 / (1 + exp(eps * 2**k / Delta))`` and
the realised coin biases are dyadic rationals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .exact import Interval, _round_up, exp_interval

MAX_PRECISION_BITS = 1 << 14
# rational just above ln 2 (0.693147180559945309417...)
LN2_UPPER = Fraction(693147180559945310, 10**18)
# the tail term is reported no smaller than 2**-TAIL_CAP_BITS to keep fractions small
TAIL_CAP_BITS = 1024
NO, YES = 0, 1


class InvalidParams(ValueError):
    pass


class PrecisionExhausted(ArithmeticError):
    pass


@dataclass(frozen=True)
class NoiseParams:
    """Survey configuration for the noise mechanism.

    The output domain is ``{l, ..., u - 1}``; ``Delta = u - l`` is both the
    sensitivity and the domain size.
    """

    epsilon: Fraction
    l: int
    u: int
    d: int = 20

    def __post_init__(self):
        eps = Fraction(self.epsilon)
        object.__setattr__(self, "epsilon", eps)
        if eps <= 0:
            raise InvalidParams("epsilon must be positive")
        if self.u <= self.l:
            raise InvalidParams(f"need u > l, got l={self.l}, u={self.u}")
        if self.u - self.l < 2:
            raise InvalidParams("the value range must contain at least two values")
        if self.d < 1:
            raise InvalidParams("precision d must be >= 1")

    @property
    def delta(self) -> int:
        return self.u - self.l

    @property
    def n_bits(self) -> int:
        return (self.delta - 1).bit_length()

    @property
    def domain_size(self) -> int:
        return self.delta

    @property
    def bits_required(self) -> int:
        return self.n_bits * (self.d + 3) + 1

    # fixed randomness index map
    def stream_slice(self, k: int) -> slice:
        return slice(k * self.d, (k + 1) * self.d)

    @property
    def uniform_slice(self) -> slice:
        start = (self.d + 2) * self.n_bits
        return slice(start, start + self.n_bits)

    @property
    def sign_index(self) -> int:
        return self.n_bits * (self.d + 3)

    def to_config(self) -> dict:
        return {
            "epsilon": {"num": self.epsilon.numerator, "den": self.epsilon.denominator},
            "l": self.l,
            "u": self.u,
            "d": self.d,
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "NoiseParams":
        try:
            eps = cfg["epsilon"]
            if isinstance(eps, dict):
                eps = Fraction(int(eps["num"]), int(eps["den"]))
            elif isinstance(eps, str):
                eps = Fraction(eps)
            elif isinstance(eps, int):
                eps = Fraction(eps)
            else:
                raise InvalidParams("epsilon must be an integer, a fraction string or {num, den}")
            return cls(eps, int(cfg["l"]), int(cfg["u"]), int(cfg.get("d", 20)))
        except (KeyError, ZeroDivisionError, TypeError) as exc:
            raise InvalidParams(f"bad noise config: {exc}") from exc


@dataclass(frozen=True)
class TruthfulValue:
    v: int
    kind: str = "numeric"

    def __post_init__(self):
        if self.kind not in ("binary", "numeric"):
            raise InvalidParams(f"unknown value kind {self.kind!r}")
        if self.kind == "binary" and self.v not in (NO, YES):
            raise InvalidParams("binary values are 0 (No) or 1 (Yes)")

    def check_range(self, params: NoiseParams) -> None:
        if not params.l <= self.v <= params.u:
            raise InvalidParams(f"value {self.v} outside [{params.l}, {params.u}]")


# -- biases ------------------------------------------------------------------

def _floor_scaled(x: Fraction, d: int) -> int:
    return (x.numerator << d) // x.denominator


def bit_bias(k: int, params: NoiseParams) -> Interval:
    """Enclosure of p_k = 1 / (1 + exp(eps * 2**k / Delta)) that pins floor(p_k * 2**d)."""
    if not 0 <= k < params.n_bits:
        raise ValueError(f"bit index {k} outside [0, {params.n_bits})")
    x = params.epsilon * (1 << k) / params.delta
    d = params.d
    prec = d + 64
    while prec <= MAX_PRECISION_BITS:
        e = exp_interval(x, prec)
        p = Interval(1 / (1 + e.hi), 1 / (1 + e.lo))
        if p.width < Fraction(1, 1 << (d + 8)) and _floor_scaled(p.lo, d) == _floor_scaled(p.hi, d):
            return p
        prec *= 2
    raise PrecisionExhausted(f"could not resolve floor(p_{k} * 2**{d})")


def bias_expansion(p: Union[Interval, Fraction], d: int) -> tuple[int, ...]:
    """Most-significant-first bits of floor(p * 2**d)."""
    if not isinstance(p, Interval):
        p = Interval.point(p)
    if not (0 <= p.lo and p.hi < 1):
        raise ValueError("bias must lie in [0, 1)")
    lo, hi = _floor_scaled(p.lo, d), _floor_scaled(p.hi, d)
    if lo != hi:
        raise PrecisionExhausted("enclosure does not determine the truncated expansion")
    return tuple((lo >> (d - 1 - j)) & 1 for j in range(d))


def dyadic_value(expansion: Sequence[int]) -> Fraction:
    d = len(expansion)
    return Fraction(int("".join(map(str, expansion)) or "0", 2), 1 << d)


@dataclass(frozen=True)
class BiasTable:
    params: NoiseParams
    p: tuple[Interval, ...]
    expansions: tuple[tuple[int, ...], ...]
    q: tuple[Fraction, ...] = field(default=())

    def to_json(self) -> dict:
        return {
            "params": self.params.to_config(),
            "bits": ["".join(map(str, e)) for e in self.expansions],
        }


@lru_cache(maxsize=64)
def bias_table(params: NoiseParams) -> BiasTable:
    ps = tuple(bit_bias(k, params) for k in range(params.n_bits))
    exps = tuple(bias_expansion(p, params.d) for p in ps)
    return BiasTable(params, ps, exps, tuple(dyadic_value(e) for e in exps))


# -- sampling ----------------------------------------------------------------

class BiasedBit(NamedTuple):
    bit: int
    consumed: int
    exhausted: bool


def sample_biased_bit(expansion: Sequence[int], stream: Sequence[int]) -> BiasedBit:
    """Biased coin from unbiased bits: the first position where the stream
    disagrees with the expansion decides the outcome (the expansion bit there,
    i.e. the complement of the stream bit). A stream equal to the expansion
    yields 0 and is flagged as exhausted."""
    d = len(expansion)
    if len(stream) != d:
        raise ValueError(f"stream has {len(stream)} bits, expansion has {d}")
    for e, r in zip(expansion, stream):
        if e != r:
            return BiasedBit(e, d, False)
    return BiasedBit(0, d, True)


def randomized_response(v: Union[int, TruthfulValue], r: Sequence[int]) -> int:
    """Truthful on r[0] = 0, otherwise the second coin answers Yes/No."""
    v = v.v if isinstance(v, TruthfulValue) else v
    if v not in (NO, YES):
        raise InvalidParams("randomized response takes a binary value")
    if len(r) < 2:
        raise ValueError("need at least two random bits")
    if r[0] == 0:
        return v
    return YES if r[1] == 1 else NO


class NoiseDraw(NamedTuple):
    output: int
    magnitude: int
    sign: int
    uniform: bool
    exhausted: int


def remap(x: int, params: NoiseParams) -> int:
    return params.l + (x - params.l) % params.domain_size


def draw_noise(v: int, params: NoiseParams, r: Sequence[int],
               table: BiasTable | None = None) -> NoiseDraw:
    if len(r) < params.bits_required:
        raise ValueError(f"need {params.bits_required} random bits, got {len(r)}")
    table = table or bias_table(params)
    magnitude = 0
    exhausted = 0
    for k, exp_bits in enumerate(table.expansions):
        bit, _, ex = sample_biased_bit(exp_bits, r[params.stream_slice(k)])
        magnitude |= bit << k
        exhausted += ex
    sign = r[params.sign_index]
    if magnitude == 0 and sign == 0:
        ubits = r[params.uniform_slice]
        u = sum(b << i for i, b in enumerate(ubits))
        return NoiseDraw(params.l + u % params.domain_size, 0, 0, True, exhausted)
    x = v + (2 * sign - 1) * magnitude
    return NoiseDraw(remap(x, params), magnitude, sign, False, exhausted)


def exponential_noise(v: Union[int, TruthfulValue], params: NoiseParams,
                      r: Sequence[int]) -> int:
    tv = v if isinstance(v, TruthfulValue) else TruthfulValue(int(v))
    tv.check_range(params)
    return draw_noise(tv.v, params, r).output


def exponential_noise_batch(v: int, params: NoiseParams, bits) -> np.ndarray:
    """Vectorised exponential_noise over rows of a 0/1 array (n, bits_required)."""
    bits = np.asarray(bits, dtype=np.uint8)
    n = bits.shape[0]
    table = bias_table(params)
    magnitude = np.zeros(n, dtype=np.int64)
    for k, exp_bits in enumerate(table.expansions):
        stream = bits[:, params.stream_slice(k)]
        e = np.asarray(exp_bits, dtype=np.uint8)
        differs = stream != e
        first = differs.argmax(axis=1)
        hit = differs.any(axis=1)
        magnitude |= (hit & (e[first] == 1)).astype(np.int64) << k
    sign = bits[:, params.sign_index].astype(np.int64)
    weights = 1 << np.arange(params.n_bits, dtype=np.int64)
    u = bits[:, params.uniform_slice].astype(np.int64) @ weights
    noisy = params.l + np.mod(v + (2 * sign - 1) * magnitude - params.l, params.domain_size)
    unif = params.l + np.mod(u, params.domain_size)
    return np.where((magnitude == 0) & (sign == 0), unif, noisy)


# -- accounting --------------------------------------------------------------

@dataclass(frozen=True)
class DeltaLedger:
    """Itemised slack of the noise mechanism; every entry is an upper bound."""

    base: Fraction
    tail: Fraction
    mixing: Fraction
    truncation: Fraction
    tail_log2: Optional[int] = None  # uncapped exponent bound, tail <= 2**tail_log2

    @property
    def total(self) -> Fraction:
        return self.base + self.tail + self.mixing + self.truncation

    def to_json(self) -> dict:
        out = {k: fraction_json(getattr(self, k)) for k in ("base", "tail", "mixing", "truncation")}
        out["total"] = fraction_json(self.total)
        if self.tail_log2 is not None:
            out["tail"]["log2_bound"] = self.tail_log2
        return out


def fraction_json(x: Fraction) -> dict:
    """Exact text when it is short, always a float and a log2 magnitude."""
    out: dict = {"approx": float(x)}
    if max(x.numerator.bit_length(), x.denominator.bit_length()) <= 4096:
        out["exact"] = f"{x.numerator}/{x.denominator}"
    if x > 0:
        out["log2"] = (x.numerator.bit_length() - x.denominator.bit_length())
    return out


def zero_magnitude_probability(table: BiasTable) -> Fraction:
    prob = Fraction(1)
    for q in table.q:
        prob *= 1 - q
    return prob


def delta_ledger(params: NoiseParams) -> DeltaLedger:
    table = bias_table(params)
    base = Fraction(params.n_bits, 1 << params.d)
    tail, tail_log2 = _tail_bound(params.epsilon * (1 << params.d) / params.delta)
    mixing = zero_magnitude_probability(table) / 2 / params.domain_size
    truncation = sum((p.hi - q for p, q in zip(table.p, table.q)), Fraction(0))
    truncation = _round_up(truncation, 64) if truncation > 0 else truncation
    return DeltaLedger(base, tail, mixing, truncation, tail_log2)


def _tail_bound(y: Fraction) -> tuple[Fraction, Optional[int]]:
    """Upper bound on 2 * exp(-y) without ever forming exp(y) for large y."""
    if y <= 64:
        return _round_up(2 / exp_interval(y, 64).lo, 64), None
    # exp(-y) = 2**(-y / ln 2) <= 2**(-floor(y / LN2_UPPER))
    m = int(y / LN2_UPPER) - 1
    return Fraction(1, 1 << min(m, TAIL_CAP_BITS)), -m


# -- estimators and extensions ----------------------------------------------

def rr_debias(yes_count: int, n: int) -> float:
    """Unbiased share of true Yes answers given Pr[report Yes] = pi/2 + 1/4."""
    if n < 1:
        raise ValueError("n must be >= 1")
    est = 2 * Fraction(yes_count, n) - Fraction(1, 2)
    return float(min(max(est, Fraction(0)), Fraction(1)))


def biased_coin_threshold(r: Sequence[int], bias: Fraction, d: int) -> int:
    """1 iff the first d bits, read as a binary fraction, fall below the bias."""
    if len(r) < d:
        raise ValueError(f"need {d} bits, got {len(r)}")
    bias = Fraction(bias)
    if not 0 < bias < 1:
        raise ValueError("bias must lie in (0, 1)")
    x = 0
    for b in r[:d]:
        x = (x << 1) | b
    return 1 if x < _floor_scaled(bias, d) else 0
