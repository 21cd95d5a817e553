"""Sponge hash over the field, hash-based key binding and verifiable
uniform randomness, each with a native evaluator and a circuit gadget that
agree bit for bit.

The permutation is a plain substitution-permutation network: x^5 S-box on all
three lanes in every round, a fixed Cauchy mixing matrix and round constants
expanded from a public seed with SHA-256. It is a test-grade random oracle,
not a vetted hash.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from gmpy2 import mpz

from .field import FieldElement, P, inv_int, tag, to_bits
from .gadgets import gadget_num2bits
from .r1cs import ConstraintSystem, LCLike, LinearCombination, Signal

WIDTH = 3
RATE = 2
ROUNDS = 64
SEED = "vldp/sponge/round-constants/v1"
# Bits kept per squeeze. A hash output is uniform on [0, P) and P is only about
# 0.76 * 2^254, so the low k bits sit within 2^k / P of uniform in statistical
# distance. k = 253 would leave the top bits visibly skewed (bit 252 is 1 with
# probability 1 - 2^253/P, about 0.34); k = 192 keeps the whole block within 2^-61.
SQUEEZE_BITS = 192

TAG_BINDING = tag("binding")
TAG_SIGN = tag("sign")


@dataclass(frozen=True)
class SpongeParams:
    width: int
    rounds: int
    round_constants: tuple[tuple[int, ...], ...]
    mds: tuple[tuple[int, ...], ...]


@lru_cache(maxsize=None)
def sponge_params() -> SpongeParams:
    rc = []
    for r in range(ROUNDS):
        row = []
        for i in range(WIDTH):
            digest = hashlib.sha256(f"{SEED}/{r}/{i}".encode()).digest()
            row.append(int.from_bytes(digest, "big") % P)
        rc.append(tuple(row))
    xs, ys = range(WIDTH), range(WIDTH, 2 * WIDTH)
    mds = tuple(tuple(inv_int(x + y) for y in ys) for x in xs)
    return SpongeParams(WIDTH, ROUNDS, tuple(rc), mds)


@lru_cache(maxsize=1)
def _mpz_params():
    prm = sponge_params()
    rc = tuple(tuple(mpz(c) for c in row) for row in prm.round_constants)
    return rc, tuple(tuple(mpz(x) for x in row) for row in prm.mds), mpz(P)


def permute(state: Sequence[int]) -> list[int]:
    rc, m, pz = _mpz_params()  # gmpy2 bignums, same arithmetic as plain ints
    (m00, m01, m02), (m10, m11, m12), (m20, m21, m22) = m
    s0, s1, s2 = (mpz(x) for x in state)
    for c0, c1, c2 in rc:
        # x^5 by two squarings; cheaper than pow() for a fixed tiny exponent
        s0 += c0
        t = s0 * s0 % pz
        s0 = s0 * t * t % pz
        s1 += c1
        t = s1 * s1 % pz
        s1 = s1 * t * t % pz
        s2 += c2
        t = s2 * s2 % pz
        s2 = s2 * t * t % pz
        s0, s1, s2 = (
            (m00 * s0 + m01 * s1 + m02 * s2) % pz,
            (m10 * s0 + m11 * s1 + m12 * s2) % pz,
            (m20 * s0 + m21 * s1 + m22 * s2) % pz,
        )
    return [int(s0), int(s1), int(s2)]


def _chunks(values: list, n: int):
    if not values:
        yield [0] * n
        return
    for i in range(0, len(values), n):
        chunk = values[i:i + n]
        yield chunk + [0] * (n - len(chunk))


def hash_ints(inputs: Sequence[int]) -> int:
    """Sponge hash of raw ints; the capacity lane is seeded with the length."""
    vals = [int(x) % P for x in inputs]
    state = [0, 0, len(vals)]
    for a, b in _chunks(vals, RATE):
        state = permute([(state[0] + a) % P, (state[1] + b) % P, state[2]])
    return state[0]


def hash(inputs: Sequence) -> FieldElement:  # noqa: A001 - mirrors the domain name
    return FieldElement(hash_ints([int(x) for x in inputs]))


# -- circuit form -----------------------------------------------------------

def permute_gadget(cs: ConstraintSystem, state: Sequence[LCLike]) -> list[LinearCombination]:
    prm = sponge_params()
    m = prm.mds
    lanes = [LinearCombination.of(x) for x in state]
    for rc in prm.round_constants:
        boxed = []
        for lane, c in zip(lanes, rc):
            x = lane + c
            x2 = cs.mul(x, x)
            x4 = cs.mul(x2, x2)
            boxed.append(cs.mul(x4, x))
        lanes = [
            boxed[0] * m[i][0] + boxed[1] * m[i][1] + boxed[2] * m[i][2]
            for i in range(WIDTH)
        ]
    return lanes


def hash_gadget(cs: ConstraintSystem, inputs: Sequence[LCLike]) -> Signal:
    vals = [LinearCombination.of(x) for x in inputs]
    state = [LinearCombination(), LinearCombination(), LinearCombination.of(len(vals))]
    zero = LinearCombination()
    if vals:
        chunks = [vals[i:i + RATE] + [zero] * (RATE - len(vals[i:i + RATE]))
                  for i in range(0, len(vals), RATE)]
    else:
        chunks = [[zero] * RATE]
    for a, b in chunks:
        state = permute_gadget(cs, [state[0] + a, state[1] + b, state[2]])
    return cs.lin(state[0])


# -- binding and randomness ------------------------------------------------

@dataclass(frozen=True)
class BindingKeyPair:
    sk: FieldElement
    pk: FieldElement

    @classmethod
    def from_secret(cls, sk) -> "BindingKeyPair":
        sk = FieldElement(int(sk))
        return cls(sk, binding_pk(sk))

    @classmethod
    def generate(cls, rng=None) -> "BindingKeyPair":
        sk = rng.randrange(P) if rng is not None else secrets.randbelow(P)
        return cls.from_secret(sk)


@dataclass(frozen=True)
class Challenge:
    value: FieldElement

    def __int__(self) -> int:
        return int(self.value)


def binding_pk(sk) -> FieldElement:
    return FieldElement(hash_ints([int(sk), TAG_BINDING]))


def bind_sign(sk, challenge) -> FieldElement:
    """Deterministic stand-in for signing the challenge: hash(sk, challenge, "sign")."""
    return FieldElement(hash_ints([int(sk), int(challenge), TAG_SIGN]))


@dataclass(frozen=True)
class BitArray:
    bits: tuple[int, ...]
    pk: FieldElement
    challenge: FieldElement
    squeezes: range

    def __len__(self) -> int:
        return len(self.bits)

    def __getitem__(self, i):
        return self.bits[i]

    def __iter__(self):
        return iter(self.bits)


def squeeze_count(n_bits: int) -> int:
    return -(-n_bits // SQUEEZE_BITS)


def squeeze_bits(s: int, i: int) -> list[int]:
    h = hash_ints([int(s), i])
    return to_bits(h & ((1 << SQUEEZE_BITS) - 1), SQUEEZE_BITS)


def verifiable_unif_rand(sk, challenge, count: int) -> BitArray:
    """``count`` bits jointly fixed by the prover key and the verifier challenge."""
    if count < 1:
        raise ValueError("count must be >= 1")
    s = bind_sign(sk, challenge)
    n = squeeze_count(count)
    bits: list[int] = []
    for i in range(n):
        bits.extend(squeeze_bits(int(s), i))
    return BitArray(tuple(bits[:count]), binding_pk(sk), FieldElement(int(challenge)), range(n))


def unif_rand_gadget(cs: ConstraintSystem, sk: Signal, challenge: Signal, pk: Signal,
                     n_squeezes: int) -> list[Signal]:
    """Enforce pk = hash(sk, "binding") and return the squeezed bit signals."""
    computed_pk = hash_gadget(cs, [sk, TAG_BINDING])
    cs.enforce_equal(computed_pk, pk)
    s = hash_gadget(cs, [sk, challenge, TAG_SIGN])
    bits: list[Signal] = []
    for i in range(n_squeezes):
        h = hash_gadget(cs, [s, i])
        bits.extend(gadget_num2bits(cs, h, 254)[:SQUEEZE_BITS])
    return bits
