"""Constraint-system versions of the two mechanisms and of credential
binding, with witness generators that reproduce the native mechanisms bit
for bit.

Public signals are laid out as ``[challenge, pk, root, params_commitment,
out]``; mechanism-only circuits (no credential) omit ``root``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Optional, Sequence

from .credential import BINDING_ATTRIBUTE, InclusionPath, attribute_tag
from .field import P, tag
from .gadgets import (
    MODULO_BIT_WIDTH,
    gadget_bits2num,
    gadget_is_equal,
    gadget_is_zero,
    gadget_modulo,
    gadget_num2bits,
)
from .mechanisms import BiasTable, NoiseParams, bias_table
from .oracle import hash_gadget, hash_ints, squeeze_count, unif_rand_gadget
from .r1cs import ConstraintSystem, LCLike, LinearCombination, Signal, Visibility, Witness

PUBLIC_ORDER = ("challenge", "pk", "root", "params_commitment", "out")
MAX_SQUEEZES = 8


class CircuitError(Exception):
    pass


class ParamsTooLarge(CircuitError):
    pass


class InconsistentInputs(CircuitError):
    pass


def params_commitment(mechanism: str, params: Optional[NoiseParams] = None,
                      attribute: Optional[str] = None) -> int:
    attr = attribute_tag(attribute) if attribute is not None else 0
    if mechanism == "rr":
        return hash_ints([tag("rr"), attr])
    if mechanism == "exponential":
        if params is None:
            raise CircuitError("exponential mechanism needs NoiseParams")
        eps = params.epsilon
        return hash_ints([tag("exponential"), attr, eps.numerator, eps.denominator,
                          params.l, params.u, params.d])
    raise CircuitError(f"unknown mechanism {mechanism!r}")


@dataclass
class CredentialFragment:
    depth: int
    attribute: str
    root: Signal
    value_leaf: Signal
    binding_leaf: Signal


@dataclass
class CircuitBundle:
    system: ConstraintSystem
    public: dict[str, Signal]
    output: Signal
    mechanism: str
    params: Optional[NoiseParams]
    depth: Optional[int]
    attribute: Optional[str]
    commitment: int
    credential: Optional[CredentialFragment] = field(default=None, repr=False)

    @property
    def public_names(self) -> list[str]:
        return [n for n in PUBLIC_ORDER if n in self.public]

    def public_values(self, w: Witness) -> dict[str, int]:
        return {n: w[self.public[n]] for n in self.public_names}

    def output_value(self, w: Witness) -> int:
        v = w[self.output]
        # outputs live in [l, u); map back from the field for negative l
        return v - P if v > P // 2 else v

    def constraint_count(self) -> int:
        return len(self.system)


# -- fragments ------------------------------------------------------------------

def _merkle_up(cs: ConstraintSystem, leaf: Signal, prefix: str, depth: int,
               fixed_directions: Optional[Sequence[int]] = None) -> Signal:
    cur = LinearCombination.of(leaf)
    top = leaf
    for i in range(depth):
        sib = cs.input(f"{prefix}_sib_{i}")
        if fixed_directions is None:
            d = cs.input(f"{prefix}_dir_{i}")
            cs.enforce(d, d - 1, 0)
            # d = 1 swaps: left = cur + d*(sib - cur), right = sib - d*(sib - cur)
            swap = cs.mul(d, sib - cur)
            left, right = cur + swap, sib - swap
        elif fixed_directions[i]:
            left, right = sib.lc(), cur
        else:
            left, right = cur, sib.lc()
        top = hash_gadget(cs, [left, right])
        cur = top.lc()
    return top


def build_credential_binding(cs: ConstraintSystem, depth: int, value: Signal, pk: Signal,
                             root: Signal, attribute: str) -> CredentialFragment:
    """Tie ``value`` and ``pk`` to leaves of the tree committed in ``root``.

    The value leaf may sit anywhere (private direction bits); the binding leaf
    is always leaf 0, so its path directions are constants.
    """
    if depth < 1:
        raise CircuitError("depth must be >= 1")
    value_salt = cs.input("value_salt")
    value_leaf = hash_gadget(cs, [attribute_tag(attribute), value, value_salt])
    top = _merkle_up(cs, value_leaf, "value", depth)
    cs.enforce_equal(top, root)
    binding_salt = cs.input("binding_salt")
    binding_leaf = hash_gadget(cs, [attribute_tag(BINDING_ATTRIBUTE), pk, binding_salt])
    top = _merkle_up(cs, binding_leaf, "binding", depth, fixed_directions=[0] * depth)
    cs.enforce_equal(top, root)
    return CredentialFragment(depth, attribute, root, value_leaf, binding_leaf)


def _publics(cs: ConstraintSystem, with_root: bool) -> dict[str, Signal]:
    pub = {"challenge": cs.input("challenge", Visibility.PUBLIC),
           "pk": cs.input("pk", Visibility.PUBLIC)}
    if with_root:
        pub["root"] = cs.input("root", Visibility.PUBLIC)
    pub["params_commitment"] = cs.input("params_commitment", Visibility.PUBLIC)
    pub["out"] = cs.alloc_signal(Visibility.PUBLIC, "out")
    return pub


# -- mechanisms -------------------------------------------------------------

@lru_cache(maxsize=16)
def build_rr_circuit(depth: Optional[int] = None, attribute: Optional[str] = None) -> CircuitBundle:
    cs = ConstraintSystem()
    pub = _publics(cs, depth is not None)
    commitment = params_commitment("rr", None, attribute)
    cs.enforce_equal(pub["params_commitment"], commitment)
    sk = cs.input("sk")
    v = cs.input("v")
    cs.enforce(v, v - 1, 0)
    bits = unif_rand_gadget(cs, sk, pub["challenge"], pub["pk"], 1)
    rand = cs.mul(bits[0], bits[1])
    kept = cs.mul(1 - bits[0], v)
    out = pub["out"]
    cs.enforce(kept + rand, 1, out)
    cs.assign_lc(out, kept + rand)
    frag = None
    if depth is not None:
        frag = build_credential_binding(cs, depth, v, pub["pk"], pub["root"], attribute or "")
    cs.freeze()
    return CircuitBundle(cs, pub, out, "rr", None, depth, attribute, commitment, frag)


def _biased_bit_chain(cs: ConstraintSystem, prob: Sequence[int],
                      stream: Sequence[Signal]) -> Signal:
    """First-mismatch selection: hit stays 1 while bits agree, eval3 picks
    the expansion bit at the first disagreement, 0 if none."""
    hit: LCLike = 1
    eval3: LCLike = 0
    for p_bit, r in zip(prob, stream):
        eq = gadget_is_equal(cs, p_bit, r)
        nxt_hit = cs.mul(hit, eq)
        eval1 = cs.mul(hit, 1 - eq.lc())
        eval2 = cs.mul(eval1, p_bit)
        eval3 = cs.lin(LinearCombination.of(eval3) + eval2)
        hit = nxt_hit
    return cs.lin(eval3)


def noise_core(cs: ConstraintSystem, params: NoiseParams, table: BiasTable, v: Signal,
               rand: Sequence[Signal]) -> Signal:
    """Noise mechanism over already-derived random bit signals; returns ``out``
    as a linear signal (not yet tied to the public output)."""
    nb, d = params.n_bits, params.d
    n_dom = params.domain_size
    noise_bits = [
        _biased_bit_chain(cs, table.expansions[k], rand[k * d:(k + 1) * d])
        for k in range(nb)
    ]
    abs_noise = gadget_bits2num(cs, noise_bits)
    sign = rand[params.sign_index]
    v_off = v - params.l
    positive = cs.mul(sign, v_off + abs_noise)
    negative = cs.mul(1 - sign.lc(), v_off - abs_noise)
    noised = negative + positive
    unif_num = gadget_bits2num(cs, rand[params.uniform_slice])
    is_zero = gadget_is_zero(cs, abs_noise)
    is_unif = cs.mul(is_zero, 1 - sign.lc())
    unif = cs.mul(is_unif, unif_num)
    kept = cs.mul(1 - is_unif.lc(), noised)
    result = kept + unif
    # shift by a multiple of N so the reduced value is a non-negative integer
    k_off = -(-(1 << nb) // n_dom)
    shifted = result + k_off * n_dom
    shifted_max = n_dom + (1 << nb) - 1 + k_off * n_dom
    width = max(MODULO_BIT_WIDTH, shifted_max.bit_length())
    if width > 120:
        raise ParamsTooLarge("value range too wide for the modulo gadget")
    rem = gadget_modulo(cs, shifted, n_dom, width)
    return rem


@lru_cache(maxsize=16)
def build_noise_circuit(params: NoiseParams, table: Optional[BiasTable] = None,
                        depth: Optional[int] = None,
                        attribute: Optional[str] = None) -> CircuitBundle:
    """Noise mechanism with verifiable randomness; the bias expansions are
    baked in as constants derived from ``params``."""
    table = table or bias_table(params)
    if table.params != params:
        raise CircuitError("bias table was computed for different parameters")
    n_sq = squeeze_count(params.bits_required)
    if n_sq > MAX_SQUEEZES:
        raise ParamsTooLarge(f"{params.bits_required} random bits need {n_sq} squeezes "
                             f"(limit {MAX_SQUEEZES})")
    cs = ConstraintSystem()
    pub = _publics(cs, depth is not None)
    commitment = params_commitment("exponential", params, attribute)
    cs.enforce_equal(pub["params_commitment"], commitment)
    sk = cs.input("sk")
    v = cs.input("v")
    span = params.domain_size.bit_length()
    gadget_num2bits(cs, v - params.l, span)
    gadget_num2bits(cs, params.u - v.lc(), span)
    rand = unif_rand_gadget(cs, sk, pub["challenge"], pub["pk"], n_sq)
    rem = noise_core(cs, params, table, v, rand)
    out = pub["out"]
    cs.enforce(rem + params.l, 1, out)
    cs.assign_lc(out, rem + params.l)
    frag = None
    if depth is not None:
        frag = build_credential_binding(cs, depth, v, pub["pk"], pub["root"], attribute or "")
    cs.freeze()
    return CircuitBundle(cs, pub, out, "exponential", params, depth, attribute, commitment, frag)


def credential_inputs(value_salt: int, value_path: InclusionPath, binding_salt: int,
                      binding_path: InclusionPath) -> dict[str, int]:
    """Flatten salts and inclusion paths into named private inputs."""
    inputs = {"value_salt": value_salt, "binding_salt": binding_salt}
    for i, (sib, d) in enumerate(zip(value_path.siblings, value_path.directions)):
        inputs[f"value_sib_{i}"] = sib
        inputs[f"value_dir_{i}"] = d
    for i, sib in enumerate(binding_path.siblings):
        inputs[f"binding_sib_{i}"] = sib
    return inputs


def generate_witness(bundle: CircuitBundle, secret: Mapping[str, int],
                     public: Mapping[str, int], check: bool = True) -> Witness:
    """Run the witness program; with ``check`` insist the result satisfies the system."""
    inputs = dict(secret)
    for name in bundle.public_names:
        if name == "out":
            continue
        if name == "params_commitment":
            inputs[name] = public.get(name, bundle.commitment)
        else:
            if name not in public:
                raise InconsistentInputs(f"missing public input {name!r}")
            inputs[name] = public[name]
    expected = set(bundle.system.input_names)
    if set(inputs) != expected:
        missing = expected - set(inputs)
        extra = set(inputs) - expected
        raise InconsistentInputs(f"input mismatch: missing {sorted(missing)}, "
                                 f"unexpected {sorted(extra)}")
    w = bundle.system.generate_witness(inputs)
    if not check:
        return w
    report = bundle.system.is_satisfied(w)
    if not report:
        raise InconsistentInputs(f"inputs do not satisfy the circuit ({report.reason})")
    return w
