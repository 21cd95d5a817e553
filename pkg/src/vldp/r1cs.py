"""Rank-1 constraint systems with a separate witness program.

Constraints are emitted as ``<a, w> * <b, w> = <c, w>`` over linear
combinations of signals. Every signal is assigned exactly once by a witness
rule (input, linear, product or hint); the rules run in definition order, so a
public output may be allocated early and assigned at the end of the build.

Checking and witness generation are compiled to straight-line Python the
first time they are needed, which keeps a full check of a ~10k constraint
system in the low milliseconds.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Union

from gmpy2 import mpz

from .field import P, to_hex


class R1CSError(Exception):
    pass


class UnknownSignal(R1CSError):
    pass


class LengthMismatch(R1CSError):
    pass


class AssignmentError(R1CSError):
    """A signal was assigned twice, never assigned, or an input is missing."""


class Visibility(enum.Enum):
    PUBLIC = "public"
    PRIVATE = "private"


@dataclass(frozen=True)
class Signal:
    index: int
    visibility: Visibility = Visibility.PRIVATE

    def lc(self) -> "LinearCombination":
        return LinearCombination({self.index: 1})

    def __add__(self, other):
        return self.lc() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self.lc() - other

    def __rsub__(self, other):
        return LinearCombination.of(other) - self.lc()

    def __mul__(self, k: int):
        return self.lc() * k

    __rmul__ = __mul__

    def __neg__(self):
        return -self.lc()


ONE = Signal(0, Visibility.PUBLIC)


class LinearCombination:
    """Sparse sum of ``coeff * signal``; index 0 carries constants."""

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Mapping[int, int]] = None):
        self.terms: dict[int, int] = {}
        for idx, c in (terms or {}).items():
            c %= P
            if c:
                self.terms[idx] = c

    @classmethod
    def of(cls, x: "LCLike") -> "LinearCombination":
        if isinstance(x, LinearCombination):
            return x
        if isinstance(x, Signal):
            return x.lc()
        if isinstance(x, int):
            return cls({0: x})
        raise TypeError(f"cannot build a linear combination from {type(x).__name__}")

    def __add__(self, other: "LCLike") -> "LinearCombination":
        other = LinearCombination.of(other)
        out = dict(self.terms)
        for idx, c in other.terms.items():
            out[idx] = (out.get(idx, 0) + c) % P
        return LinearCombination(out)

    __radd__ = __add__

    def __neg__(self) -> "LinearCombination":
        return LinearCombination({i: -c for i, c in self.terms.items()})

    def __sub__(self, other: "LCLike") -> "LinearCombination":
        return self + (-LinearCombination.of(other))

    def __rsub__(self, other: "LCLike") -> "LinearCombination":
        return LinearCombination.of(other) - self

    def __mul__(self, k: int) -> "LinearCombination":
        if not isinstance(k, int):
            return NotImplemented
        return LinearCombination({i: c * k for i, c in self.terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, LinearCombination) and self.terms == other.terms

    def __hash__(self):
        return hash(tuple(sorted(self.terms.items())))

    def __repr__(self) -> str:
        return f"LC({self.terms})"

    def evaluate(self, w) -> int:
        return sum(c * w[i] for i, c in self.terms.items()) % P

    def is_constant(self) -> bool:
        return all(i == 0 for i in self.terms)

    @property
    def constant(self) -> int:
        return self.terms.get(0, 0)

    def signals(self) -> Iterable[int]:
        return self.terms.keys()

    def to_json(self) -> list:
        return [[i, to_hex(c)] for i, c in sorted(self.terms.items())]


LCLike = Union[LinearCombination, Signal, int]


@dataclass(frozen=True)
class Constraint:
    a: LinearCombination
    b: LinearCombination
    c: LinearCombination

    def holds(self, w) -> bool:
        return (self.a.evaluate(w) * self.b.evaluate(w) - self.c.evaluate(w)) % P == 0


@dataclass
class Witness:
    values: list[int]

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, s: Union[Signal, int]) -> int:
        return self.values[s.index if isinstance(s, Signal) else s]

    def copy(self) -> "Witness":
        return Witness(list(self.values))


@dataclass(frozen=True)
class SatisfactionReport:
    satisfied: bool
    failed_index: Optional[int] = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.satisfied


# witness rules
_INPUT, _LIN, _MUL, _HINT = "input", "lin", "mul", "hint"


@dataclass
class ConstraintSystem:
    n_signals: int = 1
    constraints: list[Constraint] = field(default_factory=list)
    public: list[int] = field(default_factory=list)
    labels: dict[int, str] = field(default_factory=dict)
    _rules: dict[int, tuple] = field(default_factory=dict, repr=False)
    _order: list[int] = field(default_factory=list, repr=False)
    _inputs: dict[str, int] = field(default_factory=dict, repr=False)
    _frozen: bool = field(default=False, repr=False)
    _checker: Optional[Callable] = field(default=None, repr=False)
    _program: Optional[Callable] = field(default=None, repr=False)
    _hints: list[Callable] = field(default_factory=list, repr=False)

    # -- construction ------------------------------------------------------

    def _mutable(self):
        if self._frozen:
            raise R1CSError("constraint system is frozen")
        self._checker = None
        self._program = None

    def alloc_signal(self, visibility: Visibility = Visibility.PRIVATE,
                     label: Optional[str] = None) -> Signal:
        self._mutable()
        s = Signal(self.n_signals, visibility)
        self.n_signals += 1
        if visibility is Visibility.PUBLIC:
            self.public.append(s.index)
        if label:
            self.labels[s.index] = label
        return s

    def _check_known(self, lc: LinearCombination):
        for idx in lc.signals():
            if not 0 <= idx < self.n_signals:
                raise UnknownSignal(f"signal {idx} has not been allocated")

    def enforce(self, a: LCLike, b: LCLike, c: LCLike) -> None:
        self._mutable()
        a, b, c = (LinearCombination.of(x) for x in (a, b, c))
        for lc in (a, b, c):
            self._check_known(lc)
        self.constraints.append(Constraint(a, b, c))

    def enforce_equal(self, x: LCLike, y: LCLike) -> None:
        self.enforce(LinearCombination.of(x) - y, 1, 0)

    def _assign(self, s: Signal, rule: tuple) -> None:
        self._mutable()
        if s.index in self._rules or s.index == 0:
            raise AssignmentError(f"signal {s.index} assigned twice")
        self._rules[s.index] = rule
        self._order.append(s.index)

    def input(self, name: str, visibility: Visibility = Visibility.PRIVATE) -> Signal:
        if name in self._inputs:
            raise AssignmentError(f"duplicate input name {name!r}")
        s = self.alloc_signal(visibility, name)
        self._inputs[name] = s.index
        self._assign(s, (_INPUT, name))
        return s

    def assign_lc(self, s: Signal, lc: LCLike) -> None:
        lc = LinearCombination.of(lc)
        self._check_known(lc)
        self._assign(s, (_LIN, lc))

    def assign_hint(self, s: Signal, fn: Callable[[list], int]) -> None:
        self._assign(s, (_HINT, fn))

    def mul(self, a: LCLike, b: LCLike, visibility=Visibility.PRIVATE,
            label: Optional[str] = None) -> Signal:
        """Allocate ``out`` constrained to ``a * b``."""
        a, b = LinearCombination.of(a), LinearCombination.of(b)
        out = self.alloc_signal(visibility, label)
        self.enforce(a, b, out)
        self._assign(out, (_MUL, a, b))
        return out

    def lin(self, lc: LCLike, visibility=Visibility.PRIVATE,
            label: Optional[str] = None) -> Signal:
        """Materialise a linear combination as its own signal."""
        lc = LinearCombination.of(lc)
        out = self.alloc_signal(visibility, label)
        self.enforce(lc, 1, out)
        self._assign(out, (_LIN, lc))
        return out

    def hint(self, fn: Callable[[list], int], visibility=Visibility.PRIVATE,
             label: Optional[str] = None) -> Signal:
        """Allocate a signal computed by ``fn(w)``; the caller constrains it."""
        out = self.alloc_signal(visibility, label)
        self._assign(out, (_HINT, fn))
        return out

    def freeze(self) -> "ConstraintSystem":
        missing = [i for i in range(1, self.n_signals) if i not in self._rules]
        if missing:
            raise AssignmentError(f"signals without a witness rule: {missing[:10]}")
        self._frozen = True
        return self

    @property
    def input_names(self) -> dict[str, int]:
        return dict(self._inputs)

    def __len__(self) -> int:
        return len(self.constraints)

    # -- compilation -------------------------------------------------------

    def _compile_checker(self) -> Callable:
        em = _Emitter()
        em.lines += ["def check(w):", "    if w[0] != 1: return -2", "    w = list(map(Z, w))"]
        for i, con in enumerate(self.constraints):
            lhs = em.product(con.a, con.b)
            rhs = em.ref(con.c)
            em.lines.append(f"    if ({lhs}-{rhs}) % P: return {i}")
        em.lines.append("    return -1")
        return em.build("check")

    def _compile_program(self) -> Callable:
        em = _Emitter()
        hints: list = []
        em.lines.append("def run(w, inp, H):")
        for idx in self._order:
            rule = self._rules[idx]
            kind = rule[0]
            if kind == _INPUT:
                em.lines.append(f"    w[{idx}] = int(inp[{rule[1]!r}]) % P")
            elif kind == _LIN:
                em.lines.append(f"    w[{idx}] = {em.ref(rule[1])} % P")
            elif kind == _MUL:
                em.lines.append(f"    w[{idx}] = {em.product(rule[1], rule[2])} % P")
            else:
                hints.append(rule[1])
                em.lines.append(f"    w[{idx}] = int(H[{len(hints) - 1}](w)) % P")
        em.lines.append("    return w")
        self._hints = hints
        return em.build("run")

    # -- evaluation --------------------------------------------------------

    def generate_witness(self, inputs: Mapping[str, int]) -> Witness:
        missing = set(self._inputs) - set(inputs)
        if missing:
            raise AssignmentError(f"missing inputs: {sorted(missing)}")
        if self._program is None:
            self._program = self._compile_program()
        w = [0] * self.n_signals
        w[0] = 1
        self._program(w, inputs, self._hints)
        return Witness([int(x) for x in w])

    def is_satisfied(self, w: Union[Witness, list]) -> SatisfactionReport:
        values = w.values if isinstance(w, Witness) else w
        if len(values) != self.n_signals:
            raise LengthMismatch(
                f"witness has {len(values)} entries, system has {self.n_signals} signals")
        for i, x in enumerate(values):
            if type(x) is not int or not 0 <= x < P:
                return SatisfactionReport(False, None, f"signal {i} is not a canonical field element")
        if self._checker is None:
            self._checker = self._compile_checker()
        res = self._checker(values)
        if res == -1:
            return SatisfactionReport(True)
        if res == -2:
            return SatisfactionReport(False, None, "constant signal is not 1")
        return SatisfactionReport(False, res, f"constraint {res} violated")

    def failing_constraints(self, w: Union[Witness, list]) -> list[int]:
        """Interpreted check of every constraint (slow, for debugging)."""
        values = w.values if isinstance(w, Witness) else w
        return [i for i, c in enumerate(self.constraints) if not c.holds(values)]

    # -- export ------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "field_modulus": format(P, "x"),
            "n_signals": self.n_signals,
            "public": list(self.public),
            "constraints": [[c.a.to_json(), c.b.to_json(), c.c.to_json()]
                            for c in self.constraints],
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def _table_lc(terms, w) -> int:
    return sum(c * w[i] for i, c in terms)


class _Emitter:
    """Straight-line code generator with common-subexpression caching of
    linear combinations (each distinct combination is evaluated once)."""

    def __init__(self):
        self.lines: list[str] = []
        self.tables: list = []
        self.cache: dict[LinearCombination, str] = {}

    def _raw(self, lc: LinearCombination) -> str:
        if len(lc.terms) > 32:
            self.tables.append(tuple(sorted(lc.terms.items())))
            return f"_lc(T[{len(self.tables) - 1}], w)"
        parts = []
        for idx, c in sorted(lc.terms.items()):
            if c > P // 2:
                c -= P
            ref = "1" if idx == 0 else f"w[{idx}]"
            if c == 1:
                parts.append(ref)
            elif c == -1:
                parts.append(f"-{ref}")
            else:
                parts.append(f"{c}*{ref}")
        return "(" + "+".join(parts).replace("+-", "-") + ")"

    def ref(self, lc: LinearCombination) -> str:
        terms = lc.terms
        if not terms:
            return "0"
        if len(terms) == 1:
            (idx, c), = terms.items()
            if idx == 0:
                return str(c)
            if c == 1:
                return f"w[{idx}]"
        name = self.cache.get(lc)
        if name is None:
            name = f"t{len(self.cache)}"
            self.cache[lc] = name
            self.lines.append(f"    {name} = {self._raw(lc)} % P")
        return name

    def product(self, a: LinearCombination, b: LinearCombination) -> str:
        if b.is_constant():
            a, b = b, a
        if a.is_constant():
            k = a.constant
            if k == 0:
                return "0"
            return self.ref(b) if k == 1 else f"{k}*{self.ref(b)}"
        return f"{self.ref(a)}*{self.ref(b)}"

    def build(self, name: str) -> Callable:
        ns = {"P": mpz(P), "Z": mpz, "T": self.tables, "_lc": _table_lc}
        exec(compile("\n".join(self.lines), f"<r1cs-{name}>", "exec"), ns)
        return ns[name]
