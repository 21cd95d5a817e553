"""Salted Merkle-tree attestations with holder binding.

Leaf 0 always commits to the holder's binding public key; attributes fill
the following leaves. The issuer "signature" is a keyed hash of the root,
checked by the surveyor against a registry of trusted issuer keys.
"""

from __future__ import annotations

import hashlib
import json
import secrets
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Optional, Sequence

from .field import P, from_hex, tag, to_hex
from .oracle import hash_ints

DEFAULT_DEPTH = 4
BINDING_ATTRIBUTE = "__binding_pk__"
BINDING_INDEX = 0
EMPTY_LEAF = 0
TAG_ISSUER = tag("issuer")


class CredentialError(ValueError):
    pass


class CapacityExceeded(CredentialError):
    pass


class UnknownAttribute(CredentialError, KeyError):
    pass


def attribute_tag(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode()).digest(), "big") % P


def leaf_hash(name: str, value: int, salt: int) -> int:
    return hash_ints([attribute_tag(name), value, salt])


@lru_cache(maxsize=4096)  # empty subtrees recur in every sparse tree
def node_hash(left: int, right: int) -> int:
    return hash_ints([left, right])


@dataclass(frozen=True)
class Attribute:
    name: str
    value: int
    salt: int


@dataclass(frozen=True)
class InclusionPath:
    leaf_index: int
    siblings: tuple[int, ...]
    directions: tuple[int, ...]  # 1 where the running node is a right child

    def to_json(self) -> dict:
        return {
            "leaf_index": self.leaf_index,
            "siblings": [to_hex(s) for s in self.siblings],
            "directions": list(self.directions),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "InclusionPath":
        return cls(int(obj["leaf_index"]),
                   tuple(int(from_hex(s)) for s in obj["siblings"]),
                   tuple(int(b) for b in obj["directions"]))


@dataclass(frozen=True)
class IssuerKey:
    issuer_id: str
    secret: int

    @classmethod
    def generate(cls, issuer_id: str) -> "IssuerKey":
        return cls(issuer_id, secrets.randbelow(P))

    def sign(self, root: int) -> int:
        return hash_ints([self.secret, root, TAG_ISSUER])


class IssuerRegistry:
    """Surveyor-side map of trusted issuer ids to their verification keys."""

    def __init__(self, keys: Mapping[str, int] | None = None):
        self._keys = dict(keys or {})

    def add(self, key: IssuerKey) -> None:
        self._keys[key.issuer_id] = key.secret

    def __contains__(self, issuer_id: str) -> bool:
        return issuer_id in self._keys

    def verify(self, issuer_id: str, root: int, signature: int) -> bool:
        secret = self._keys.get(issuer_id)
        if secret is None:
            return False
        return hash_ints([secret, root, TAG_ISSUER]) == signature

    def to_json(self) -> dict:
        return {k: to_hex(v) for k, v in sorted(self._keys.items())}

    @classmethod
    def from_json(cls, obj: Mapping[str, str]) -> "IssuerRegistry":
        return cls({k: int(from_hex(v)) for k, v in obj.items()})


def _tree_levels(leaves: Sequence[int]) -> list[list[int]]:
    levels = [list(leaves)]
    while len(levels[-1]) > 1:
        prev = levels[-1]
        levels.append([node_hash(prev[i], prev[i + 1]) for i in range(0, len(prev), 2)])
    return levels


@dataclass(frozen=True)
class Attestation:
    attributes: tuple[Attribute, ...]
    binding_pk: int
    binding_salt: int
    depth: int
    root: int
    issuer_id: str
    issuer_signature: int
    _levels: tuple = field(default=(), compare=False, repr=False)

    def leaves(self) -> list[int]:
        leaves = [EMPTY_LEAF] * (1 << self.depth)
        leaves[BINDING_INDEX] = leaf_hash(BINDING_ATTRIBUTE, self.binding_pk, self.binding_salt)
        for i, a in enumerate(self.attributes, start=1):
            leaves[i] = leaf_hash(a.name, a.value, a.salt)
        return leaves

    def levels(self) -> list[list[int]]:
        return [list(x) for x in self._levels] if self._levels else _tree_levels(self.leaves())

    def attribute(self, name: str) -> Attribute:
        for a in self.attributes:
            if a.name == name:
                return a
        raise UnknownAttribute(name)

    def index_of(self, name: str) -> int:
        for i, a in enumerate(self.attributes, start=1):
            if a.name == name:
                return i
        raise UnknownAttribute(name)

    def to_json(self) -> dict:
        return {
            "version": 1,
            "issuer_id": self.issuer_id,
            "issuer_signature": to_hex(self.issuer_signature),
            "depth": self.depth,
            "root": to_hex(self.root),
            "binding_pk": to_hex(self.binding_pk),
            "binding_salt": to_hex(self.binding_salt),
            "attributes": [
                {"name": a.name, "value": a.value, "salt": to_hex(a.salt)}
                for a in self.attributes
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, obj: Mapping) -> "Attestation":
        attrs = tuple(Attribute(a["name"], int(a["value"]), int(from_hex(a["salt"])))
                      for a in obj["attributes"])
        att = cls(attrs, int(from_hex(obj["binding_pk"])), int(from_hex(obj["binding_salt"])),
                  int(obj["depth"]), int(from_hex(obj["root"])), obj["issuer_id"],
                  int(from_hex(obj["issuer_signature"])))
        if _tree_levels(att.leaves())[-1][0] != att.root:
            raise CredentialError("attestation root does not match its leaves")
        return att


def issue(attributes: Mapping[str, int] | Sequence[tuple[str, int]], binding_pk,
          issuer_key: IssuerKey, depth: int = DEFAULT_DEPTH,
          salts: Optional[Mapping[str, int]] = None, rng=None) -> Attestation:
    """Commit attributes and the holder's binding key into a signed tree.

    ``salts`` may fix per-attribute salts (key ``BINDING_ATTRIBUTE`` for the
    binding leaf); missing salts are drawn from ``rng`` or the OS.
    """
    items = list(attributes.items()) if isinstance(attributes, Mapping) else list(attributes)
    if depth < 1:
        raise CredentialError("depth must be >= 1")
    if len(items) > (1 << depth) - 1:
        raise CapacityExceeded(f"{len(items)} attributes do not fit a depth-{depth} tree")
    names = [n for n, _ in items]
    if len(set(names)) != len(names) or BINDING_ATTRIBUTE in names:
        raise CredentialError("attribute names must be unique and not reserved")
    salts = dict(salts or {})

    def draw(name):
        if name in salts:
            return int(salts[name]) % P
        return rng.randrange(1, P) if rng is not None else secrets.randbelow(P - 1) + 1

    binding_salt = draw(BINDING_ATTRIBUTE)
    attrs = tuple(Attribute(n, int(v), draw(n)) for n, v in items)
    all_salts = [binding_salt] + [a.salt for a in attrs]
    if len(set(all_salts)) != len(all_salts):
        raise CredentialError("salts must be distinct")
    draft = Attestation(attrs, int(binding_pk), binding_salt, depth, 0, issuer_key.issuer_id, 0)
    levels = _tree_levels(draft.leaves())
    root = levels[-1][0]
    return Attestation(attrs, int(binding_pk), binding_salt, depth, root,
                       issuer_key.issuer_id, issuer_key.sign(root),
                       tuple(tuple(x) for x in levels))


def _path(att: Attestation, index: int) -> InclusionPath:
    levels = att.levels()
    siblings, dirs = [], []
    i = index
    for level in levels[:-1]:
        siblings.append(level[i ^ 1])
        dirs.append(i & 1)
        i >>= 1
    return InclusionPath(index, tuple(siblings), tuple(dirs))


def prove_leaf(att: Attestation, name: str) -> InclusionPath:
    if name == BINDING_ATTRIBUTE:
        return _path(att, BINDING_INDEX)
    return _path(att, att.index_of(name))


def prove_binding(att: Attestation) -> InclusionPath:
    return _path(att, BINDING_INDEX)


def recompute_root(leaf: int, path: InclusionPath) -> int:
    cur = leaf
    for sib, d in zip(path.siblings, path.directions):
        cur = node_hash(sib, cur) if d else node_hash(cur, sib)
    return cur


def verify_leaf(root, leaf_preimage: tuple[str, int, int], path: InclusionPath) -> bool:
    """True iff the (name, value, salt) leaf hashes up to ``root`` along ``path``."""
    name, value, salt = leaf_preimage
    if any(d not in (0, 1) for d in path.directions):
        return False
    if len(path.siblings) != len(path.directions):
        return False
    return recompute_root(leaf_hash(name, int(value), int(salt)), path) == int(root) % P
