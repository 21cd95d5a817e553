"""Surveyor / participant exchange: proof requests, wallet responses,
verification and aggregation.

Messages are JSON objects (one per line on the wire) with all field
elements as 64-digit hex. The default evidence mode ships the full witness;
it checks integrity end to end but offers no privacy, and exists so the
verification logic can be exercised without a succinct proving backend.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Protocol

from . import circuits
from .credential import Attestation, IssuerRegistry, UnknownAttribute, attribute_tag, prove_binding, prove_leaf
from .field import FieldError, P, from_hex, tag, to_hex
from .mechanisms import InvalidParams, NoiseParams, rr_debias
from .oracle import hash_ints
from .r1cs import LengthMismatch, Witness

SCHEMA_VERSION = 1
MECHANISMS = ("rr", "exponential")
POLICIES = ("fixed", "per-response")


class ProtocolError(Exception):
    pass


class AttributeMissing(ProtocolError):
    pass


class UntrustedIssuer(ProtocolError):
    pass


class WitnessFailure(ProtocolError):
    pass


class MalformedMessage(ProtocolError):
    pass


@dataclass(frozen=True)
class ProofRequest:
    survey_id: str
    mechanism: str
    attribute: str
    challenge: int
    trusted_issuers: tuple[str, ...]
    params: Optional[NoiseParams] = None
    challenge_policy: str = "fixed"
    depth: int = 4

    @property
    def commitment(self) -> int:
        return circuits.params_commitment(self.mechanism, self.params, self.attribute)

    @property
    def bounds(self) -> tuple[int, int]:
        return (0, 2) if self.mechanism == "rr" else (self.params.l, self.params.u)

    def circuit(self) -> circuits.CircuitBundle:
        if self.mechanism == "rr":
            return circuits.build_rr_circuit(self.depth, self.attribute)
        return circuits.build_noise_circuit(self.params, None, self.depth, self.attribute)

    def challenge_for(self, pk: int) -> int:
        if self.challenge_policy == "fixed":
            return self.challenge
        return hash_ints([self.challenge, pk])

    def to_json(self) -> dict:
        out = {
            "version": SCHEMA_VERSION,
            "type": "proof_request",
            "survey_id": self.survey_id,
            "mechanism": self.mechanism,
            "attribute": self.attribute,
            "challenge": to_hex(self.challenge),
            "challenge_policy": self.challenge_policy,
            "trusted_issuers": list(self.trusted_issuers),
            "depth": self.depth,
        }
        if self.params is not None:
            out["params"] = self.params.to_config()
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "ProofRequest":
        _check_version(obj, "proof_request")
        params = NoiseParams.from_config(obj["params"]) if "params" in obj else None
        return cls(obj["survey_id"], obj["mechanism"], obj["attribute"],
                   int(from_hex(obj["challenge"])), tuple(obj["trusted_issuers"]),
                   params, obj.get("challenge_policy", "fixed"), int(obj.get("depth", 4)))


def _check_version(obj: Mapping, kind: str) -> None:
    if not isinstance(obj, Mapping):
        raise MalformedMessage(f"expected a JSON object, got {type(obj).__name__}")
    if obj.get("version") != SCHEMA_VERSION:
        raise MalformedMessage(f"unsupported schema version {obj.get('version')!r}")
    if obj.get("type") != kind:
        raise MalformedMessage(f"expected a {kind} message, got {obj.get('type')!r}")


def default_challenge(survey_id: str) -> int:
    """Challenge hard-wired to the survey so repeated asks reuse randomness."""
    return hash_ints([tag("challenge"), attribute_tag(survey_id)])


def create_request(config: Mapping) -> ProofRequest:
    try:
        survey_id = str(config["survey_id"])
        mechanism = config.get("mechanism", "exponential")
        attribute = str(config["attribute"])
    except KeyError as exc:
        raise InvalidParams(f"missing config key {exc}") from exc
    if mechanism not in MECHANISMS:
        raise InvalidParams(f"mechanism must be one of {MECHANISMS}")
    kind = config.get("attribute_kind", "binary" if mechanism == "rr" else "numeric")
    if mechanism == "rr" and kind != "binary":
        raise InvalidParams("randomized response needs a binary attribute")
    policy = config.get("challenge_policy", "fixed")
    if policy not in POLICIES:
        raise InvalidParams(f"challenge_policy must be one of {POLICIES}")
    params = None
    if mechanism == "exponential":
        params = NoiseParams.from_config(config)
        if circuits.squeeze_count(params.bits_required) > circuits.MAX_SQUEEZES:
            raise InvalidParams("precision d needs more randomness than the circuit allows")
    if "challenge" in config:
        try:
            challenge = int(from_hex(config["challenge"]))
        except FieldError as exc:
            raise InvalidParams(f"bad challenge: {exc}") from exc
    else:
        challenge = default_challenge(survey_id)
    issuers = config.get("trusted_issuers", [])
    if isinstance(issuers, str) or not issuers:
        raise InvalidParams("trusted_issuers must be a non-empty list")
    depth = int(config.get("depth", 4))
    if depth < 1:
        raise InvalidParams("depth must be >= 1")
    return ProofRequest(survey_id, mechanism, attribute, challenge, tuple(issuers),
                        params, policy, depth)


# -- responses ----------------------------------------------------------------

@dataclass(frozen=True)
class Evidence:
    mode: str
    witness: Optional[tuple[int, ...]] = None
    blob: Optional[bytes] = None

    def to_json(self) -> dict:
        if self.mode == "transparent":
            return {"mode": "transparent", "witness": [to_hex(x) for x in self.witness]}
        return {"mode": self.mode, "blob": (self.blob or b"").hex()}

    @classmethod
    def from_json(cls, obj: Mapping) -> "Evidence":
        if obj["mode"] == "transparent":
            return cls("transparent", tuple(int(from_hex(x)) for x in obj["witness"]))
        return cls(obj["mode"], None, bytes.fromhex(obj["blob"]))


class ProvingBackend(Protocol):
    """Integration point for a succinct argument system (none ships here)."""

    name: str

    def prove(self, bundle: circuits.CircuitBundle, witness: Witness) -> bytes: ...

    def verify(self, bundle: circuits.CircuitBundle, blob: bytes,
               publics: Mapping[str, int]) -> bool: ...


@dataclass(frozen=True)
class SurveyResponse:
    survey_id: str
    challenge: int
    pk: int
    root: int
    params_commitment: int
    output: int
    issuer_id: str
    issuer_signature: int
    evidence: Optional[Evidence] = field(default=None, compare=True)

    @property
    def publics(self) -> dict[str, int]:
        return {"challenge": self.challenge, "pk": self.pk, "root": self.root,
                "params_commitment": self.params_commitment}

    def to_json(self) -> dict:
        return {
            "version": SCHEMA_VERSION,
            "type": "survey_response",
            "survey_id": self.survey_id,
            "public_inputs": {k: to_hex(v) for k, v in self.publics.items()},
            "output": self.output,
            "issuer_id": self.issuer_id,
            "issuer_signature": to_hex(self.issuer_signature),
            "evidence": None if self.evidence is None else self.evidence.to_json(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, obj: Mapping) -> "SurveyResponse":
        _check_version(obj, "survey_response")
        try:
            pub = {k: int(from_hex(v)) for k, v in obj["public_inputs"].items()}
            ev = obj.get("evidence")
            return cls(obj["survey_id"], pub["challenge"], pub["pk"], pub["root"],
                       pub["params_commitment"], int(obj["output"]), obj["issuer_id"],
                       int(from_hex(obj["issuer_signature"])),
                       None if ev is None else Evidence.from_json(ev))
        except (KeyError, ValueError, TypeError) as exc:
            raise MalformedMessage(str(exc)) from exc

    @classmethod
    def loads(cls, line: str) -> "SurveyResponse":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedMessage(f"not JSON: {exc}") from exc
        return cls.from_json(obj)

    def stripped(self) -> "SurveyResponse":
        """Copy without evidence, for aggregation after verification."""
        return SurveyResponse(self.survey_id, self.challenge, self.pk, self.root,
                              self.params_commitment, self.output, self.issuer_id,
                              self.issuer_signature, None)


def respond(attestation: Attestation, sk: int, request: ProofRequest,
            backend: Optional[ProvingBackend] = None, self_check: bool = True) -> SurveyResponse:
    """Wallet side: derive the noisy answer and package evidence for it.

    ``self_check=False`` skips the wallet's own satisfaction check; only
    sensible when the caller verifies the response straight away.
    """
    try:
        attr = attestation.attribute(request.attribute)
    except UnknownAttribute as exc:
        raise AttributeMissing(f"credential has no attribute {request.attribute!r}") from exc
    if attestation.issuer_id not in request.trusted_issuers:
        raise UntrustedIssuer(f"issuer {attestation.issuer_id!r} is not trusted by this survey")
    if attestation.depth != request.depth:
        raise WitnessFailure(f"credential depth {attestation.depth} != survey depth {request.depth}")
    bundle = request.circuit()
    pk = attestation.binding_pk
    secret = {"sk": int(sk) % P, "v": attr.value % P}
    secret.update(circuits.credential_inputs(attr.salt, prove_leaf(attestation, attr.name),
                                             attestation.binding_salt, prove_binding(attestation)))
    public = {"challenge": request.challenge_for(pk), "pk": pk, "root": attestation.root,
              "params_commitment": request.commitment}
    try:
        w = circuits.generate_witness(bundle, secret, public, check=self_check)
    except circuits.InconsistentInputs as exc:
        raise WitnessFailure(str(exc)) from exc
    if backend is None:
        evidence = Evidence("transparent", tuple(w.values))
    else:
        evidence = Evidence(backend.name, None, backend.prove(bundle, w))
    return SurveyResponse(request.survey_id, public["challenge"], pk, attestation.root,
                          request.commitment, bundle.output_value(w), attestation.issuer_id,
                          attestation.issuer_signature, evidence)


# -- verification ---------------------------------------------------------------

class RejectReason(enum.Enum):
    BAD_ISSUER = "BadIssuer"
    PUBLIC_INPUT_MISMATCH = "PublicInputMismatch"
    UNSATISFIED_CONSTRAINT = "UnsatisfiedConstraint"
    OUTPUT_MISMATCH = "OutputMismatch"
    MALFORMED_EVIDENCE = "MalformedEvidence"


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: Optional[RejectReason] = None
    detail: str = ""
    constraint_index: Optional[int] = None

    def __bool__(self) -> bool:
        return self.accepted

    def to_json(self) -> dict:
        return {"accepted": self.accepted,
                "reason": None if self.reason is None else self.reason.value,
                "detail": self.detail, "constraint_index": self.constraint_index}


def _reject(reason: RejectReason, detail: str, index: Optional[int] = None) -> Verdict:
    return Verdict(False, reason, detail, index)


def verify_response(request: ProofRequest, response: SurveyResponse,
                    registry: IssuerRegistry,
                    backend: Optional[ProvingBackend] = None) -> Verdict:
    if response.survey_id != request.survey_id:
        return _reject(RejectReason.PUBLIC_INPUT_MISMATCH, "survey id differs")
    if response.issuer_id not in request.trusted_issuers:
        return _reject(RejectReason.BAD_ISSUER, f"issuer {response.issuer_id!r} not trusted")
    if not registry.verify(response.issuer_id, response.root, response.issuer_signature):
        return _reject(RejectReason.BAD_ISSUER, "issuer signature does not match the root")
    if response.challenge != request.challenge_for(response.pk):
        return _reject(RejectReason.PUBLIC_INPUT_MISMATCH, "challenge differs from the request")
    if response.params_commitment != request.commitment:
        return _reject(RejectReason.PUBLIC_INPUT_MISMATCH, "parameter commitment differs")
    lo, hi = request.bounds
    if not lo <= response.output < hi:
        return _reject(RejectReason.OUTPUT_MISMATCH, "claimed output outside the survey range")
    ev = response.evidence
    if ev is None:
        return _reject(RejectReason.MALFORMED_EVIDENCE, "no evidence attached")
    bundle = request.circuit()
    if ev.mode != "transparent":
        if backend is None or backend.name != ev.mode:
            return _reject(RejectReason.MALFORMED_EVIDENCE, f"no backend for mode {ev.mode!r}")
        publics = dict(response.publics, out=response.output % P)
        if not backend.verify(bundle, ev.blob or b"", publics):
            return _reject(RejectReason.UNSATISFIED_CONSTRAINT, "backend rejected the proof")
        return Verdict(True)
    w = list(ev.witness or ())
    if len(w) != bundle.system.n_signals:
        return _reject(RejectReason.MALFORMED_EVIDENCE, "witness length does not match the circuit")
    for name, value in response.publics.items():
        if w[bundle.public[name].index] != value:
            return _reject(RejectReason.PUBLIC_INPUT_MISMATCH, f"witness {name} differs")
    if w[bundle.output.index] != response.output % P:
        return _reject(RejectReason.OUTPUT_MISMATCH, "witness output differs from the claim")
    try:
        report = bundle.system.is_satisfied(w)
    except LengthMismatch as exc:
        return _reject(RejectReason.MALFORMED_EVIDENCE, str(exc))
    if not report:
        return _reject(RejectReason.UNSATISFIED_CONSTRAINT, report.reason, report.failed_index)
    return Verdict(True)


# -- aggregation ----------------------------------------------------------------

@dataclass(frozen=True)
class AggregateResult:
    accepted: int
    rejected: int
    mean: Optional[float]
    histogram: dict[int, int]
    debiased: Optional[float] = None
    challenge_policy: str = "fixed"

    @property
    def total(self) -> int:
        return self.accepted + self.rejected

    def to_json(self) -> dict:
        out = {
            "accepted": self.accepted,
            "rejected": self.rejected,
            "mean": self.mean,
            "histogram": [[k, v] for k, v in sorted(self.histogram.items())],
            "challenge_policy": self.challenge_policy,
        }
        if self.debiased is not None:
            out["debiased_proportion"] = self.debiased
        if self.challenge_policy != "fixed":
            out["warning"] = "per-response challenges: repeated answers can be averaged"
        return out


def aggregate(request: ProofRequest, responses: Iterable[SurveyResponse]) -> AggregateResult:
    """Summarise verified responses, keeping one answer per binding key.

    When a key answers more than once, the answer with the smallest
    (output, challenge, root) is kept, so the result does not depend on the
    order of the responses.
    """
    lo, hi = request.bounds
    kept: dict[int, tuple[int, int, int]] = {}
    rejected = 0
    for r in responses:
        if r.survey_id != request.survey_id or not lo <= r.output < hi:
            rejected += 1
            continue
        key = (r.output, r.challenge, r.root)
        if r.pk in kept:
            rejected += 1
            if key < kept[r.pk]:
                kept[r.pk] = key
        else:
            kept[r.pk] = key
    hist = {j: 0 for j in range(lo, hi)}
    for out, _, _ in kept.values():
        hist[out] += 1
    n = len(kept)
    mean = float(Fraction(sum(k * c for k, c in hist.items()), n)) if n else None
    debiased = None
    if request.mechanism == "rr" and n:
        debiased = rr_debias(hist[1], n)
    return AggregateResult(n, rejected, mean, hist, debiased, request.challenge_policy)
