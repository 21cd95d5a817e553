"""Verifiable local differential privacy for surveys.

Participants answer with noise drawn from randomness that both sides fix
jointly; the surveyor checks, via an R1CS circuit, that the noise was
applied honestly to an attribute certified by a trusted issuer.
"""

from .credential import Attestation, IssuerKey, IssuerRegistry, issue
from .field import P, FieldElement
from .mechanisms import NoiseParams, delta_ledger, exponential_noise, randomized_response
from .oracle import BindingKeyPair, hash, verifiable_unif_rand
from .protocol import (
    AggregateResult,
    ProofRequest,
    SurveyResponse,
    aggregate,
    create_request,
    respond,
    verify_response,
)
from .stats import dp_ratio_check, exact_distribution

__all__ = [
    "P", "FieldElement", "NoiseParams", "delta_ledger", "exponential_noise",
    "randomized_response", "BindingKeyPair", "hash", "verifiable_unif_rand",
    "Attestation", "IssuerKey", "IssuerRegistry", "issue", "AggregateResult",
    "ProofRequest", "SurveyResponse", "aggregate", "create_request", "respond",
    "verify_response", "dp_ratio_check", "exact_distribution",
]
