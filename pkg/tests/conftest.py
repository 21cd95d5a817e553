import random
from fractions import Fraction

import pytest

from vldp import credential, protocol
from vldp.mechanisms import NoiseParams
from vldp.oracle import BindingKeyPair

REF_PARAMS = NoiseParams(Fraction(10), 0, 128, 20)


@pytest.fixture(scope="session")
def ref_params():
    return REF_PARAMS


@pytest.fixture(scope="session")
def issuer():
    return credential.IssuerKey("gov", 0x1234567)


@pytest.fixture(scope="session")
def registry(issuer):
    reg = credential.IssuerRegistry()
    reg.add(issuer)
    return reg


@pytest.fixture(scope="session")
def age_request():
    return protocol.create_request({
        "survey_id": "age-2026", "attribute": "age", "epsilon": 10, "l": 0, "u": 128,
        "d": 20, "trusted_issuers": ["gov"],
    })


@pytest.fixture(scope="session")
def rr_request():
    return protocol.create_request({
        "survey_id": "smokers", "mechanism": "rr", "attribute": "smoker",
        "trusted_issuers": ["gov"],
    })


def make_holder(issuer, rng, attributes=None, depth=4):
    kp = BindingKeyPair.generate(rng)
    attrs = attributes if attributes is not None else {"age": rng.randrange(128), "smoker": rng.randrange(2)}
    att = credential.issue(attrs, kp.pk, issuer, depth=depth, rng=rng)
    return kp, att


@pytest.fixture
def holder(issuer):
    return make_holder(issuer, random.Random(7), {"age": 50, "smoker": 1})


# criterion number -> (status, title, detail); filled by test_acceptance
ACCEPTANCE_RESULTS: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        status, title, detail = ACCEPTANCE_RESULTS[n]
        extra = ", ".join(f"{k}={v}" for k, v in detail.items())
        terminalreporter.write_line(f"{status} criterion {n}: {title}" + (f" [{extra}]" if extra else ""))
