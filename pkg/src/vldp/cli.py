"""Command-line front end.

Exit codes: 0 success or accept, 1 at least one rejection, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from . import protocol, stats
from .credential import Attestation, CredentialError, IssuerKey, IssuerRegistry, issue
from .field import FieldError, from_hex, to_hex
from .mechanisms import InvalidParams, NoiseParams, bias_table, delta_ledger
from .oracle import BindingKeyPair

EXIT_OK, EXIT_REJECT, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _load_json(path: Optional[str], what: str) -> dict:
    if path is None:
        raise UsageError(f"{what} file is required")
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {what} file {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} file {path} is not valid JSON: {exc}") from exc


def _read_lines(path: str) -> Iterable[str]:
    try:
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    yield line
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


def _emit(objs: Iterable[dict], out: Optional[str], append: bool = False) -> None:
    """Write objects as JSON lines to ``out`` or stdout."""
    lines = [json.dumps(o, sort_keys=True, separators=(",", ":")) + "\n" for o in objs]
    if out is None:
        sys.stdout.writelines(lines)
        return
    with open(out, "a" if append else "w") as fh:
        fh.writelines(lines)


def _registry(path: Optional[str]) -> IssuerRegistry:
    obj = _load_json(path, "registry")
    return IssuerRegistry.from_json(obj.get("issuers", obj))


def _request(path: Optional[str]) -> protocol.ProofRequest:
    try:
        return protocol.ProofRequest.from_json(_load_json(path, "request"))
    except (protocol.MalformedMessage, KeyError, InvalidParams) as exc:
        raise UsageError(f"bad request file: {exc}") from exc


def _responses(path: Optional[str]) -> Iterable[protocol.SurveyResponse]:
    if path is None:
        raise UsageError("responses file is required")
    for line in _read_lines(path):
        yield protocol.SurveyResponse.loads(line)


# -- subcommands ----------------------------------------------------------------

def cmd_keygen(args) -> int:
    rng = random.Random(args.seed) if args.seed is not None else None
    if args.issuer:
        key = IssuerKey(args.issuer, rng.randrange(1, 1 << 250)) if rng else IssuerKey.generate(args.issuer)
        _emit([{"version": 1, "type": "issuer_key", "issuer_id": key.issuer_id,
                "secret": to_hex(key.secret)}], args.out)
        if args.registry:
            path = Path(args.registry)
            reg = IssuerRegistry.from_json(json.loads(path.read_text())) if path.exists() else IssuerRegistry()
            reg.add(key)
            path.write_text(json.dumps(reg.to_json(), indent=2, sort_keys=True) + "\n")
        return EXIT_OK
    kp = BindingKeyPair.generate(rng)
    _emit([{"version": 1, "type": "binding_key", "sk": kp.sk.hex(), "pk": kp.pk.hex()}], args.out)
    return EXIT_OK


def cmd_issue(args) -> int:
    cfg = _load_json(args.config, "config")
    try:
        key_obj = _load_json(args.issuer_key, "issuer key") if args.issuer_key else cfg["issuer"]
        key = IssuerKey(key_obj["issuer_id"], int(from_hex(key_obj["secret"])))
        if "binding_pk" in cfg:
            pk = int(from_hex(cfg["binding_pk"]))
        else:
            pk = int(from_hex(_load_json(args.key, "binding key")["pk"]))
        attrs = {str(k): int(v) for k, v in cfg["attributes"].items()}
        rng = random.Random(cfg["seed"]) if "seed" in cfg else None
        att = issue(attrs, pk, key, depth=int(cfg.get("depth", 4)), rng=rng)
    except (KeyError, FieldError, CredentialError, ValueError) as exc:
        raise UsageError(f"cannot issue credential: {exc}") from exc
    _emit([att.to_json()], args.out)
    return EXIT_OK


def cmd_request(args) -> int:
    cfg = _load_json(args.config, "config")
    try:
        req = protocol.create_request(cfg)
    except InvalidParams as exc:
        raise UsageError(f"invalid survey config: {exc}") from exc
    _emit([req.to_json()], args.out)
    return EXIT_OK


def cmd_respond(args) -> int:
    req = _request(args.request)
    try:
        att = Attestation.from_json(_load_json(args.attestation, "attestation"))
        sk = int(from_hex(_load_json(args.key, "binding key")["sk"]))
    except (KeyError, FieldError, CredentialError) as exc:
        raise UsageError(f"bad wallet input: {exc}") from exc
    try:
        resp = protocol.respond(att, sk, req)
    except protocol.ProtocolError as exc:
        print(f"cannot respond: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_REJECT
    _emit([resp.to_json()], args.out, append=args.append)
    return EXIT_OK


def cmd_verify(args) -> int:
    req = _request(args.request)
    reg = _registry(args.registry)
    verdicts = []
    rejected = 0
    for i, line in enumerate(_read_lines(args.responses)):
        try:
            resp = protocol.SurveyResponse.loads(line)
            verdict = protocol.verify_response(req, resp, reg)
        except (protocol.MalformedMessage, json.JSONDecodeError) as exc:
            verdict = protocol.Verdict(False, protocol.RejectReason.MALFORMED_EVIDENCE, str(exc))
        rejected += not verdict.accepted
        verdicts.append(dict(verdict.to_json(), line=i + 1))
    _emit(verdicts, args.out)
    return EXIT_REJECT if rejected else EXIT_OK


def cmd_aggregate(args) -> int:
    req = _request(args.request)
    reg = _registry(args.registry) if args.registry else None
    failed = 0

    def accepted():
        nonlocal failed
        for resp in _responses(args.responses):
            if reg is not None and not protocol.verify_response(req, resp, reg):
                failed += 1
                continue
            yield resp.stripped()

    result = protocol.aggregate(req, accepted())
    report = result.to_json()
    report["failed_verification"] = failed
    _emit([report], args.out)
    if args.histogram_csv:
        lo, hi = req.bounds
        Path(args.histogram_csv).write_text(stats.emit_histogram(result.histogram, lo, hi))
    return EXIT_OK


def cmd_circuit(args) -> int:
    if args.request:
        req = _request(args.request)
    else:
        try:
            req = protocol.create_request(_load_json(args.config, "config"))
        except InvalidParams as exc:
            raise UsageError(f"invalid survey config: {exc}") from exc
    bundle = req.circuit()
    cs = bundle.system
    _emit([{"mechanism": req.mechanism, "depth": req.depth, "constraints": len(cs),
            "signals": cs.n_signals, "public": bundle.public_names, "digest": cs.digest()}], args.out)
    if args.export:
        Path(args.export).write_text(json.dumps(cs.to_json()) + "\n")
    return EXIT_OK


def _read_samples(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    first = text.lstrip().split("\n", 1)[0]
    if first.startswith("value,"):
        return stats.parse_histogram(text)
    if first.startswith("{"):
        # JSON-lines survey responses
        return [protocol.SurveyResponse.loads(line).output for line in text.splitlines() if line.strip()]
    return [int(x) for x in text.split()]


def cmd_stats(args) -> int:
    cfg = _load_json(args.config, "config")
    try:
        params = NoiseParams.from_config(cfg)
    except InvalidParams as exc:
        raise UsageError(f"invalid parameters: {exc}") from exc
    v = int(cfg.get("v", (params.l + params.u) // 2))
    report: dict = {"params": params.to_config(), "v": v, "n_bits": params.n_bits,
                    "ledger": delta_ledger(params).to_json()}
    dist = None
    if args.exact or args.chi2 or args.histogram_csv:
        try:
            dist = stats.exact_distribution(v, params)
        except stats.EnumerationTooLarge as exc:
            raise UsageError(str(exc)) from exc
    if args.exact:
        report["exact"] = {"mode": dist.mode(), "total": str(dist.total()),
                           "biases": bias_table(params).to_json()}
    if args.dp_check:
        eps = Fraction(args.epsilon) if args.epsilon is not None else params.epsilon
        dp = stats.dp_ratio_check(params, eps)
        report["dp_check"] = dp.to_json()
        report["dp_check"]["within_ledger"] = dp.delta_emp.hi <= delta_ledger(params).total
    samples = None
    if args.sample:
        samples = stats.sample_outputs(v, params, args.sample, np.random.default_rng(args.seed))
        counts = np.bincount(samples - params.l, minlength=params.domain_size)
        report["sample"] = {"n": int(args.sample), "seed": args.seed,
                            "mode": int(np.argmax(counts)) + params.l}
    if args.chi2:
        try:
            report["chi2_p"] = stats.chi_square_fit(_read_samples(args.chi2), dist)
        except (stats.InsufficientSamples, ValueError) as exc:
            raise UsageError(f"chi-square fit failed: {exc}") from exc
    elif samples is not None and dist is not None:
        report["chi2_p"] = stats.chi_square_fit(samples, dist)
    if args.histogram_csv:
        data = samples if samples is not None else dist
        Path(args.histogram_csv).write_text(stats.emit_histogram(data, params.l, params.u))
    _emit([report], args.out)
    return EXIT_OK


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vldp", description="Verifiable local differential privacy surveys")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="create a binding key (or an issuer key with --issuer)")
    p.add_argument("--issuer", help="issuer id; writes an issuer key instead of a binding key")
    p.add_argument("--registry", help="with --issuer, also add the key to this registry file")
    p.add_argument("--seed", type=int, help="deterministic key (testing only)")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_keygen)

    p = sub.add_parser("issue", help="issue an attestation (issuer)")
    p.add_argument("--config", required=True, help="JSON with attributes, binding_pk, optional issuer/depth/seed")
    p.add_argument("--issuer-key")
    p.add_argument("--key", help="binding key file, if the config has no binding_pk")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_issue)

    p = sub.add_parser("request", help="create a proof request (surveyor)")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_request)

    p = sub.add_parser("respond", help="answer a proof request (wallet)")
    p.add_argument("--request", required=True)
    p.add_argument("--attestation", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--out")
    p.add_argument("--append", action="store_true", help="append to --out instead of overwriting")
    p.set_defaults(fn=cmd_respond)

    p = sub.add_parser("verify", help="verify responses (surveyor)")
    p.add_argument("--request", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--responses", required=True, help="JSON-lines file")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("aggregate", help="summarise responses")
    p.add_argument("--request", required=True)
    p.add_argument("--responses", required=True)
    p.add_argument("--registry", help="verify each response first and drop failures")
    p.add_argument("--histogram-csv")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_aggregate)

    p = sub.add_parser("circuit", help="report the constraint count of a survey's circuit")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="survey config, as for 'request'")
    src.add_argument("--request")
    p.add_argument("--export", help="write the constraint system as JSON")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_circuit)

    p = sub.add_parser("stats", help="exact distribution, DP check and fit for a parameter set")
    p.add_argument("--config", required=True, help="JSON with epsilon, l, u, d and optional v")
    p.add_argument("--exact", action="store_true")
    p.add_argument("--dp-check", action="store_true")
    p.add_argument("--epsilon", help="claimed epsilon for --dp-check (default: the config's)")
    p.add_argument("--chi2", metavar="SAMPLES_FILE")
    p.add_argument("--sample", type=int, metavar="N", help="draw N outputs with seeded bits")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--histogram-csv")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_stats)
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except protocol.MalformedMessage as exc:
        print(f"error: malformed message: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
