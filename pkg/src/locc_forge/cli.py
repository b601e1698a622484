"""Command-line front end.

Five subcommands (``feasibility``, ``synthesize``, ``verify``, ``simulate``,
``reduce-bob``) operating on JSON files.  Machine-readable JSON goes to
stdout (or to ``-o PATH``), a one-line human summary goes to stderr.

Exit codes: 0 success/feasible, 1 infeasible or verification failed,
2 malformed input.

States are stored as ``{"dims": [dA, dB], "matrix": [[[re, im], ...], ...]}``
with row-major matrices and complex entries as ``[re, im]`` pairs; protocols
carry the stage-1 outcomes, the completion operator, the optional stage-2
operators and a meta block.  Floats are serialized via ``repr`` and therefore
round-trip exactly.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .bipartite import BipartiteState
from .errors import InfeasibleError, LoccForgeError
from .simulate import estimate, verify
from .synth import (
    LoccProtocol,
    StageOneOutcome,
    StageTwo,
    feasibility,
    reduce_bob,
    synthesize,
)

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_BAD_INPUT = 2


class CliInputError(Exception):
    """File-level problem: unreadable, unparsable or wrongly shaped input."""


# ---------------------------------------------------------------------------
# JSON <-> numpy
# ---------------------------------------------------------------------------

def matrix_to_json(m: np.ndarray) -> list:
    a = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def matrix_from_json(obj) -> np.ndarray:
    try:
        rows = [[complex(float(pair[0]), float(pair[1])) for pair in row] for row in obj]
    except (TypeError, ValueError, IndexError) as exc:
        raise CliInputError(f"malformed matrix entry: {exc}") from exc
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise CliInputError("matrix rows are empty or ragged")
    return np.array(rows, dtype=complex)


def _read_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliInputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliInputError(f"{path} is not valid JSON: {exc}") from exc


def load_state(path: str, renormalize: bool = False) -> BipartiteState:
    doc = _read_json(path)
    if not isinstance(doc, dict) or "matrix" not in doc:
        raise CliInputError(f"{path}: expected an object with a 'matrix' field")
    amp = matrix_from_json(doc["matrix"])
    if "dims" in doc:
        dims = tuple(doc["dims"])
        if dims != amp.shape:
            raise CliInputError(f"{path}: dims {dims} do not match matrix shape {amp.shape}")
    norm = float(np.linalg.norm(amp))
    if norm == 0.0:
        raise CliInputError(f"{path}: zero amplitude matrix")
    if abs(norm * norm - 1.0) > 1e-8 and not renormalize:
        raise CliInputError(
            f"{path}: state norm^2 = {norm * norm!r} is off by more than 1e-8 "
            "(pass --renormalize to accept)"
        )
    return BipartiteState(amp / norm)


def save_state(state: BipartiteState, path: str) -> None:
    doc = {"dims": list(state.dims), "matrix": matrix_to_json(state.amp)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_operator(path: str) -> np.ndarray:
    doc = _read_json(path)
    if not isinstance(doc, dict) or "matrix" not in doc:
        raise CliInputError(f"{path}: expected an object with a 'matrix' field")
    return matrix_from_json(doc["matrix"])


def protocol_to_dict(protocol: LoccProtocol) -> dict:
    stage2 = None
    if protocol.stage2 is not None:
        s2 = protocol.stage2
        stage2 = {
            "p": s2.p,
            "N": matrix_to_json(s2.N),
            "V": matrix_to_json(s2.V),
            "N_fail": matrix_to_json(s2.N_fail),
        }
    return {
        "stage1": {
            "outcomes": [
                {"q": out.q, "M": matrix_to_json(out.M), "U": matrix_to_json(out.U)}
                for out in protocol.outcomes
            ],
            "M0": matrix_to_json(protocol.M0),
        },
        "stage2": stage2,
        "meta": {
            "p_total": protocol.p_total,
            "dims": list(protocol.dims),
            "tool_version": __version__,
            "source_digest": protocol.source_digest,
            "target_digest": protocol.target_digest,
        },
    }


def protocol_from_dict(doc: dict) -> LoccProtocol:
    try:
        outcomes = tuple(
            StageOneOutcome(
                q=float(o["q"]),
                M=matrix_from_json(o["M"]),
                U=matrix_from_json(o["U"]),
            )
            for o in doc["stage1"]["outcomes"]
        )
        m0 = matrix_from_json(doc["stage1"]["M0"])
        stage2 = None
        if doc.get("stage2") is not None:
            s2 = doc["stage2"]
            stage2 = StageTwo(
                p=float(s2["p"]),
                N=matrix_from_json(s2["N"]),
                V=matrix_from_json(s2["V"]),
                N_fail=matrix_from_json(s2["N_fail"]),
            )
        meta = doc.get("meta", {})
        dims = tuple(meta.get("dims", m0.shape))
        return LoccProtocol(
            outcomes=outcomes,
            M0=m0,
            stage2=stage2,
            dims=(int(dims[0]), int(dims[1])),
            p_total=float(meta.get("p_total", 1.0 if stage2 is None else stage2.p)),
            source_digest=meta.get("source_digest"),
            target_digest=meta.get("target_digest"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CliInputError(f"malformed protocol file: {exc}") from exc


def load_protocol(path: str) -> LoccProtocol:
    return protocol_from_dict(_read_json(path))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _emit(payload: dict, out_path: str | None) -> None:
    text = json.dumps(payload, indent=2)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _parse_p(raw: str):
    if raw == "max":
        return "max"
    try:
        return float(raw)
    except ValueError as exc:
        raise CliInputError(f"--p expects a float or 'max', got {raw!r}") from exc


def cmd_feasibility(args) -> int:
    a = load_state(args.source, args.renormalize)
    b = load_state(args.target, args.renormalize)
    p = _parse_p(args.p)
    report = feasibility(a, b, p)
    _emit(report.as_dict(), args.output)
    feasible = report.super_maj_ok_at_p and (
        report.p_max > 0.0 if p == "max" else True
    )
    print(
        f"p_max = {report.p_max:.6g}, deterministic: "
        f"{'yes' if report.deterministic_ok else 'no'}, feasible at requested p: "
        f"{'yes' if feasible else 'no'}",
        file=sys.stderr,
    )
    return EXIT_OK if feasible else EXIT_INFEASIBLE


def cmd_synthesize(args) -> int:
    a = load_state(args.source, args.renormalize)
    b = load_state(args.target, args.renormalize)
    p = _parse_p(args.p)
    protocol = synthesize(a, b, p)
    _emit(protocol_to_dict(protocol), args.output)
    stage2 = "none" if protocol.stage2 is None else f"p = {protocol.stage2.p:.6g}"
    print(
        f"{len(protocol.outcomes)} stage-1 outcome(s), stage 2: {stage2}, "
        f"total success probability {protocol.p_total:.6g}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    protocol = load_protocol(args.protocol)
    a = load_state(args.source, args.renormalize)
    b = load_state(args.target, args.renormalize)
    for digest, state, name in (
        (protocol.source_digest, a, "source"),
        (protocol.target_digest, b, "target"),
    ):
        if digest and digest != state.digest:
            print(f"note: {name} state digest differs from the protocol meta", file=sys.stderr)
    report = verify(protocol, a, b, tol=args.tol)
    _emit(report.as_dict(), args.output)
    print(
        f"max residual {report.max_residual:.3e} vs tol {args.tol:.3e}: "
        f"{'PASS' if report.passed else 'FAIL'}",
        file=sys.stderr,
    )
    return EXIT_OK if report.passed else EXIT_INFEASIBLE


def cmd_simulate(args) -> int:
    protocol = load_protocol(args.protocol)
    a = load_state(args.source, args.renormalize)
    b = load_state(args.target, args.renormalize)
    result = estimate(protocol, a, b, trials=args.trials, seed=args.seed)
    payload = {
        "p_hat": result.p_hat,
        "mean_success_fidelity": result.mean_success_fidelity,
        "stderr": result.stderr,
        "trials": args.trials,
        "seed": args.seed,
    }
    _emit(payload, args.output)
    print(
        f"p_hat = {result.p_hat:.4f} +/- {result.stderr:.4f} "
        f"({args.trials} trials, seed {args.seed}), "
        f"mean success fidelity {result.mean_success_fidelity:.6f}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_reduce_bob(args) -> int:
    m = load_operator(args.operator)
    psi = load_state(args.state, args.renormalize)
    n, u = reduce_bob(m, psi)
    residual = float(np.linalg.norm(psi.amp @ m.T - n @ psi.amp @ u.T, 2))
    payload = {
        "N": matrix_to_json(n),
        "U": matrix_to_json(u),
        "residual": residual,
    }
    _emit(payload, args.output)
    print(f"identity residual {residual:.3e}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _default_tol() -> float:
    return float(os.environ.get("LOCC_FORGE_TOL", "1e-9"))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("-o", "--output", help="write the JSON report here instead of stdout")
    p.add_argument(
        "--renormalize",
        action="store_true",
        help="accept state files whose norm is off and rescale them",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="locc-forge",
        description=(
            "Decide, synthesize, verify and simulate LOCC transformations "
            "between bipartite pure states."
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("feasibility", help="majorization feasibility report for A -> B")
    p.add_argument("source", help="source state JSON file")
    p.add_argument("target", help="target state JSON file")
    p.add_argument("--p", default="max", help="success probability, a float or 'max'")
    _add_common(p)
    p.set_defaults(func=cmd_feasibility)

    p = sub.add_parser("synthesize", help="build the explicit protocol for A -> B")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--p", default="max", help="success probability, a float or 'max'")
    _add_common(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("verify", help="check all identities of a protocol file")
    p.add_argument("protocol", help="protocol JSON file")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument(
        "--tol",
        type=float,
        default=_default_tol(),
        help="residual tolerance (default 1e-9, or LOCC_FORGE_TOL)",
    )
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="Monte Carlo run of a protocol file")
    p.add_argument("protocol")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser(
        "reduce-bob",
        help="rewrite a Bob-side contraction as an Alice contraction plus Bob unitary",
    )
    p.add_argument("operator", help="operator JSON file ({'matrix': ...})")
    p.add_argument("state", help="square bipartite state JSON file")
    _add_common(p)
    p.set_defaults(func=cmd_reduce_bob)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliInputError as exc:
        print(json.dumps({"error": {"type": "invalid-input", "message": str(exc)}}))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except InfeasibleError as exc:
        payload = {"error": {"type": "infeasible", "message": str(exc)}}
        if exc.p_max is not None:
            payload["error"]["p_max"] = exc.p_max
        print(json.dumps(payload))
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except LoccForgeError as exc:
        print(json.dumps({"error": {"type": "invalid-input", "message": str(exc)}}))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
