"""``hardy-ladder`` command-line entry point.

Exit codes: 0 success / verification passed, 1 verification failed or a
computation error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .behavior import (
    ANALYSIS_TOL,
    Behavior,
    ch_values,
    chsh_k,
    eq8_residual,
    hardy_report,
    ns_residual,
    relation_residuals,
    behavior_from_json,
)
from .bounds import fig1_csv, fig1_dataset, lr_bound, lr_max_chsh
from .errors import HardyLadderError
from .proof import certify_cere3, derive_cere2
from .quantum import born_behavior, closed_form_probs, ladder_angles, p_k_qm
from .sim import estimate_report, sample_counts

THREADS_ENV = "HARDY_CHAIN_THREADS"

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _k_type(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {s!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"K must be >= 1, got {v}")
    return v


def _x_type(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {s!r}") from None
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"x must lie in (0, 1), got {v}")
    return v


def _seed_type(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {s!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _nonneg_int(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {s!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {v}")
    return v


def _positive_float(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {s!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--output", "-o", type=Path, default=None, help="write here instead of stdout")
    common.add_argument("--precision", type=_nonneg_int, default=6, help="decimals in CSV output")
    common.add_argument("--no-timestamp", action="store_true", help="omit generated_at from JSON")

    p = _Parser(prog="hardy-ladder", description="Chained CHSH analysis of Hardy's ladder test.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("bounds", parents=[common], help="LR / Tsirelson / algebraic bounds and L_K per K")
    s.add_argument("--k-max", type=_k_type, required=True)

    s = sub.add_parser("fig1", parents=[common], help="L_K and maximal quantum Hardy fraction for K=1..N")
    s.add_argument("--k-max", type=_k_type, default=100)

    s = sub.add_parser("quantum", parents=[common], help="ladder behavior on the Schmidt state")
    s.add_argument("--x", type=_x_type, required=True)
    s.add_argument("--k", type=_k_type, required=True)
    s.add_argument("--full-table", action="store_true")

    s = sub.add_parser("verify", parents=[common], help="NS, Hardy and relation residuals")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", type=Path, help="Behavior JSON file")
    src.add_argument("--x", type=_x_type)
    s.add_argument("--k", type=_k_type)
    s.add_argument("--tol", type=_positive_float, default=ANALYSIS_TOL)

    s = sub.add_parser("prove", parents=[common], help="exact proof certificate")
    s.add_argument("--k", type=_k_type, required=True)

    s = sub.add_parser("lr", parents=[common], help="exhaustive local-deterministic maximum")
    s.add_argument("--k", type=_k_type, required=True)

    s = sub.add_parser("simulate", parents=[common], help="finite-shot estimates")
    s.add_argument("--x", type=_x_type, required=True)
    s.add_argument("--k", type=_k_type, required=True)
    s.add_argument("--shots", type=_k_type, required=True)
    s.add_argument("--seed", type=_seed_type, required=True)
    s.add_argument("--counts", action="store_true", help="include the raw counts table")
    return p


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return 1
    try:
        v = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if v < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return v


def _rows_csv(header: Sequence[str], rows: Sequence[Sequence[Any]], precision: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{v:.{precision}f}" if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _flatten(obj: Any, prefix: str = "") -> list[tuple[str, Any]]:
    if isinstance(obj, dict):
        out = []
        for k, v in obj.items():
            out += _flatten(v, f"{prefix}.{k}" if prefix else str(k))
        return out
    if isinstance(obj, (list, tuple)):
        out = []
        for i, v in enumerate(obj):
            out += _flatten(v, f"{prefix}[{i}]")
        return out
    return [(prefix, obj)]


def _behavior_summary(b: Behavior, full_table: bool) -> dict:
    hr = hardy_report(b)
    ns = ns_residual(b)
    cere3, cere2 = relation_residuals(b)
    ch_plus, ch_minus = ch_values(b)
    out = {
        "k": b.k_param,
        "chsh_k": chsh_k(b),
        "ch_plus": ch_plus,
        "ch_minus": ch_minus,
        "hardy": {
            "p_k": hr.p_k,
            "max_zero_violation": hr.max_zero_violation,
            "zero_terms": [{"constraint": c, "value": v} for c, v in hr.zero_terms],
        },
        "ns": {"max_residual": ns.max_residual, "worst_constraint": ns.worst_constraint.label()},
        "residuals": {"eq8": eq8_residual(b), "cere2": cere2, "cere3": cere3},
    }
    if full_table:
        out["behavior"] = b.to_json_dict()
    return out


def _cmd_bounds(args) -> tuple[int, Any]:
    records = fig1_dataset(args.k_max, workers=_threads())
    if args.format == "csv":
        header = ["k_param", "lr_bound", "tsirelson", "algebraic", "l_k", "p_max_qm", "x_star"]
        rows = [[r.k_param, int(r.lr_bound), r.tsirelson, int(r.algebraic), r.l_k, r.p_max_qm, r.x_star] for r in records]
        return EXIT_OK, _rows_csv(header, rows, args.precision)
    return EXIT_OK, {"records": [r.to_json_dict() for r in records]}


def _cmd_fig1(args) -> tuple[int, Any]:
    records = fig1_dataset(args.k_max, workers=_threads())
    if args.format == "json":
        return EXIT_OK, {"records": [r.to_json_dict() for r in records]}
    return EXIT_OK, fig1_csv(records, args.precision)


def _cmd_quantum(args) -> tuple[int, Any]:
    b = born_behavior(args.x, args.k)
    out = {"x": args.x, **_behavior_summary(b, args.full_table)}
    out["p_k_qm"] = p_k_qm(args.x, args.k)
    out["closed_form"] = closed_form_probs(args.x, args.k).to_json_dict()
    angles = ladder_angles(args.x, args.k)
    out["angles"] = {"theta_a": list(angles.theta_a), "theta_b": list(angles.theta_b)}
    if args.format == "csv" and args.full_table:
        return EXIT_OK, b.to_csv(args.precision)
    return EXIT_OK, out


def _cmd_verify(args) -> tuple[int, Any]:
    if args.input is not None:
        if args.k is not None:
            raise UsageError("verify: --k cannot be combined with --input")
        try:
            text = args.input.read_text()
        except OSError as exc:
            raise UsageError(f"verify: cannot read --input {args.input}: {exc.strerror}") from None
        try:
            b = behavior_from_json(text)
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise UsageError(f"verify: --input is not Behavior JSON ({exc})") from None
        source = {"input": str(args.input)}
    else:
        if args.k is None:
            raise UsageError("verify: --x requires --k")
        b = born_behavior(args.x, args.k)
        source = {"x": args.x, "k": args.k}
    summary = _behavior_summary(b, full_table=False)
    checks = {
        "ns": summary["ns"]["max_residual"] <= args.tol,
        "hardy_zeros": summary["hardy"]["max_zero_violation"] <= args.tol,
        "eq8": summary["residuals"]["eq8"] <= args.tol,
        "cere2": summary["residuals"]["cere2"] <= args.tol,
        "cere3": summary["residuals"]["cere3"] <= args.tol,
    }
    passed = all(checks.values())
    out = {"source": source, "tol": args.tol, **summary, "checks": checks, "passed": passed}
    return (EXIT_OK if passed else EXIT_FAIL), out


def _cmd_prove(args) -> tuple[int, Any]:
    cert = derive_cere2(args.k)
    general = certify_cere3(args.k)
    out = cert.to_json_dict()
    out["general_relation_in_span"] = general.in_span
    ok = cert.verified and general.in_span
    return (EXIT_OK if ok else EXIT_FAIL), out


def _cmd_lr(args) -> tuple[int, Any]:
    value, witness = lr_max_chsh(args.k)
    a_mask, b_mask = witness.masks
    out = {
        "k": args.k,
        "max_chsh": value,
        "lr_bound": lr_bound(args.k),
        "equals_bound": value == lr_bound(args.k),
        "strategies": 4 ** (args.k + 1),
        "witness": {"a_bits": list(witness.a_bits), "b_bits": list(witness.b_bits),
                    "a_mask": a_mask, "b_mask": b_mask},
    }
    return (EXIT_OK if out["equals_bound"] else EXIT_FAIL), out


def _cmd_simulate(args) -> tuple[int, Any]:
    counts = sample_counts(born_behavior(args.x, args.k), args.shots, args.seed)
    report = estimate_report(counts)
    if args.format == "csv":
        return EXIT_OK, _rows_csv(["quantity", "estimate", "std_error"], report.rows(), args.precision)
    out = {"x": args.x, "seed": args.seed, "rng": counts.rng, **report.to_json_dict()}
    if args.counts:
        out["counts"] = counts.to_json_dict()
    return EXIT_OK, out


COMMANDS = {
    "bounds": _cmd_bounds,
    "fig1": _cmd_fig1,
    "quantum": _cmd_quantum,
    "verify": _cmd_verify,
    "prove": _cmd_prove,
    "lr": _cmd_lr,
    "simulate": _cmd_simulate,
}


def _render(payload: Any, args) -> str:
    if isinstance(payload, str):
        return payload
    if args.format == "csv":
        return _rows_csv(["key", "value"], _flatten(payload), args.precision)
    if not args.no_timestamp:
        payload = {**payload, "generated_at": datetime.now(timezone.utc).isoformat()}
    return json.dumps(payload, indent=2) + "\n"


def _error_json(kind: str, message: str) -> str:
    return json.dumps({"error": {"type": kind, "message": message}}) + "\n"


def _execute(argv: Sequence[str]) -> tuple[int, str, Path | None]:
    try:
        args = build_parser().parse_args(list(argv))
        code, payload = COMMANDS[args.command](args)
        return code, _render(payload, args), args.output
    except UsageError as exc:
        return EXIT_USAGE, _error_json("usage", str(exc)), None
    except HardyLadderError as exc:
        return EXIT_FAIL, _error_json(exc.code, str(exc)), None
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0), "", None


def run_command(argv: Sequence[str]) -> tuple[int, str]:
    """Parse ``argv``, run one subcommand, return ``(exit_code, output_text)``."""
    code, text, _ = _execute(argv)
    return code, text


def main(argv: Sequence[str] | None = None) -> int:
    code, text, out_path = _execute(sys.argv[1:] if argv is None else argv)
    if code == EXIT_USAGE:
        sys.stderr.write(text)
    elif out_path is not None:
        out_path.write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
