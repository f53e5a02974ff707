"""Command-line front end. Every command prints exactly one JSON document.

Exit codes: 0 ok, 1 verdict false (or nothing found), 2 usage/schema
error, 3 precondition violated, 4 internal consistency failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import gcircuit as gc
from . import netcore as nc
from . import solvers
from .errors import InternalConsistencyError, PreconditionError
from .gadgets.reductions import BooleanCircuit, CompiledArtifact, compile_boolean, compile_gcircuit
from .gadgets.reductions import embed_gc_solution, extract_discrete, witness_boolean
from .linfeas import Infeasible

EXIT_OK, EXIT_FALSE, EXIT_USAGE, EXIT_PRECONDITION, EXIT_INTERNAL = 0, 1, 2, 3, 4


class SchemaError(Exception):
    """Input file does not match the expected layout; ``pointer`` locates the problem."""

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer}: {message}")
        self.pointer = pointer


# ---------------------------------------------------------------------------
# I/O helpers


def _load(path: str) -> dict:
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as e:
        raise SchemaError(path, str(e)) from None
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}#/", f"invalid JSON ({e.msg} at line {e.lineno})") from None


def _parse(path: str, fn, what: str):
    doc = _load(path)
    try:
        return fn(doc)
    except KeyError as e:
        raise SchemaError(f"{path}#/{e.args[0]}", f"missing field in {what}") from None
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise SchemaError(f"{path}#/", f"bad {what}: {e}") from None


def _system_doc(doc: dict) -> nc.FinancialSystem:
    # a compiled artifact carries its system next to the sidecar
    return nc.system_from_json(doc["system"] if "sidecar" in doc else doc)


def _system(path: str) -> nc.FinancialSystem:
    return _parse(path, _system_doc, "financial system")


def _rat(x: Fraction) -> dict:
    return {"value": nc.fmt_rational(x), "approx": nc.decimal12(x)}


def _rates(r) -> dict:
    return {
        "rates": {b: nc.fmt_rational(v) for b, v in r.items()},
        "approx": {b: nc.decimal12(v) for b, v in r.items()},
    }


def _eps(text: str) -> Fraction:
    try:
        v = nc.as_rational(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("eps must be non-negative")
    return v


def _assignments(text: str) -> dict:
    """'A=1/2,B=1' -> {'A': 1/2, 'B': 1}."""
    out = {}
    if not text:
        return out
    for item in text.split(","):
        k, sep, v = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected name=value, got {item!r}")
        out[k.strip()] = nc.as_rational(v.strip())
    return out


# ---------------------------------------------------------------------------
# commands; each returns (payload, exit code)


def cmd_validate(args):
    sys_ = _system(args.file)
    vs = nc.validate(sys_, strict=args.strict)
    fatal = any(v.fatal for v in vs)
    payload = {
        "ok": not fatal,
        "violations": [
            {"kind": v.kind, "bank": v.bank, "message": v.message, "fatal": v.fatal} for v in vs
        ],
        "naked_positions": [
            {"holder": j, "reference": k, "excess": _rat(x)} for j, k, x in nc.naked_positions(sys_)
        ],
    }
    return payload, EXIT_FALSE if fatal else EXIT_OK


def _solve_payload(res: solvers.SolveResult) -> dict:
    return {
        "method": res.method,
        "iterations": res.iterations,
        "certified_eps": _rat(res.certified_eps),
        **_rates(res.r),
    }


def cmd_solve(args):
    sys_ = _system(args.file)
    if args.method == "iterate":
        return _solve_payload(solvers.iterate_monotone(sys_, args.eps)), EXIT_OK
    if args.method == "decomposed":
        return _solve_payload(solvers.solve_decomposed(sys_, args.eps)), EXIT_OK
    if args.method == "fictitious":
        return _solve_payload(solvers.fictitious_default(sys_)), EXIT_OK
    free = tuple(b for b in args.free.split(",") if b) if args.free else None
    spec = solvers.GridSpec(step=args.grid_step, free_banks=free, pinned=args.pin)
    found = solvers.grid_oracle(sys_, args.eps, spec)
    payload = {
        "method": "grid",
        "eps": _rat(args.eps),
        "step": _rat(spec.step),
        "count": len(found),
        "solutions": [_rates(r) for r in found],
    }
    return payload, EXIT_OK if found else EXIT_FALSE


def _bank_report(chk: nc.BankCheck) -> dict:
    return {
        "rate": _rat(chk.rate),
        "assets": _rat(chk.assets),
        "assets_after_costs": _rat(chk.assets_after_costs),
        "liabilities": _rat(chk.liabilities),
        "branch": chk.branch_taken,
        "residual": _rat(chk.residual),
        "ok": chk.ok,
    }


def cmd_check(args):
    sys_ = _system(args.file)
    r = _parse(args.rates, nc.rates_from_json, "rates")
    try:
        r = nc.RecoveryVector.for_system(sys_, r)
    except (KeyError, ValueError) as e:
        raise SchemaError(f"{args.rates}#/rates", str(e)) from None
    rep = nc.is_eps_solution(sys_, r, args.eps)
    liab = nc.liabilities(sys_, r)
    pays = nc.payments(sys_, r)
    payload = {
        "verdict": rep.verdict,
        "eps": _rat(rep.eps),
        "failing": rep.failing,
        "banks": {b: _bank_report(c) for b, c in rep.banks.items()},
        "liabilities": [
            {"writer": w, "holder": h, **_rat(v)} for (w, h), v in sorted(liab.pairwise.items())
        ],
        "payments": [{"writer": w, "holder": h, **_rat(v)} for (w, h), v in sorted(pays.items())],
    }
    return payload, EXIT_OK if rep.verdict else EXIT_FALSE


def cmd_defaults(args):
    sys_ = _system(args.file)
    r = _parse(args.rates, nc.rates_from_json, "rates")
    D = nc.default_set_of(sys_, r, args.eps)
    return {"eps": _rat(args.eps), "default_set": sorted(D)}, EXIT_OK


def cmd_compile_bool(args):
    circ = _parse(args.circuit, BooleanCircuit.from_json, "Boolean circuit")
    art = compile_boolean(circ, args.alpha, args.beta, args.counterparty_free, destroyer=args.destroyer)
    return art.to_json(), EXIT_OK


def cmd_witness(args):
    art = _parse(args.artifact, CompiledArtifact.from_json, "compiled artifact")
    r = witness_boolean(art, {k: bool(v) for k, v in args.assign.items()})
    return _rates(r), EXIT_OK


def cmd_compile_gc(args):
    circ = _parse(args.circuit, gc.circuit_from_json, "generalized circuit")
    art = compile_gcircuit(circ, args.eps, args.counterparty_free)
    return art.to_json(), EXIT_OK


def _values(path):
    return _parse(path, lambda d: {k: nc.as_rational(v) for k, v in d["values"].items()}, "circuit values")


def cmd_embed(args):
    art = _parse(args.artifact, CompiledArtifact.from_json, "compiled artifact")
    return _rates(embed_gc_solution(art, _values(args.values))), EXIT_OK


def cmd_extract(args):
    art = _parse(args.artifact, CompiledArtifact.from_json, "compiled artifact")
    D = _parse(args.defaults, lambda d: list(d["default_set"]), "default set")
    return gc.discrete_to_json(extract_discrete(art, D)), EXIT_OK


def cmd_gc_check(args):
    circ = _parse(args.circuit, gc.circuit_from_json, "generalized circuit")
    rep = gc.gc_is_eps_solution(circ, _values(args.values), args.eps)
    payload = {
        "verdict": rep.verdict,
        "eps": _rat(rep.eps),
        "failing": rep.failing,
        "range_violations": list(rep.range_violations),
        "gates": [{"gate": c.gate, "ok": c.ok, "detail": c.detail} for c in rep.gates],
    }
    return payload, EXIT_OK if rep.verdict else EXIT_FALSE


def cmd_gc_reconstruct(args):
    circ = _parse(args.circuit, gc.circuit_from_json, "generalized circuit")
    d = _parse(args.discrete, gc.discrete_from_json, "discrete assignment")
    x = gc.gc_lfp_reconstruct(circ, d, args.eps)
    if isinstance(x, Infeasible):
        return {"feasible": False, "phase1_value": _rat(x.phase1_value)}, EXIT_FALSE
    return {
        "feasible": True,
        "values": {v: nc.fmt_rational(x[v]) for v in circ.nodes},
        "approx": {v: nc.decimal12(x[v]) for v in circ.nodes},
    }, EXIT_OK


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise SchemaError("argv", message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cdsclear", description="Clearing and reductions for debt/CDS financial networks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def eps_arg(sp, default=Fraction(1, 1000)):
        sp.add_argument("--eps", type=_eps, default=default, help="tolerance, rational (default 1/1000)")

    s = sub.add_parser("validate", help="sanity and non-degeneracy checks")
    s.add_argument("file")
    s.add_argument("--strict", action="store_true", help="treat non-degeneracy violations as fatal")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("solve", help="compute an (eps-)solution")
    s.add_argument("file")
    s.add_argument("--method", choices=["iterate", "fictitious", "decomposed", "grid"], default="iterate")
    eps_arg(s)
    s.add_argument("--grid-step", type=_eps, default=Fraction(1, 100))
    s.add_argument("--free", default=None, help="comma-separated banks to grid over")
    s.add_argument("--pin", type=_assignments, default={}, help="bank=rate,... fixed during the grid search")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("check", help="is a rate vector an eps-solution?")
    s.add_argument("file")
    s.add_argument("--rates", required=True)
    eps_arg(s)
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("defaults", help="largest default set compatible with an eps-solution")
    s.add_argument("file")
    s.add_argument("--rates", required=True)
    eps_arg(s)
    s.set_defaults(func=cmd_defaults)

    s = sub.add_parser("compile-bool", help="compile a NAND circuit into a financial system")
    s.add_argument("circuit")
    s.add_argument("--alpha", type=_eps, default=Fraction(1))
    s.add_argument("--beta", type=_eps, default=Fraction(1))
    s.add_argument("--destroyer", action="store_true", help="attach the SAT-destroyer to the output")
    s.add_argument("--counterparty-free", action="store_true")
    s.set_defaults(func=cmd_compile_bool)

    s = sub.add_parser("witness", help="exact solution of a compiled Boolean circuit for an assignment")
    s.add_argument("artifact")
    s.add_argument("--assign", type=_assignments, required=True, help="x=0,y=1,...")
    s.set_defaults(func=cmd_witness)

    s = sub.add_parser("compile-gc", help="compile a generalized circuit into a financial system")
    s.add_argument("circuit")
    eps_arg(s)
    s.add_argument("--counterparty-free", action="store_true")
    s.set_defaults(func=cmd_compile_gc)

    s = sub.add_parser("embed", help="network solution from an exact circuit solution")
    s.add_argument("artifact")
    s.add_argument("--values", required=True)
    s.set_defaults(func=cmd_embed)

    s = sub.add_parser("extract", help="discrete circuit states from a default set")
    s.add_argument("artifact")
    s.add_argument("--defaults", required=True)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("gc-check", help="is an assignment an eps-solution of a generalized circuit?")
    s.add_argument("circuit")
    s.add_argument("--values", required=True)
    eps_arg(s)
    s.set_defaults(func=cmd_gc_check)

    s = sub.add_parser("gc-reconstruct", help="continuous eps-solution compatible with discrete states")
    s.add_argument("circuit")
    s.add_argument("--discrete", required=True)
    eps_arg(s)
    s.set_defaults(func=cmd_gc_reconstruct)
    return p


def run(argv=None) -> tuple:
    """Parse and dispatch; returns (payload, exit code) without printing."""
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except SchemaError as e:
        return {"error": "usage", "pointer": e.pointer, "message": str(e)}, EXIT_USAGE
    except PreconditionError as e:
        return {"error": "precondition", "type": type(e).__name__, "message": str(e)}, EXIT_PRECONDITION
    except InternalConsistencyError as e:
        return {"error": "internal", "type": type(e).__name__, "message": str(e)}, EXIT_INTERNAL


def main(argv=None) -> int:
    payload, code = run(argv)
    if "error" in payload:
        print(f"cdsclear: {payload['message']}", file=sys.stderr)
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
