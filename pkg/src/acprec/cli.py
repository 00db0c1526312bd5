"""Command-line entry point.

Subcommands:

    analyze   error bounds for explicit formats (and optional width sweeps)
    search    minimal bit-widths for both families, energy-based selection
    validate  seeded random trials checking observed error against the bound
    genhw     Verilog + netlist JSON + netlist-vs-emulator equivalence check

All randomized behaviour is driven by --seed, reports are JSON with sorted
keys and no timestamps, so identical invocations produce identical bytes.
Exit codes: 0 ok, 2 input error, 3 infeasible, 4 validation violation.
Set PROBLP_LOG=debug|info|warning|error to control logging verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
from pathlib import Path

from mpmath import mpf

from ._exact import ZERO
from .arith import FixedPoint, FloatPoint, LowPrecEvaluator, NumberFormat
from .bounds import CircuitAnalysis, ErrorKind, QuerySpec, QueryType, query_bound
from .circuit import ArithmeticCircuit, Evidence, compile_naive_ac, evaluate_exact, parse_ac, parse_bn
from .energy import EnergyModel, operator_counts
from .errors import AcprecError, InfeasibleError, RangeOverflowError, RangeUnderflowError
from .hwgen import NetlistSimulator, build_netlist, emit_verilog
from .search import (
    DEFAULT_CAP,
    select_representation,
    size_exponent_bits,
    size_integer_bits,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_VIOLATION = 4

REPORT_SCHEMA = "acprec-report/1"
DEFAULT_ENUM_CAP = 1 << 20

log = logging.getLogger("acprec")


class _CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


def _setup_logging() -> None:
    level_name = os.environ.get("PROBLP_LOG", "warning").lower()
    levels = {"debug": logging.DEBUG, "info": logging.INFO, "warning": logging.WARNING, "error": logging.ERROR}
    if level_name not in levels:
        log.warning("unknown PROBLP_LOG value %r, using warning", level_name)
    logging.basicConfig(level=levels.get(level_name, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _parse_pair(text: str, flag: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise _CliError(f"{flag} expects two comma-separated integers, got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise _CliError(f"{flag} expects integers, got {text!r}") from None


def _load_circuit(args) -> tuple[ArithmeticCircuit, str]:
    if bool(args.ac) == bool(args.bn):
        raise _CliError("exactly one of --ac or --bn must be given")
    path = Path(args.ac or args.bn)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise _CliError(f"cannot read {path}: {exc}") from None
    if args.ac:
        ac = parse_ac(text)
    else:
        ac = compile_naive_ac(parse_bn(text), cap=args.enum_cap)
    log.info("loaded circuit from %s: %d nodes, %d variables", path, len(ac.nodes), len(ac.variables))
    return ac, path.stem


def _query_spec(args, need_tolerance: bool) -> QuerySpec:
    if args.query is None or args.error is None:
        raise _CliError("--query and --error are required for this command")
    if need_tolerance and args.tol is None:
        raise _CliError("--tol is required for this command")
    return QuerySpec(QueryType(args.query), ErrorKind(args.error), args.tol)


def _formats_from_args(args) -> tuple[FixedPoint | None, FloatPoint | None]:
    fixed = floating = None
    if args.fixed:
        i, f = _parse_pair(args.fixed, "--fixed")
        fixed = FixedPoint(i, f)
    if getattr(args, "float"):
        e, m = _parse_pair(getattr(args, "float"), "--float")
        floating = FloatPoint(e, m)
    return fixed, floating


def _energy_model(args) -> EnergyModel:
    if args.energy_model:
        return EnergyModel.from_json_file(args.energy_model)
    return EnergyModel()


def _circuit_summary(ac: ArithmeticCircuit, analysis: CircuitAnalysis) -> dict:
    adds, muls = operator_counts(ac)
    return {
        "nodes": len(ac.nodes),
        "variables": len(ac.variables),
        "adds": adds,
        "muls": muls,
        "root_max": float(analysis.root_max),
        "root_min_pos": float(analysis.root_min_pos),
        "root_count": analysis.root_count,
        "peak_max": float(analysis.peak_max),
        "min_positive": float(analysis.min_positive),
    }


def _emit_report(report: dict, args) -> None:
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if getattr(args, "out", None):
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{report['command']}-report.json").write_text(text + "\n", encoding="utf-8")


def _random_evidence(rng: random.Random, ac: ArithmeticCircuit) -> Evidence:
    assign = {}
    for i, var in enumerate(ac.variables):
        if rng.random() < 1 / 3:
            continue
        assign[i] = rng.randrange(var.cardinality)
    return Evidence(assign)


# ---------------------------------------------------------------------------
# analyze


def cmd_analyze(args) -> int:
    ac, _ = _load_circuit(args)
    spec = _query_spec(args, need_tolerance=False)
    analysis = CircuitAnalysis(ac)
    fixed, floating = _formats_from_args(args)
    if fixed is None and floating is None and args.sweep is None:
        raise _CliError("analyze needs --fixed, --float, or --sweep")

    report: dict = {
        "schema": REPORT_SCHEMA,
        "command": "analyze",
        "circuit": _circuit_summary(ac, analysis),
        "query": {"query": spec.query.value, "error": spec.error_kind.value},
        "fixed": None,
        "float": None,
        "sweep": None,
    }
    if fixed is not None:
        report["fixed"] = query_bound(analysis, fixed, spec).to_json_dict()
    if floating is not None:
        report["float"] = query_bound(analysis, floating, spec).to_json_dict()
    if args.sweep is not None:
        lo, hi = _parse_pair(args.sweep, "--sweep")
        if not 0 < lo <= hi:
            raise _CliError(f"--sweep expects 0 < LO <= HI, got {args.sweep!r}")
        rows = []
        for width in range(lo, hi + 1):
            row: dict = {"width": width, "fixed": None, "float": None}
            try:
                fmt = FixedPoint(size_integer_bits(analysis, width), width)
                row["fixed"] = query_bound(analysis, fmt, spec).to_json_dict()
            except (InfeasibleError, AcprecError):
                pass
            try:
                fmt = FloatPoint(size_exponent_bits(analysis, width), width)
                row["float"] = query_bound(analysis, fmt, spec).to_json_dict()
            except (InfeasibleError, AcprecError):
                pass
            rows.append(row)
        report["sweep"] = rows
    _emit_report(report, args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# search


def cmd_search(args) -> int:
    ac, _ = _load_circuit(args)
    spec = _query_spec(args, need_tolerance=True)
    analysis = CircuitAnalysis(ac)
    model = _energy_model(args)
    try:
        result = select_representation(analysis, spec, cap=args.cap, model=model)
    except InfeasibleError as exc:
        report = {
            "schema": REPORT_SCHEMA,
            "command": "search",
            "circuit": _circuit_summary(ac, analysis),
            "query": {"query": spec.query.value, "error": spec.error_kind.value, "tolerance": spec.tolerance},
            "result": None,
            "infeasible": str(exc),
        }
        _emit_report(report, args)
        return EXIT_INFEASIBLE
    report = {
        "schema": REPORT_SCHEMA,
        "command": "search",
        "circuit": _circuit_summary(ac, analysis),
        "query": {"query": spec.query.value, "error": spec.error_kind.value, "tolerance": spec.tolerance},
        "result": result.to_json_dict(),
        "infeasible": None,
    }
    _emit_report(report, args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate


def _observed_errors(
    ac: ArithmeticCircuit,
    fmt: NumberFormat,
    spec: QuerySpec,
    trials: int,
    rng: random.Random,
) -> dict:
    """Seeded random-evidence trials; returns observed error statistics."""
    evaluator = LowPrecEvaluator(ac, fmt)
    conditional = spec.query is QueryType.CONDITIONAL
    checked = skipped = range_failures = 0
    max_abs = max_rel = ZERO
    sum_abs = sum_rel = ZERO
    rel_checked = 0
    for _ in range(trials):
        ev = _random_evidence(rng, ac)
        try:
            if conditional:
                free = [i for i in range(len(ac.variables)) if i not in ev]
                if not free:
                    skipped += 1
                    continue
                q_var = rng.choice(free)
                q_state = rng.randrange(ac.variables[q_var].cardinality)
                joint = Evidence(dict(ev) | {q_var: q_state})
                exact_den = evaluate_exact(ac, ev)
                if exact_den == ZERO:
                    skipped += 1
                    continue
                exact = evaluate_exact(ac, joint) / exact_den
                em_den = evaluator.evaluate(ev)[0].to_mpf()
                if em_den == ZERO:
                    skipped += 1
                    continue
                emulated = evaluator.evaluate(joint)[0].to_mpf() / em_den
            else:
                exact = evaluate_exact(ac, ev)
                emulated = evaluator.evaluate(ev)[0].to_mpf()
        except (RangeOverflowError, RangeUnderflowError):
            range_failures += 1
            continue
        err = abs(emulated - exact)
        checked += 1
        sum_abs += err
        if err > max_abs:
            max_abs = err
        if exact > ZERO:
            rel = err / exact
            rel_checked += 1
            sum_rel += rel
            if rel > max_rel:
                max_rel = rel
    return {
        "trials": trials,
        "checked": checked,
        "skipped": skipped,
        "range_failures": range_failures,
        "max_abs": float(max_abs),
        "mean_abs": float(sum_abs / checked) if checked else 0.0,
        "max_rel": float(max_rel),
        "mean_rel": float(sum_rel / rel_checked) if rel_checked else 0.0,
        "rel_checked": rel_checked,
        "_max_abs_mpf": max_abs,
        "_max_rel_mpf": max_rel,
    }


def _validate_format(ac, analysis, fmt, spec, trials, rng) -> tuple[dict, bool]:
    bound_report = query_bound(analysis, fmt, spec)
    if not bound_report.feasible:
        raise InfeasibleError(bound_report.reason)
    stats = _observed_errors(ac, fmt, spec, trials, rng)
    observed = stats["_max_rel_mpf"] if spec.error_kind is ErrorKind.RELATIVE else stats["_max_abs_mpf"]
    bound = bound_report.bound
    ok = stats["range_failures"] == 0 and observed <= bound
    doc = {
        "format": bound_report.to_json_dict()["format"],
        "bound": float(bound),
        "observed": float(observed),
        "margin": float(bound - observed),
        "ok": ok,
        "stats": {k: v for k, v in stats.items() if not k.startswith("_")},
    }
    return doc, ok


def cmd_validate(args) -> int:
    ac, _ = _load_circuit(args)
    analysis = CircuitAnalysis(ac)
    fixed, floating = _formats_from_args(args)
    rng = random.Random(args.seed)

    sweeps = []
    singles = []
    all_ok = True
    if args.sweep is not None:
        spec = _query_spec(args, need_tolerance=False)
        lo, hi = _parse_pair(args.sweep, "--sweep")
        if not 0 < lo <= hi:
            raise _CliError(f"--sweep expects 0 < LO <= HI, got {args.sweep!r}")
        for width in range(lo, hi + 1):
            row: dict = {"width": width, "fixed": None, "float": None}
            for family in ("fixed", "float"):
                try:
                    if family == "fixed":
                        fmt: NumberFormat = FixedPoint(size_integer_bits(analysis, width), width)
                    else:
                        fmt = FloatPoint(size_exponent_bits(analysis, width), width)
                    doc, ok = _validate_format(ac, analysis, fmt, spec, args.trials, rng)
                    row[family] = doc
                    all_ok = all_ok and ok
                except (InfeasibleError, AcprecError) as exc:
                    row[family] = {"infeasible": str(exc)}
            sweeps.append(row)
    else:
        if fixed is None and floating is None:
            spec = _query_spec(args, need_tolerance=True)
            result = select_representation(analysis, spec, cap=args.cap, model=_energy_model(args))
            chosen = result.selected_candidate.fmt
            if isinstance(chosen, FixedPoint):
                fixed = chosen
            else:
                floating = chosen
        else:
            spec = _query_spec(args, need_tolerance=False)
        for fmt in (fixed, floating):
            if fmt is None:
                continue
            doc, ok = _validate_format(ac, analysis, fmt, spec, args.trials, rng)
            singles.append(doc)
            all_ok = all_ok and ok

    report = {
        "schema": REPORT_SCHEMA,
        "command": "validate",
        "circuit": _circuit_summary(ac, analysis),
        "query": {"query": spec.query.value, "error": spec.error_kind.value, "tolerance": spec.tolerance},
        "seed": args.seed,
        "trials": args.trials,
        "formats": singles or None,
        "sweep": sweeps or None,
        "ok": all_ok,
    }
    _emit_report(report, args)
    return EXIT_OK if all_ok else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# genhw


def cmd_genhw(args) -> int:
    ac, name = _load_circuit(args)
    fixed, floating = _formats_from_args(args)
    if fixed is not None and floating is not None:
        raise _CliError("genhw takes exactly one of --fixed or --float")
    fmt: NumberFormat | None = fixed or floating
    if fmt is None:
        spec = _query_spec(args, need_tolerance=True)
        result = select_representation(ac, spec, cap=args.cap, model=_energy_model(args))
        fmt = result.selected_candidate.fmt

    netlist = build_netlist(ac, fmt)
    verilog = emit_verilog(netlist, module_name=args.module)

    rng = random.Random(args.seed)
    evaluator = LowPrecEvaluator(ac, fmt)
    vectors = [_random_evidence(rng, ac) for _ in range(args.vectors)]
    sim_out = NetlistSimulator(netlist).run(vectors)
    mismatches = 0
    for ev, raw in zip(vectors, sim_out):
        root, _ = evaluator.evaluate(ev)
        expect = root.raw if isinstance(fmt, FixedPoint) else root.pack()
        if expect != raw:
            mismatches += 1
    equivalent = mismatches == 0

    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    v_path = out_dir / f"{name}.v"
    n_path = out_dir / f"{name}.netlist.json"
    v_path.write_text(verilog, encoding="utf-8")
    n_path.write_text(json.dumps(netlist.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    report = {
        "schema": REPORT_SCHEMA,
        "command": "genhw",
        "verilog": str(v_path),
        "netlist": str(n_path),
        "module": args.module,
        "format": netlist.to_json_dict()["format"],
        "latency": netlist.latency,
        "cells": len(netlist.cells),
        "vectors": args.vectors,
        "seed": args.seed,
        "equivalent": equivalent,
        "mismatches": mismatches,
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    (out_dir / f"{name}.summary.json").write_text(text + "\n", encoding="utf-8")
    return EXIT_OK if equivalent else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="acprec",
        description="Precision analysis, bit-width search, and RTL generation for arithmetic circuits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, with_sweep: bool = False) -> None:
        p.add_argument("--ac", help="arithmetic circuit file")
        p.add_argument("--bn", help="Bayesian network JSON (naively compiled to a circuit)")
        p.add_argument("--query", choices=[q.value for q in QueryType])
        p.add_argument("--error", choices=[e.value for e in ErrorKind])
        p.add_argument("--tol", type=float, help="error tolerance in (0,1)")
        p.add_argument("--fixed", metavar="I,F", help="fixed-point format")
        p.add_argument("--float", metavar="E,M", help="minifloat format")
        p.add_argument("--cap", type=int, default=DEFAULT_CAP, help="search width cap (default 64)")
        p.add_argument("--energy-model", help="JSON file overriding energy coefficients")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized steps")
        p.add_argument("--out", help="output directory")
        p.add_argument("--enum-cap", type=int, default=DEFAULT_ENUM_CAP,
                       help="max joint-instantiation count for naive BN compilation")
        if with_sweep:
            p.add_argument("--sweep", metavar="LO,HI", help="sweep fraction/mantissa widths")

    p = sub.add_parser("analyze", help="error bounds for explicit formats")
    common(p, with_sweep=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("search", help="minimal widths and representation selection")
    common(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("validate", help="random-trial check of observed error against the bound")
    common(p, with_sweep=True)
    p.add_argument("--trials", type=int, default=500, help="random evidence trials (default 500)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("genhw", help="emit Verilog, netlist JSON, and an equivalence summary")
    common(p)
    p.add_argument("--vectors", type=int, default=1000, help="equivalence-check vectors (default 1000)")
    p.add_argument("--module", default="ac_top", help="Verilog module name (default ac_top)")
    p.set_defaults(func=cmd_genhw)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except AcprecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
