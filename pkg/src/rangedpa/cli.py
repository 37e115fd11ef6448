"""Command-line interface.

Exit status: 0 TRUE / VALID, 1 FALSE / INVALID, 2 UNKNOWN, 3 usage or IO error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path as FsPath
from typing import Any, Dict, List, Optional, Sequence

from . import __version__
from .cpa_core import Budget, Verdict
from .domains import ANALYSES
from .frontend import Cfa, ProgramError, load_cfa
from .orchestrator import SequentialExecutor, ThreadExecutor, run_ranged_program_analysis
from .semantics import DomainTooLarge, enumerate_paths
from .solver import make_solver
from .solver.smtlib import ENV_VAR, default_command
from .splitter import SplitResult, parse_splitter
from .witness import (
    ValidationStatus,
    WitnessError,
    join_all,
    load_witness,
    save_witness,
    validate_witness,
)

EXIT = {Verdict.TRUE: 0, Verdict.FALSE: 1, Verdict.UNKNOWN: 2}
EXIT_USAGE = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2, which means UNKNOWN here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _bound(text: str) -> Optional[int]:
    if text.lower() == "none":
        return None
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'none', got {text!r}") from None
    if n < 0:
        raise argparse.ArgumentTypeError("bound must be non-negative")
    return n


def _domain(args) -> Optional[tuple]:
    return None if args.bound is None else (-args.bound, args.bound)


def _solver_factory(args):
    if args.solver == "external":
        command = default_command()
        if command is None:
            raise UsageError(f"no external solver: set {ENV_VAR} or put z3 on PATH")
        return lambda: make_solver("external", command, args.solver_timeout)
    return lambda: make_solver("internal")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bound", type=_bound, default=8, metavar="N|none",
                   help="inputs range over [-N, N] (default 8); 'none' leaves them unbounded")
    p.add_argument("--solver", choices=("internal", "external"), default="internal")
    p.add_argument("--solver-timeout", type=float, default=30.0, help=argparse.SUPPRESS)


def _add_split(p: argparse.ArgumentParser) -> None:
    p.add_argument("--split", default="lb:3", metavar="lb:K|rdm|rdm9|none",
                   help="splitter (default lb:3); lb:K1,K2 gives several cuts")
    p.add_argument("--seed", type=int, default=None, help="seed for the random splitters")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rangedpa", description="Ranged program analysis for a small imperative language.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", help="split, analyse the ranges, aggregate")
    v.add_argument("program")
    _add_split(v)
    v.add_argument("--test-case", action="append", default=[], metavar="FILE",
                   help="use these test cases (JSON objects) as cuts instead of a splitter")
    v.add_argument("--analyses", required=True, help=f"comma list from: {', '.join(ANALYSES)}")
    v.add_argument("--steal", action="store_true", help="enable work stealing")
    v.add_argument("--timeout", type=float, default=60.0, help="wall-clock seconds per analysis run")
    v.add_argument("--max-states", type=int, default=1_000_000)
    v.add_argument("--out", default="rangedpa-out", help="directory for report.json and witness/violation files")
    v.add_argument("--workers-deterministic", action="store_true",
                   help="run workers one at a time (replayable, no timings in the report)")
    v.add_argument("--arrival-log", metavar="FILE",
                   help="arrival order to replay: a JSON list of job labels or an earlier report.json")
    _add_common(v)

    s = sub.add_parser("split", help="print the splitter's test cases")
    s.add_argument("program")
    _add_split(s)
    s.add_argument("--out", help="directory to write tc-<i>.json files into")
    _add_common(s)

    j = sub.add_parser("join-witness", help="join correctness witnesses")
    j.add_argument("witnesses", nargs="+")
    j.add_argument("--program", required=True)
    j.add_argument("--out", default="-", help="output file ('-' for stdout)")
    j.add_argument("--solver", choices=("internal", "external"), default="internal")
    j.add_argument("--solver-timeout", type=float, default=30.0, help=argparse.SUPPRESS)

    c = sub.add_parser("validate-witness", help="check a correctness witness")
    c.add_argument("witness")
    c.add_argument("--program", required=True)
    c.add_argument("--solver", choices=("internal", "external"), default="internal")
    c.add_argument("--solver-timeout", type=float, default=30.0, help=argparse.SUPPRESS)

    e = sub.add_parser("enumerate", help="list every path over the bounded input domain")
    e.add_argument("program")
    e.add_argument("--bound", type=_bound, default=8, metavar="N")
    e.add_argument("--cap", type=int, default=100_000)
    return parser


def _load_program(path: str) -> Cfa:
    try:
        return load_cfa(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except ProgramError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _read_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc})") from exc


def _write_json(path: FsPath, data: Any) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_split(cfa: Cfa, args, solver) -> Optional[SplitResult]:
    try:
        fn = parse_splitter(args.split)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if fn is None:
        return None
    if args.split.strip().lower().startswith("rdm") and args.seed is None:
        raise UsageError("random splitters need --seed")
    return fn(cfa, solver, _domain(args), args.seed)


def _test_cases(cfa: Cfa, paths: Sequence[str]) -> SplitResult:
    cases = []
    for p in paths:
        data = _read_json(p)
        if not isinstance(data, dict) or not all(isinstance(v, int) for v in data.values()):
            raise UsageError(f"{p}: a test case is a JSON object of integers")
        unknown = sorted(set(data) - set(cfa.inputs))
        if unknown:
            raise UsageError(f"{p}: {unknown[0]!r} is not an input")
        cases.append(data)
    return SplitResult(cases, diagnostics={"splitter": "given"})


def _arrival_log(path: Optional[str]) -> Optional[List[str]]:
    if path is None:
        return None
    data = _read_json(path)
    if isinstance(data, dict):
        data = data.get("arrival_log")
    if not isinstance(data, list) or not all(isinstance(x, str) for x in data):
        raise UsageError(f"{path}: expected a list of job labels")
    return data


def cmd_verify(args) -> int:
    cfa = _load_program(args.program)
    analyses = [a.strip() for a in args.analyses.split(",") if a.strip()]
    bad = [a for a in analyses if a not in ANALYSES]
    if not analyses or bad:
        raise UsageError(f"unknown analysis {bad[0]!r}" if bad else "--analyses is empty")
    factory = _solver_factory(args)
    split = _test_cases(cfa, args.test_case) if args.test_case else _run_split(cfa, args, factory())
    deterministic = args.workers_deterministic or args.arrival_log is not None
    executor = SequentialExecutor(_arrival_log(args.arrival_log)) if deterministic else ThreadExecutor()
    report = run_ranged_program_analysis(
        cfa,
        analyses,
        split,
        Budget(args.timeout, args.max_states),
        steal=args.steal,
        domain=_domain(args),
        solver_factory=factory,
        executor=executor,
    )
    out = FsPath(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        data = report.to_json(timings=not deterministic)
        data["program"] = os.path.basename(args.program)
        data["program_hash"] = cfa.program_hash
        _write_json(out / "report.json", data)
        if report.witness is not None:
            save_witness(report.witness, out / "witness.json")
            for o in report.outcomes:
                if o.witness is not None:
                    save_witness(o.witness, out / f"witness-r{o.index}.json")
        if report.violation is not None:
            v = report.violation
            _write_json(out / "violation.json", {
                "test_case": v.test_case,
                "edges": [list(e.id) for e in v.path.edges],
                "trace": [str(e) for e in v.path.edges],
                "range": v.range_index,
                "producer": v.producer,
            })
    except OSError as exc:
        raise UsageError(f"cannot write to {out}: {exc.strerror or exc}") from exc
    print(f"verdict: {report.verdict.value}")
    for o in report.outcomes:
        print(f"  range {o.index}: {o.verdict.value} by {o.analysis or '-'}{' (stolen)' if o.stolen else ''}")
    if report.validation is not None:
        print(f"  witness: {report.validation} ({report.witness_source})")
    if report.violation is not None:
        print(f"  counterexample: {json.dumps(report.violation.test_case, sort_keys=True)}")
    return EXIT[report.verdict]


def cmd_split(args) -> int:
    cfa = _load_program(args.program)
    result = _run_split(cfa, args, _solver_factory(args)())
    if result is None:
        print(json.dumps({"test_cases": [], "failed": False, "splitter": "none"}))
        return 0
    print(json.dumps({"test_cases": result.test_cases, "failed": result.failed, "reason": result.reason,
                      "diagnostics": result.diagnostics}, sort_keys=True))
    if args.out:
        out = FsPath(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for i, tc in enumerate(result.test_cases):
            _write_json(out / f"tc-{i}.json", tc)
    return 0 if not result.failed else 2


def cmd_join(args) -> int:
    cfa = _load_program(args.program)
    witnesses = [_load_witness(p, cfa) for p in args.witnesses]
    try:
        joined = join_all(cfa, witnesses, _solver_factory(args)())
    except WitnessError as exc:
        raise UsageError(str(exc)) from exc
    if args.out == "-":
        from .witness import witness_to_json

        json.dump(witness_to_json(joined), sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        save_witness(joined, args.out)
    return 0


def _load_witness(path: str, cfa: Cfa):
    try:
        return load_witness(path, cfa.variables)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except (WitnessError, json.JSONDecodeError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def cmd_validate(args) -> int:
    cfa = _load_program(args.program)
    w = _load_witness(args.witness, cfa)
    try:
        result = validate_witness(cfa, w, _solver_factory(args)())
    except WitnessError as exc:
        raise UsageError(str(exc)) from exc
    print(result)
    return {ValidationStatus.VALID: 0, ValidationStatus.INVALID: 1, ValidationStatus.UNKNOWN: 2}[result.status]


def cmd_enumerate(args) -> int:
    cfa = _load_program(args.program)
    if args.bound is None:
        raise UsageError("enumerate needs a finite --bound")
    try:
        paths = enumerate_paths(cfa, (-args.bound, args.bound), cap=args.cap)
    except DomainTooLarge as exc:
        raise UsageError(str(exc)) from exc
    for i, p in enumerate(paths):
        tc = {x: p.states[0][x] for x in cfa.inputs}
        flag = " ERROR" if p.reaches_error else ""
        print(f"{i:4d} {json.dumps(tc, sort_keys=True)} len={len(p)}{flag}  {' '.join(f'{a}.{b}' for a, b in p.edge_ids)}")
    return 0


COMMANDS = {
    "verify": cmd_verify,
    "split": cmd_split,
    "join-witness": cmd_join,
    "validate-witness": cmd_validate,
    "enumerate": cmd_enumerate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"rangedpa: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
