"""Command-line front end: run, bench, verify, enumerate, dump-abstract.

Exit codes: 0 failure proven / certificate verified, 1 no proof at the
tried sizes, 2 budget exceeded, 3 usage or parse errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .abduce import AbduceOptions, solve as abduce_solve
from .abstraction import abstract_compile, dump_abstract, table_to_preinterp
from .constraint import ConstraintOptions, solve_constraint
from .leastmodel import (
    CertificateError,
    format_certificate,
    make_certificate,
    parse_certificate,
    verify_certificate,
)
from .oracle import SpaceTooLarge, enumerate_preinterps, find_failing
from .preinterp import PartialPreInterpretation
from .runtime import EngineTimeout
from .syntax import ParseError, parse_program

__all__ = ["main", "run", "bench", "RunConfig", "RunReport", "load_manifest"]

EXIT_PROVEN = 0
EXIT_NO_PROOF = 1
EXIT_TIMEOUT = 2
EXIT_USAGE = 3

TIMING_FIELDS = ("wall_time_s",)  # excluded from determinism comparisons


@dataclass
class RunConfig:
    path: str
    query: Optional[str] = None
    engine: str = "abduce"
    solver: str = "abductive"
    min_domain_size: int = 1
    max_domain_size: int = 3
    symmetry: bool = True
    intelligent_backtracking: bool = True
    seed_order: str = "fifo"
    timeout: float = 120.0
    certificate_path: Optional[str] = None
    enumeration_cap: int = 2**24
    dump_encoding: bool = False
    source_text: Optional[str] = None  # overrides path when given


@dataclass
class RunReport:
    verdict: str  # FailureProven | NoProofAtSizes | Timeout
    proven_at: Optional[int] = None
    certificate_path: Optional[str] = None
    wall_time_s: float = 0.0
    per_size: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return {
            "FailureProven": EXIT_PROVEN,
            "NoProofAtSizes": EXIT_NO_PROOF,
            "Timeout": EXIT_TIMEOUT,
        }[self.verdict]


def _load(config: RunConfig):
    text = config.source_text
    if text is None:
        text = Path(config.path).read_text()
    program, query = parse_program(text, config.query)
    return program, query


def _solve_at(ap, aquery, n, config: RunConfig, remaining: float):
    if config.engine == "abduce":
        return abduce_solve(
            ap,
            aquery,
            n,
            AbduceOptions(
                intelligent_backtracking=config.intelligent_backtracking,
                symmetry=config.symmetry,
                seed_order=config.seed_order,
                timeout=remaining,
            ),
        )
    if config.engine == "constraint":
        return solve_constraint(
            ap,
            aquery,
            n,
            ConstraintOptions(
                solver=config.solver,
                timeout=remaining,
                dump_encoding=config.dump_encoding,
            ),
        )
    raise ValueError(f"unknown engine {config.engine!r}")


def run(config: RunConfig) -> RunReport:
    """Iterative deepening over domain sizes; certificates are self-verified
    before a failure proof is reported."""
    program, query = _load(config)
    started = time.monotonic()
    deadline = started + config.timeout
    report = RunReport(verdict="NoProofAtSizes")

    if config.engine == "enumerate":
        for n in range(config.min_domain_size, config.max_domain_size + 1):
            t0 = time.monotonic()
            if t0 > deadline:
                report.verdict = "Timeout"
                break
            witness = find_failing(program, query, n, cap=config.enumeration_cap)
            entry = {"domain_size": n, "failing_found": witness is not None,
                     "wall_time_s": round(time.monotonic() - t0, 6)}
            report.per_size.append(entry)
            if witness is not None:
                _certify(report, program, query, witness, config)
                report.proven_at = n
                break
        report.wall_time_s = time.monotonic() - started
        return report

    ap, aquery = abstract_compile(program, query)
    for n in range(config.min_domain_size, config.max_domain_size + 1):
        t0 = time.monotonic()
        remaining = deadline - t0
        if remaining <= 0:
            report.verdict = "Timeout"
            break
        try:
            outcome = _solve_at(ap, aquery, n, config, remaining)
        except EngineTimeout:
            report.verdict = "Timeout"
            report.per_size.append({"domain_size": n, "verdict": "timeout"})
            break
        entry = {
            "domain_size": n,
            "verdict": "solution" if outcome.is_solution else "exhausted",
            "wall_time_s": round(time.monotonic() - t0, 6),
        }
        entry.update(outcome.stats.as_dict())
        report.per_size.append(entry)
        report.stats = _accumulate(report.stats, outcome.stats.as_dict())
        if outcome.is_solution:
            j = table_to_preinterp(outcome.solution, ap.signature, n)
            _certify(report, program, query, j, config)
            report.proven_at = n
            break
    report.wall_time_s = time.monotonic() - started
    return report


def _accumulate(acc: dict, stats: dict) -> dict:
    out = dict(acc)
    for k, v in stats.items():
        out[k] = out.get(k, 0) + v
    return out


def _certify(report: RunReport, program, query, j, config: RunConfig):
    cert = make_certificate(program, query, j)
    if not verify_certificate(program, query, cert):
        raise RuntimeError(
            "internal error: engine produced a pre-interpretation that fails "
            "independent verification"
        )
    report.verdict = "FailureProven"
    if config.certificate_path:
        Path(config.certificate_path).write_text(format_certificate(cert))
        report.certificate_path = config.certificate_path


# -- bench -------------------------------------------------------------------


def corpus_dir() -> Path:
    return Path(__file__).parent / "corpus"


def load_manifest(path: Optional[str] = None) -> dict:
    if path is None:
        return json.loads((corpus_dir() / "manifest.json").read_text())
    return json.loads(Path(path).read_text())


def bench(
    manifest: dict,
    engine: str = "abduce",
    solver: str = "abductive",
    include_all: bool = False,
    timeout: float = 120.0,
    out_path: Optional[str] = None,
    manifest_dir: Optional[Path] = None,
) -> list:
    """Run the corpus, emit an aligned table and line-delimited records.

    Per-program failures are isolated: a crash in one program is reported
    in its record and the suite continues.
    """
    base = manifest_dir or corpus_dir()
    records = []
    for entry in manifest["programs"]:
        if not include_all and not entry.get("default", True):
            continue
        rec = {
            "name": entry["name"],
            "file": entry["file"],
            "engine": engine,
            "solver": solver if engine == "constraint" else None,
            "domain_size": entry["domain_size"],
        }
        try:
            text = (base / entry["file"]).read_text()
            program, query = parse_program(text, entry.get("query"))
            ap, _ = abstract_compile(program, query)
            rec["clauses"] = len(program.clauses)
            rec["predicates"] = len(
                {cl.head.predicate for cl in program.clauses}
            )
            rec["size_pre"] = ap.signature.components_total(entry["domain_size"])
            cert_path = None
            if out_path:
                cert_path = str(Path(out_path).with_suffix("") ) + f".{entry['name']}.cert"
            config = RunConfig(
                path=str(base / entry["file"]),
                query=entry.get("query"),
                engine=engine,
                solver=solver,
                max_domain_size=entry["domain_size"],
                timeout=timeout,
                certificate_path=cert_path,
                source_text=text,
            )
            report = run(config)
            rec["verdict"] = report.verdict
            rec["proven_at"] = report.proven_at
            rec["certificate"] = report.certificate_path
            rec["wall_time_s"] = round(report.wall_time_s, 6)
            for k in ("backtracks", "table_backtracks", "solver_backtracks", "abductions"):
                rec[k] = report.stats.get(k, 0)
        except Exception as e:  # isolate per-program failures
            rec["verdict"] = "Error"
            rec["error"] = f"{type(e).__name__}: {e}"
        records.append(rec)
    if out_path:
        with open(out_path, "w") as f:
            for rec in records:
                f.write(json.dumps(rec, sort_keys=True) + "\n")
    return records


def format_bench_table(records: list) -> str:
    cols = ["name", "clauses", "predicates", "domain_size", "size_pre", "verdict",
            "wall_time_s", "backtracks", "table_backtracks"]
    header = ["program", "#clauses", "#pred", "size(dom)", "size(pre)", "verdict",
              "time(s)", "#bcktr", "#Tbcktr"]
    rows = [header]
    for rec in records:
        rows.append([str(rec.get(c, "")) for c in cols])
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for i, r in enumerate(rows):
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


# -- argument parsing -----------------------------------------------------------


def _add_common(p):
    p.add_argument("file", help="program file (Edinburgh-syntax definite clauses)")
    p.add_argument("--query", help="0-arity query predicate (default: main, else the last one)")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="prefail",
        description="Prove that a query on a definite logic program cannot succeed.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="search for a falsifying pre-interpretation")
    _add_common(p)
    p.add_argument("--engine", choices=["abduce", "constraint", "enumerate"], default="abduce")
    p.add_argument("--solver", choices=["abductive", "fd"], default="abductive")
    p.add_argument("--domain-size", type=int, help="search exactly this domain size")
    p.add_argument("--max-domain-size", type=int, default=3,
                   help="iterative deepening up to this size (default 3)")
    p.add_argument("--timeout", type=float, default=120.0)
    p.add_argument("--stats", action="store_true")
    p.add_argument("--seed-order", choices=["fifo", "lifo"], default="fifo")
    p.add_argument("--no-symmetry", action="store_true")
    p.add_argument("--no-intelligent-backtracking", action="store_true")
    p.add_argument("--certificate", help="write the failure certificate here")
    p.add_argument("--dump-encoding", action="store_true",
                   help="print the finite-domain encoding at each consistency check")
    p.add_argument("--cap", type=int, default=2**24, help="enumeration cap")

    p = sub.add_parser("bench", help="run the benchmark corpus")
    p.add_argument("--manifest", help="manifest path (default: bundled corpus)")
    p.add_argument("--engine", choices=["abduce", "constraint"], default="abduce")
    p.add_argument("--solver", choices=["abductive", "fd"], default="abductive")
    p.add_argument("--all", action="store_true", help="include long-running programs")
    p.add_argument("--timeout", type=float, default=120.0, help="per-program budget")
    p.add_argument("--out", help="write line-delimited records here")

    p = sub.add_parser("verify", help="check a failure certificate")
    _add_common(p)
    p.add_argument("--certificate", required=True)

    p = sub.add_parser("enumerate", help="brute-force count failing pre-interpretations")
    _add_common(p)
    p.add_argument("--domain-size", type=int, required=True)
    p.add_argument("--cap", type=int, default=2**24)
    p.add_argument("--count-only", action="store_true")

    p = sub.add_parser("dump-abstract", help="print the abstracted DATALOG program")
    _add_common(p)
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SpaceTooLarge as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


def _dispatch(args) -> int:
    if args.command == "run":
        lo = args.domain_size or 1
        hi = args.domain_size or args.max_domain_size
        config = RunConfig(
            path=args.file,
            query=args.query,
            engine=args.engine,
            solver=args.solver,
            min_domain_size=lo,
            max_domain_size=hi,
            symmetry=not args.no_symmetry,
            intelligent_backtracking=not args.no_intelligent_backtracking,
            seed_order=args.seed_order,
            timeout=args.timeout,
            certificate_path=args.certificate,
            enumeration_cap=args.cap,
            dump_encoding=args.dump_encoding,
        )
        report = run(config)
        at = f" at domain size {report.proven_at}" if report.proven_at else ""
        print(f"{report.verdict}{at}  ({report.wall_time_s:.2f}s)")
        if report.certificate_path:
            print(f"certificate: {report.certificate_path}")
        if args.stats:
            for entry in report.per_size:
                line = " ".join(f"{k}={v}" for k, v in entry.items())
                print(f"  n={entry.get('domain_size')}: {line}")
        return report.exit_code

    if args.command == "bench":
        manifest = load_manifest(args.manifest)
        mdir = Path(args.manifest).parent if args.manifest else None
        records = bench(
            manifest,
            engine=args.engine,
            solver=args.solver,
            include_all=args.all,
            timeout=args.timeout,
            out_path=args.out,
            manifest_dir=mdir,
        )
        print(format_bench_table(records))
        bad = [r for r in records if r["verdict"] == "Error"]
        return EXIT_USAGE if bad else EXIT_PROVEN

    if args.command == "verify":
        text = Path(args.file).read_text()
        program, query = parse_program(text, args.query)
        cert = parse_certificate(Path(args.certificate).read_text())
        try:
            ok = verify_certificate(program, query, cert)
        except (CertificateError, PartialPreInterpretation) as e:
            print(f"not verified: {e}")
            return EXIT_NO_PROOF
        print("verified: the query fails in the least model" if ok else "not verified")
        return EXIT_PROVEN if ok else EXIT_NO_PROOF

    if args.command == "enumerate":
        text = Path(args.file).read_text()
        program, query = parse_program(text, args.query)
        report = enumerate_preinterps(program, query, args.domain_size, cap=args.cap)
        if args.count_only:
            print(report.failing_count)
        else:
            print(f"domain size {report.n}: space {report.space_size}, "
                  f"failing {report.failing_count}, "
                  f"isomorphism classes {report.iso_class_count}")
        return EXIT_PROVEN if report.failing_count else EXIT_NO_PROOF

    if args.command == "dump-abstract":
        text = Path(args.file).read_text()
        program, query = parse_program(text, args.query)
        ap, aquery = abstract_compile(program, query)
        print(dump_abstract(ap, aquery), end="")
        return EXIT_PROVEN

    raise AssertionError(args.command)


if __name__ == "__main__":
    sys.exit(main())
