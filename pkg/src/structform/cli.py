"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 partial failure (some
problems failed, or a checked file has errors).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .error_kb import KnowledgeBase, read_seed_records
from .evaluator import format_table
from .lean.checker import CheckerError, make_checker
from .llm_gateway import Gateway, make_backend
from .pipeline import (ConfigError, NoRuns, Pipeline, build_services, evaluate, load_config,
                       run_manifest, write_report)
from .static_fixer import apply_rules, describe_rules

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2

log = logging.getLogger("structform")


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
        if args.workers:
            cfg.workers = args.workers
        services = build_services(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    records = Pipeline(cfg, services).run(args.problem)
    if not records:
        print("warning: no problems matched", file=sys.stderr)
        return EXIT_OK
    for r in records:
        extra = f"  ({r.error})" if r.error else ""
        print(f"{r.problem_id:40s} {r.status:9s} calls={r.gateway_calls}{extra}")
    return EXIT_PARTIAL if any(r.status != "complete" for r in records) else EXIT_OK


def _judge_from(args: argparse.Namespace) -> tuple[Gateway | None, object | None, int]:
    if not args.config:
        return None, None, 16
    cfg = load_config(args.config)
    if not args.mv:
        return None, None, cfg.mv_rounds
    if not cfg.judge_mode:
        raise ConfigError("--mv needs a [judge] section")
    judge = Gateway(make_backend(cfg.judge_mode, cfg.judge_source, cfg.env_prefix), cfg.judge_params)
    checker = make_checker(cfg.checker_mode, cfg.checker_workspace, cfg.checker_timeout) if cfg.checker_workspace else None
    return judge, checker, args.rounds or cfg.mv_rounds


def cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        judge, checker, rounds = _judge_from(args)
    except (ConfigError, CheckerError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = evaluate(args.run_dir, judge=judge, rounds=rounds, checker=checker)
    except NoRuns as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.json:
        print(report.to_json())
    else:
        print(format_table(report, run_manifest(Path(args.run_dir))))
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    try:
        print(write_report(args.run_dir), end="")
    except NoRuns as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def _kb(args: argparse.Namespace) -> KnowledgeBase:
    if args.kb:
        return KnowledgeBase.load(args.kb)
    kb = KnowledgeBase()
    kb.seed(read_seed_records())
    return kb


def cmd_kb(args: argparse.Namespace) -> int:
    if args.kb_cmd == "stats":
        kb = _kb(args)
        for kind, n in kb.stats().items():
            print(f"{kind:22s} {n}")
        print(f"{'total':22s} {len(kb)}")
        return EXIT_OK
    if args.kb_cmd == "show":
        kb = _kb(args)
        try:
            entry = kb.get(args.id)
        except KeyError:
            print(f"error: no entry {args.id}", file=sys.stderr)
            return EXIT_CONFIG
        print(json.dumps(entry.to_dict(), indent=2, ensure_ascii=False))
        return EXIT_OK
    if args.kb_cmd == "seed":
        if not args.kb:
            print("error: kb seed needs --kb PATH", file=sys.stderr)
            return EXIT_CONFIG
        kb = KnowledgeBase.load(args.kb)
        n = kb.seed(read_seed_records(args.dir), skip_existing=True)
        kb.persist()
        print(f"added {n} entries; {len(kb)} total in {args.kb}")
        return EXIT_OK
    return EXIT_CONFIG


def cmd_fixer(args: argparse.Namespace) -> int:
    if args.fixer_cmd == "rules":
        for r in describe_rules():
            print(f"{r['id']:24s} {r['description']}")
            print(f"{'':24s}   match:  {r['match']}")
            print(f"{'':24s}   action: {r['action']}")
        return EXIT_OK
    src = Path(args.file).read_text(encoding="utf-8")
    out, applied = apply_rules(src)
    if args.in_place:
        Path(args.file).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)
    print(f"applied: {', '.join(applied) or '(none)'}", file=sys.stderr)
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    try:
        checker = make_checker(args.mode, args.workspace, args.timeout)
        path = Path(args.file)
        report = checker.check_source(path.read_text(encoding="utf-8"), path.name)
    except (CheckerError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, ensure_ascii=False))
    else:
        for d in report.diagnostics:
            owner = d.decl or "-"
            print(f"{d.line}:{d.col} {d.severity} [{d.kind.value}] ({owner}) {d.message.splitlines()[0]}")
        for s in report.decls:
            flag = " sorry" if s.has_sorry else ""
            print(f"  {s.category:10s} {s.start_line:4d}-{s.end_line:<4d} {s.name}{flag}")
        print(f"compiled_ok={report.compiled_ok} errors={report.error_count}")
    return EXIT_OK if report.compiled_ok else EXIT_PARTIAL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="structform", description="Structure-to-instance Lean formalization pipeline")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="run the pipeline over manifest problems")
    p.add_argument("--config", required=True, help="INI run configuration")
    p.add_argument("--problem", action="append", help="problem id or glob (repeatable)")
    p.add_argument("--workers", type=int, help="override worker pool size")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("evaluate", help="aggregate metrics over a run directory")
    p.add_argument("run_dir")
    p.add_argument("--config", help="config providing the judge backend")
    p.add_argument("--mv", action="store_true", help="also run judge voting")
    p.add_argument("--rounds", type=int, help="voting rounds (default from config, 16)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("report", help="write tables and timing CSV for a run directory")
    p.add_argument("run_dir")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("kb", help="inspect or seed the error knowledge base")
    ksub = p.add_subparsers(dest="kb_cmd", required=True)
    k = ksub.add_parser("stats")
    k.add_argument("--kb", help="KB file (default: packaged seed)")
    k = ksub.add_parser("show")
    k.add_argument("id", type=int)
    k.add_argument("--kb")
    k = ksub.add_parser("seed")
    k.add_argument("dir", nargs="?", help="seed directory or file (default: packaged seed)")
    k.add_argument("--kb", help="KB file to append to")
    p.set_defaults(fn=cmd_kb)

    p = sub.add_parser("fixer", help="static rewrite rules")
    fsub = p.add_subparsers(dest="fixer_cmd", required=True)
    fsub.add_parser("rules")
    f = fsub.add_parser("apply")
    f.add_argument("file")
    f.add_argument("--in-place", action="store_true")
    p.set_defaults(fn=cmd_fixer)

    p = sub.add_parser("check", help="type-check one file and show attributed diagnostics")
    p.add_argument("file")
    p.add_argument("--mode", choices=("mock", "real"), default="mock")
    p.add_argument("--workspace", required=True, help="mock fixture dir or Lean project")
    p.add_argument("--timeout", type=float, default=300.0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_check)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
