"""Command-line front end: ``perfforge run`` computes everything that is stale."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import engine
from .config import DEFAULT_CONFIG_NAME, load_params
from .errors import ConfigError, EngineError

log = logging.getLogger("perfforge")

COMMANDS = ("run", "list", "status", "clean", "forget")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dataset", type=Path, default=Path("."), help="dataset directory (default: .)")
    common.add_argument("--config", type=Path, default=None, help=f"parameter file (default: <dataset>/{DEFAULT_CONFIG_NAME})")
    common.add_argument("--jobs", type=_positive_int, default=os.cpu_count() or 1, help="parallel tasks (default: cores)")
    common.add_argument("--target", action="append", default=None, metavar="T",
                        help="feature, piece or feature:piece; repeatable")
    common.add_argument("--dry-run", action="store_true", help="show what would run without running it")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for task lines, -vv for debug")

    parser = argparse.ArgumentParser(prog="perfforge", description="Incremental performance feature extraction.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    sub.add_parser("run", parents=[common], help="compute stale features")
    sub.add_parser("list", parents=[common], help="list planned tasks with their staleness")
    sub.add_parser("status", parents=[common], help="per-piece summary of fresh and stale tasks")
    sub.add_parser("clean", parents=[common], help="delete outputs of the selected tasks")
    sub.add_parser("forget", parents=[common], help="drop recorded state so the selected tasks re-run")
    return parser


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _setup_logging(verbosity: int) -> None:
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(verbosity, 2)]
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("perfforge")
    root.handlers[:] = [handler]
    root.setLevel(level)


def _table(rows, header) -> str:
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip() for row in [header, *rows]]
    return "\n".join(lines)


def _print_report(report: engine.RunReport) -> None:
    rows = [(o.task_id, o.outcome.value, o.reason.value, f"{o.seconds:.2f}" if o.seconds else "", o.error or "")
            for o in report.outcomes]
    if rows:
        print(_table(rows, ("task", "outcome", "reason", "seconds", "error")))
    counts = report.counts
    summary = ", ".join(f"{k}={v}" for k, v in counts.items() if v or k != engine.Outcome.WOULD_RUN.value)
    print(summary)


def _load(args):
    root = args.dataset
    if args.config is not None:
        if not args.config.is_file():
            raise ConfigError(f"config file {args.config} not found")
        cfg = args.config
    else:
        cfg = root / DEFAULT_CONFIG_NAME
    params = load_params(cfg)
    bundles = engine.discover_pieces(root)
    graph = engine.plan(bundles, params, root=root)
    manifest = engine.load_manifest(engine.manifest_path(root))
    return graph, manifest


def _cmd_run(args, graph, manifest) -> int:
    report = engine.execute(graph, manifest, targets=args.target, jobs=args.jobs, dry_run=args.dry_run)
    _print_report(report)
    return report.exit_code


def _cmd_list(args, graph, manifest) -> int:
    wanted = graph.closure(graph.select(args.target))
    states = engine.staleness(graph, manifest, sorted(wanted))
    rows = [
        (tid, "stale" if states[tid][0] else "fresh", states[tid][1].value)
        for tid in sorted(wanted, key=lambda t: graph.tasks[t].sort_key)
    ]
    if rows:
        print(_table(rows, ("task", "state", "reason")))
    return 0


def _cmd_status(args, graph, manifest) -> int:
    wanted = graph.closure(graph.select(args.target))
    states = engine.staleness(graph, manifest, sorted(wanted))
    rows = []
    for piece in graph.pieces:
        ids = sorted(t for t in wanted if graph.tasks[t].piece_id == piece)
        if not ids:
            continue
        stale = [graph.tasks[t].feature for t in ids if states[t][0]]
        rows.append((piece, len(ids), len(ids) - len(stale), ",".join(stale) or "-"))
    if rows:
        print(_table(rows, ("piece", "tasks", "fresh", "stale")))
    total = sum(1 for s in states.values() if s[0])
    print(f"{len(graph.pieces)} piece(s), {len(states)} task(s), {total} stale")
    return 0


def _cmd_clean(args, graph, manifest) -> int:
    selection = graph.select(args.target)
    if args.dry_run:
        for tid in sorted(selection):
            for p in graph.tasks[tid].outputs:
                if p.exists():
                    print(f"would remove {p}")
        return 0
    for path in engine.clean(graph, selection):
        print(f"removed {path}")
    return 0


def _cmd_forget(args, graph, manifest) -> int:
    selection = graph.select(args.target)
    dropped = sorted(tid for tid in selection if tid in manifest.states)
    for tid in dropped:
        print(f"{'would forget' if args.dry_run else 'forgot'} {tid}")
    if dropped and not args.dry_run:
        engine.save_manifest(engine.forget(selection, manifest), engine.manifest_path(graph.root))
    return 0


_HANDLERS = {"run": _cmd_run, "list": _cmd_list, "status": _cmd_status, "clean": _cmd_clean, "forget": _cmd_forget}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _setup_logging(args.verbose)
    try:
        graph, manifest = _load(args)
        return _HANDLERS[args.command](args, graph, manifest)
    except (ConfigError, EngineError) as exc:
        print(f"perfforge: error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
