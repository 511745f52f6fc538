"""``gnas`` command line: search, ablation, benchmark-gen, rank, verify.

Exit codes: 0 success, 1 a failed cell (or a verify mismatch), 2 bad config.
"""

from __future__ import annotations

import argparse
import logging
import signal
import sys
import threading
from pathlib import Path

from .config import ConfigError, load_config
from .harness import (
    ABLATION_VARIANTS,
    SpecError,
    emit_report,
    run_ablation,
    run_experiment,
    spec_from_config,
    verify_report,
)
from .llm_client import BACKEND_KINDS
from .oracle import (
    BenchmarkError,
    NotFoundError,
    fmt_acc,
    load_benchmark,
    query,
    rank,
    save_benchmark,
    synth_benchmark,
)
from .search_space import SearchSpaceError, decode, default_registry
from .strategies import STRATEGY_KINDS

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("gnas")


def _overrides(args) -> list[str]:
    """Translate the convenience flags into dotted config overrides."""
    out = []
    flag_map = [
        ("strategy", "search.strategies"),
        ("backend", "llm.backend"),
        ("dataset", "experiment.datasets"),
        ("topology", "experiment.topologies"),
        ("seed", "experiment.seed"),
        ("iterations", "search.iterations"),
        ("batch_size", "search.batch_size"),
        ("repetitions", "experiment.repetitions"),
        ("ablation", "prompt.ablation"),
        ("script", "llm.script"),
        ("benchmark", None),
        ("workers", "experiment.workers"),
    ]
    for attr, key in flag_map:
        value = getattr(args, attr, None)
        if value is None:
            continue
        if attr == "benchmark":
            for item in value:
                name, sep, path = item.partition("=")
                if not sep:
                    raise ConfigError(f"--benchmark expects DATASET=PATH, got {item!r}")
                out.append(f"benchmark.paths.{name}={Path(path).resolve()}")
            continue
        if attr == "script":
            value = str(Path(value).resolve())
        out.append(f"{key}={value}")
    if getattr(args, "live", False):
        out.append("llm.live=true")
    return out + list(args.set or [])


def _effective_config(args) -> dict:
    return load_config(args.config, _overrides(args))


def _print_summaries(report) -> None:
    for s in report.summaries:
        head = f"{s.dataset} {s.topology} {s.label}:"
        if s.absent:
            print(f"{head} absent (all {s.runs} runs failed)")
            continue
        print(
            f"{head} m* = {s.best_key}  val {fmt_acc(s.val_acc)} (rank {s.val_rank})  "
            f"test {fmt_acc(s.test_acc)} (rank {s.test_rank})  seed {s.selected_seed}"
        )


def _install_sigint(stop: threading.Event):
    def handler(signum, frame):
        if stop.is_set():
            raise KeyboardInterrupt
        print("interrupt: finishing in-flight evaluations, writing partial report", file=sys.stderr)
        stop.set()

    try:
        return signal.signal(signal.SIGINT, handler)
    except ValueError:  # not in the main thread
        return None


def _run(args, kind: str) -> int:
    cfg = _effective_config(args)
    if kind == "ablation":
        spec = spec_from_config(cfg, kind="ablation", ablations=ABLATION_VARIANTS)
    else:
        spec = spec_from_config(cfg)
    stop = threading.Event()
    previous = _install_sigint(stop)
    try:
        report = run_ablation(spec, stop=stop) if kind == "ablation" else run_experiment(spec, stop)
    finally:
        if previous is not None:
            signal.signal(signal.SIGINT, previous)
    if args.out:
        emit_report(report, args.out)
    _print_summaries(report)
    for run in report.failed_runs:
        print(f"failed: {run.run_id}: {run.error}", file=sys.stderr)
    if args.out:
        print(f"report: {args.out}")
    if report.failed_runs or report.flags.get("interrupted"):
        return EXIT_FAILED
    return EXIT_OK


def cmd_search(args) -> int:
    return _run(args, "search")


def cmd_ablation(args) -> int:
    return _run(args, "ablation")


def cmd_benchmark_gen(args) -> int:
    registry = default_registry()
    space = registry.space(args.topology, args.ops.split(",") if args.ops else None)
    table = synth_benchmark(space, args.dataset, args.seed, args.planted or None, registry=registry)
    out = Path(args.out or f"{args.dataset}-{args.topology}-seed{args.seed}.gnasbench.json")
    save_benchmark(table, out)
    top = table.rank_index[0]
    print(f"wrote {out} ({len(table)} records); rank-1 {top} val {fmt_acc(table.records[top].val_accuracy)}")
    return EXIT_OK


def cmd_rank(args) -> int:
    path = Path(args.benchmark)
    if not path.is_file():
        raise ConfigError(f"benchmark file not found: {path}")
    table = load_benchmark(path)
    arch = decode(args.arch, table.registry)
    rec = query(table, arch)
    acc = rec.val_accuracy if args.metric == "val" else rec.test_accuracy
    print(f"({fmt_acc(acc)}, {rank(table, arch, args.metric)})")
    return EXIT_OK


def cmd_verify(args) -> int:
    out = Path(args.out_dir)
    if not (out / "manifest.json").is_file():
        raise ConfigError(f"not a report directory (no manifest.json): {out}")
    ok, diff = verify_report(out)
    if ok:
        print(f"verified: {out / 'summary.md'}")
        return EXIT_OK
    sys.stderr.write(diff)
    print("summary.md does not match the recomputed report", file=sys.stderr)
    return EXIT_FAILED


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML experiment config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted config override")
    p.add_argument("--strategy", help=f"comma list of {','.join(STRATEGY_KINDS)}")
    p.add_argument("--backend", choices=BACKEND_KINDS)
    p.add_argument("--script", help="recorded responses for the scripted backend")
    p.add_argument("--dataset", help="comma list of dataset names")
    p.add_argument("--benchmark", action="append", metavar="DATASET=PATH", help="benchmark JSON per dataset")
    p.add_argument("--topology", help="comma list of topology ids")
    p.add_argument("--seed", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="report directory")
    p.add_argument("--live", action="store_true", help="allow the http backend to call the endpoint")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gnas", description="LLM-guided graph NAS over tabular benchmarks")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="run a search experiment")
    _add_run_flags(p)
    p.add_argument("--ablation", choices=ABLATION_VARIANTS)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("ablation", help="full prompt vs each single-section ablation")
    _add_run_flags(p)
    p.set_defaults(func=cmd_ablation)

    p = sub.add_parser("benchmark-gen", help="write a synthetic benchmark fixture")
    p.add_argument("--topology", default="space-1")
    p.add_argument("--dataset", default="synthetic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--planted", default="", help="comma list of 4 ops to plant as the optimum")
    p.add_argument("--ops", default="", help="restrict the operation set (comma list)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_benchmark_gen)

    p = sub.add_parser("rank", help="print (accuracy, rank) for an architecture key")
    p.add_argument("--benchmark", required=True)
    p.add_argument("--arch", required=True)
    p.add_argument("--metric", choices=("val", "test"), default="val")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("verify", help="recompute summary.md from raw report data")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, SpecError, SearchSpaceError, BenchmarkError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotFoundError as exc:
        print(f"error: architecture not in benchmark: {exc.args[0]}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
