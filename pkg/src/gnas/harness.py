"""Experiment runner and report emission.

An experiment is the cross product datasets x topologies x strategies (or
prompt variants) x repetitions. Each cell reports the best of its R runs by
validation accuracy, with test accuracy read off that same run. All report
numbers are derived from the per-run curves plus the benchmark tables, and
:func:`verify_report` re-derives ``summary.md`` from exactly those inputs.
"""

from __future__ import annotations

import csv
import difflib
import io
import json
import logging
import os
import shutil
import statistics
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .config import ConfigError, load_config
from .llm_client import (
    BACKEND_KINDS,
    HttpBackend,
    LLMConfig,
    make_mock_greedy,
    make_mock_random,
    make_scripted,
)
from .oracle import (
    BenchmarkError,
    BenchmarkTable,
    fmt_acc,
    load_benchmark,
    query,
    rank,
    synth_benchmark,
)
from .prompting import Ablation, PromptOptions
from .search_space import (
    Registry,
    SearchSpace,
    SearchSpaceError,
    default_registry,
    load_operations,
    load_topologies,
)
from .strategies import EvoConfig, RLConfig, SearchResult, StrategyConfig, run_strategy
from .strategies.base import CSV_ITERATION_COLUMNS

log = logging.getLogger(__name__)

CURVES_COLUMNS = (
    "dataset",
    "topology",
    "strategy",
    "seed",
    "iteration",
    "best_so_far_acc",
    "unique_queries",
    "best_so_far_key",
)
TOP10_COLUMNS = (
    "dataset",
    "topology",
    "strategy",
    "rank_within_strategy",
    "arch_key",
    "val_acc",
    "test_acc",
)
ABLATION_VARIANTS = ("none", "no-connections", "no-operations", "no-strategy")
MOCK_BACKENDS = ("mock-greedy", "mock-random")
MISSING = "—"


class SpecError(ValueError):
    """An experiment references something that cannot be resolved."""


# -- specs -----------------------------------------------------------------


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    benchmark_path: str | None = None
    synthetic_seed: int = 0
    planted: tuple[str, ...] | None = None


@dataclass(frozen=True)
class BackendSpec:
    kind: str = "mock-greedy"
    script_path: str | None = None
    llm: LLMConfig = field(default_factory=LLMConfig)
    live: bool = False


@dataclass(frozen=True)
class Variant:
    label: str
    strategy: StrategyConfig
    prompt: PromptOptions


@dataclass(frozen=True)
class ExperimentSpec:
    datasets: tuple[DatasetSpec, ...]
    variants: tuple[Variant, ...]
    topologies: tuple[str, ...] = ("space-1",)
    repetitions: int = 3
    backend: BackendSpec = field(default_factory=BackendSpec)
    operations: tuple[str, ...] | None = None
    topology_file: str | None = None
    workers: int = 1
    kind: str = "search"
    config: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.repetitions < 1:
            raise SpecError("repetitions must be >= 1")
        if not self.datasets or not self.variants or not self.topologies:
            raise SpecError("experiment needs datasets, topologies and strategies")


def strategy_label(kind: str, ablation: Ablation) -> str:
    if kind == "gpt4gnas" and ablation.name != "none":
        return f"gpt4gnas[{ablation.name}]"
    return kind


def spec_from_config(cfg: dict, kind: str = "search", ablations: Sequence[str] | None = None) -> ExperimentSpec:
    """Build an :class:`ExperimentSpec` from an effective config dict."""
    try:
        exp, bench, search = cfg["experiment"], cfg["benchmark"], cfg["search"]
        evo = EvoConfig(**cfg["evolutionary"])
        rl = RLConfig(**cfg["rl"])
        llm_raw = dict(cfg["llm"])
        backend_kind = llm_raw.pop("backend")
        script = llm_raw.pop("script") or None
        live = bool(llm_raw.pop("live"))
        llm = LLMConfig(**llm_raw)
        planted = tuple(t.strip() for t in bench["planted"].split(",") if t.strip()) or None
        datasets = tuple(
            DatasetSpec(
                name,
                bench["paths"].get(name) or None,
                int(bench["synthetic_seed"]) + i,
                planted,
            )
            for i, name in enumerate(exp["datasets"])
        )
        base_prompt = dict(
            explore_iterations=int(search["explore_iterations"]),
            token_budget=int(cfg["prompt"]["token_budget"]),
            reattach_context=bool(cfg["prompt"]["reattach_context"]),
        )
        variants = []
        for s_kind in search["strategies"]:
            strat = StrategyConfig(
                strategy_kind=s_kind,
                T=int(search["iterations"]),
                N=int(search["batch_size"]),
                seed=int(exp["seed"]),
                explore_iterations=int(search["explore_iterations"]),
                evo=evo,
                rl=rl,
                max_queries=int(search["max_queries"]) or None,
            )
            if kind == "ablation":
                if s_kind != "gpt4gnas":
                    continue
                for name in ablations or ABLATION_VARIANTS:
                    ab = Ablation.from_name(name)
                    variants.append(Variant(ab.label, strat, PromptOptions(ab, **base_prompt)))
            else:
                ab = Ablation.from_name(cfg["prompt"]["ablation"])
                variants.append(
                    Variant(strategy_label(s_kind, ab), strat, PromptOptions(ab, **base_prompt))
                )
        if kind == "ablation" and not variants:
            raise SpecError("prompt ablation requires the gpt4gnas strategy")
        return ExperimentSpec(
            datasets=datasets,
            variants=tuple(variants),
            topologies=tuple(exp["topologies"]),
            repetitions=int(exp["repetitions"]),
            backend=BackendSpec(backend_kind, script, llm, live),
            operations=tuple(exp["operations"]) or None,
            topology_file=exp["topology_file"] or None,
            workers=int(exp["workers"]),
            kind=kind,
            config=cfg,
        )
    except (TypeError, ValueError, KeyError) as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(f"invalid configuration: {exc}") from None


# -- resolution ------------------------------------------------------------


@dataclass
class Resources:
    registry: Registry
    spaces: dict[str, SearchSpace]
    tables: dict[tuple[str, str], BenchmarkTable]


def resolve_resources(spec: ExperimentSpec) -> Resources:
    """Load every topology, space and benchmark up front; nothing runs on failure."""
    try:
        if spec.topology_file:
            topologies = {t.id: t for t in load_topologies(spec.topology_file)}
            registry = Registry(tuple(load_operations()), topologies)
        else:
            registry = default_registry()
        spaces = {tid: registry.space(tid, spec.operations) for tid in spec.topologies}
    except (OSError, SearchSpaceError, json.JSONDecodeError) as exc:
        raise SpecError(str(exc)) from None
    if spec.backend.kind not in BACKEND_KINDS:
        raise SpecError(f"unknown backend {spec.backend.kind!r}; expected one of {BACKEND_KINDS}")
    uses_llm = any(v.strategy.strategy_kind == "gpt4gnas" for v in spec.variants)
    if uses_llm and spec.backend.kind == "scripted":
        if not spec.backend.script_path or not Path(spec.backend.script_path).is_file():
            raise SpecError(f"playback script not found: {spec.backend.script_path}")
    if uses_llm and spec.backend.kind == "http" and not spec.backend.live:
        raise SpecError("the http backend needs the --live flag")
    tables: dict[tuple[str, str], BenchmarkTable] = {}
    loaded: dict[str, BenchmarkTable] = {}
    for ds in spec.datasets:
        for tid, space in spaces.items():
            try:
                if ds.benchmark_path:
                    if ds.benchmark_path not in loaded:
                        path = Path(ds.benchmark_path)
                        if not path.is_file():
                            raise SpecError(f"benchmark file not found: {path}")
                        loaded[ds.benchmark_path] = load_benchmark(path, registry)
                    tables[ds.name, tid] = loaded[ds.benchmark_path].restrict(tid)
                else:
                    tables[ds.name, tid] = synth_benchmark(
                        space, ds.name, ds.synthetic_seed, ds.planted, registry=registry
                    )
            except (BenchmarkError, SearchSpaceError, OSError) as exc:
                raise SpecError(f"{ds.name}/{tid}: {exc}") from None
    return Resources(registry, spaces, tables)


def make_backend(spec: BackendSpec, table: BenchmarkTable, space: SearchSpace, seed: int):
    if spec.kind == "mock-greedy":
        return make_mock_greedy(table, space.topology.id)
    if spec.kind == "mock-random":
        return make_mock_random(space, seed)
    if spec.kind == "scripted":
        return make_scripted(spec.script_path)
    if spec.kind == "http":
        return HttpBackend(spec.llm)
    raise SpecError(f"unknown backend {spec.kind!r}")


# -- running ---------------------------------------------------------------


@dataclass
class RunRecord:
    dataset: str
    topology: str
    label: str
    repetition: int
    seed: int
    result: SearchResult | None = None
    error: str | None = None

    @property
    def run_id(self) -> str:
        safe = self.label.replace("¬", "no-").replace("[", "-").replace("]", "")
        return f"{self.dataset}__{self.topology}__{safe}__seed{self.seed}"

    @property
    def failed(self) -> bool:
        return self.result is None or self.result.failed


@dataclass
class CellSummary:
    dataset: str
    topology: str
    label: str
    runs: int
    failed: int
    best_key: str | None = None
    val_acc: float | None = None
    test_acc: float | None = None
    val_rank: int | None = None
    test_rank: int | None = None
    selected_seed: int | None = None
    mean_val: float | None = None
    std_val: float | None = None

    @property
    def absent(self) -> bool:
        return self.best_key is None


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    runs: list[RunRecord]
    summaries: list[CellSummary]
    resources: Resources
    flags: dict = field(default_factory=dict)

    @property
    def failed_runs(self) -> list[RunRecord]:
        return [r for r in self.runs if r.failed]

    def summary(self, dataset: str, topology: str, label: str) -> CellSummary:
        for s in self.summaries:
            if (s.dataset, s.topology, s.label) == (dataset, topology, label):
                return s
        raise KeyError((dataset, topology, label))


def _execute(job: RunRecord, variant: Variant, spec: ExperimentSpec, res: Resources, stop):
    space = res.spaces[job.topology]
    table = res.tables[job.dataset, job.topology]
    cfg = replace(variant.strategy, seed=job.seed)
    try:
        backend = None
        if cfg.strategy_kind == "gpt4gnas":
            backend = make_backend(spec.backend, table, space, job.seed)
            job.result = run_strategy(
                space,
                table,
                cfg,
                backend,
                stop=stop,
                llm_cfg=spec.backend.llm,
                prompt_opts=variant.prompt,
                dataset=job.dataset,
            )
        else:
            job.result = run_strategy(space, table, cfg, stop=stop)
        if job.result.failed:
            job.error = job.result.error or "no architecture evaluated"
    except Exception as exc:  # isolate per-run failures
        log.exception("run %s failed", job.run_id)
        job.error = f"{type(exc).__name__}: {exc}"
    return job


def run_experiment(spec: ExperimentSpec, stop: threading.Event | None = None) -> ExperimentReport:
    res = resolve_resources(spec)
    jobs: list[tuple[RunRecord, Variant]] = []
    for ds in spec.datasets:
        for tid in spec.topologies:
            for variant in spec.variants:
                for r in range(spec.repetitions):
                    rec = RunRecord(ds.name, tid, variant.label, r, variant.strategy.seed + r)
                    jobs.append((rec, variant))
    stop_check = stop.is_set if stop is not None else None

    def work(item):
        rec, variant = item
        if stop is not None and stop.is_set():
            rec.error = "not started: interrupted"
            return rec
        return _execute(rec, variant, spec, res, stop_check)

    if spec.workers > 1:
        with ThreadPoolExecutor(spec.workers) as pool:
            runs = list(pool.map(work, jobs))
    else:
        runs = [work(j) for j in jobs]

    rows = curves_rows(runs)
    summaries = summarize(counted_cells(spec, runs), rows, res.tables)
    flags = {}
    if spec.backend.kind in MOCK_BACKENDS and any(
        v.strategy.strategy_kind == "gpt4gnas" for v in spec.variants
    ):
        flags["mock_invariant"] = True
    nonstandard = spec.backend.llm.nonstandard_settings
    if nonstandard:
        flags["nonstandard_settings"] = nonstandard
    if stop is not None and stop.is_set():
        flags["interrupted"] = True
    return ExperimentReport(spec, runs, summaries, res, flags)


def run_ablation(spec: ExperimentSpec, flags: Iterable[str] | None = None, stop=None) -> ExperimentReport:
    """Full prompt plus each single-section ablation, labelled GPT4GNAS, ¬Connections, ¬Operation, ¬Strategy."""
    gpt = [v for v in spec.variants if v.strategy.strategy_kind == "gpt4gnas"]
    if not gpt:
        raise SpecError("prompt ablation requires the gpt4gnas strategy")
    names = ["none"] + [f for f in (flags or ABLATION_VARIANTS) if f != "none"]
    base = gpt[0]
    variants = []
    for name in names:
        ab = Ablation.from_name(name)
        variants.append(Variant(ab.label, base.strategy, replace(base.prompt, ablation=ab)))
    return run_experiment(replace(spec, variants=tuple(variants), kind="ablation"), stop)


# -- derived data ----------------------------------------------------------


def cell_list(spec: ExperimentSpec) -> list[dict]:
    return [
        {"dataset": ds.name, "topology": tid, "strategy": v.label}
        for ds in spec.datasets
        for tid in spec.topologies
        for v in spec.variants
    ]


def curves_rows(runs: Iterable[RunRecord]) -> list[dict]:
    """Best-so-far per iteration for every successful run, as CSV-ready strings."""
    rows = []
    for run in runs:
        if run.failed:
            continue
        for it in run.result.iterations:
            if it.best_so_far_key is None:
                continue
            rows.append(
                {
                    "dataset": run.dataset,
                    "topology": run.topology,
                    "strategy": run.label,
                    "seed": str(run.seed),
                    "iteration": str(it.iteration),
                    "best_so_far_acc": fmt_acc(it.best_so_far_acc),
                    "unique_queries": str(it.unique_queries),
                    "best_so_far_key": it.best_so_far_key,
                }
            )
    return rows


def summarize(cells: list[dict], rows: list[dict], tables) -> list[CellSummary]:
    """Best-of-R per cell from curve rows: select on val, read test from that run.

    Ties go to the earliest run in file order (= lowest repetition index).
    """
    finals: dict[tuple, dict[str, dict]] = {}
    for row in rows:
        cell = (row["dataset"], row["topology"], row["strategy"])
        finals.setdefault(cell, {})[row["seed"]] = row  # last row per run wins
    out = []
    for c in cells:
        cell = (c["dataset"], c["topology"], c["strategy"])
        runs = list(finals.get(cell, {}).values())
        n_total = c.get("runs", len(runs))
        s = CellSummary(*cell, runs=n_total, failed=c.get("failed", n_total - len(runs)))
        if runs:
            best = runs[0]
            for r in runs[1:]:
                if float(r["best_so_far_acc"]) > float(best["best_so_far_acc"]):
                    best = r
            table = tables[cell[0], cell[1]]
            rec = query(table, best["best_so_far_key"])
            s.best_key = best["best_so_far_key"]
            s.val_acc = rec.val_accuracy
            s.test_acc = rec.test_accuracy
            s.val_rank = rank(table, s.best_key, "val")
            s.test_rank = rank(table, s.best_key, "test")
            s.selected_seed = int(best["seed"])
            vals = [float(r["best_so_far_acc"]) for r in runs]
            s.mean_val = statistics.fmean(vals)
            s.std_val = statistics.stdev(vals) if len(vals) > 1 else 0.0
        out.append(s)
    return out


def _cell(acc: float | None, rnk: int | None) -> str:
    return MISSING if acc is None else f"{fmt_acc(acc)} ({rnk})"


def _md_key(key: str | None) -> str:
    return MISSING if key is None else "`" + key.replace("|", "\\|") + "`"


def render_summary(summaries: list[CellSummary], meta: dict) -> str:
    """Markdown tables: accuracy (rank) per method and dataset, plus per-topology view."""
    lines = [f"# {meta.get('title', 'Search summary')}", ""]
    lines.append(
        f"Best of {meta['repetitions']} run(s) per cell, selected on validation accuracy; "
        "test accuracy and ranks are read from the selected architecture. "
        "Ranks are 1-based over the benchmark table (ties share the smallest rank)."
    )
    if meta.get("nonstandard_settings"):
        lines.append("")
        lines.append("Non-default settings: " + ", ".join(meta["nonstandard_settings"]))
    if meta.get("mock_invariant"):
        lines.append("")
        lines.append(
            "Note: a mock backend ignores prompt text, so results are invariant to prompt variants."
        )
    datasets = list(dict.fromkeys(s.dataset for s in summaries))
    topologies = list(dict.fromkeys(s.topology for s in summaries))
    labels = list(dict.fromkeys(s.label for s in summaries))
    index = {(s.dataset, s.topology, s.label): s for s in summaries}

    for tid in topologies:
        lines += ["", f"## Accuracy (%) and rank: {tid}", ""]
        header = ["Method"] + [f"{d} {part}" for d in datasets for part in ("Val", "Test")]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "---|" * len(header))
        for label in labels:
            cells = [label]
            for d in datasets:
                s = index[d, tid, label]
                cells += [_cell(s.val_acc, s.val_rank), _cell(s.test_acc, s.test_rank)]
            lines.append("| " + " | ".join(cells) + " |")

    if len(topologies) > 1:
        for d in datasets:
            lines += ["", f"## Validation accuracy (%) and rank per topology: {d}", ""]
            lines.append("| Topology | " + " | ".join(labels) + " |")
            lines.append("|" + "---|" * (len(labels) + 1))
            for tid in topologies:
                cells = [tid] + [
                    _cell(index[d, tid, lb].val_acc, index[d, tid, lb].val_rank) for lb in labels
                ]
                lines.append("| " + " | ".join(cells) + " |")

    lines += ["", "## Selected architectures", ""]
    lines.append("| Dataset | Topology | Method | Architecture | Seed | Mean val ± std | Runs ok |")
    lines.append("|---|---|---|---|---|---|---|")
    for s in summaries:
        mean = MISSING if s.mean_val is None else f"{fmt_acc(s.mean_val)} ± {fmt_acc(s.std_val)}"
        seed = MISSING if s.selected_seed is None else str(s.selected_seed)
        lines.append(
            f"| {s.dataset} | {s.topology} | {s.label} | {_md_key(s.best_key)} | {seed} | "
            f"{mean} | {s.runs - s.failed}/{s.runs} |"
        )
    return "\n".join(lines) + "\n"


def summary_meta(report: ExperimentReport) -> dict:
    return {
        "title": "Prompt ablation summary" if report.spec.kind == "ablation" else "Search summary",
        "repetitions": report.spec.repetitions,
        "nonstandard_settings": report.flags.get("nonstandard_settings", []),
        "mock_invariant": bool(report.flags.get("mock_invariant")),
    }


def top10_rows(report: ExperimentReport) -> list[dict]:
    rows = []
    cells: dict[tuple, dict] = {}
    for run in report.runs:
        if run.failed:
            continue
        pool = cells.setdefault((run.dataset, run.topology, run.label), {})
        for e in run.result.state.history:
            pool.setdefault(e.arch.key, e)
    for c in cell_list(report.spec):
        cell = (c["dataset"], c["topology"], c["strategy"])
        evs = sorted(cells.get(cell, {}).values(), key=lambda e: (-e.val_accuracy, e.arch.key))
        for i, e in enumerate(evs[:10], start=1):
            rows.append(
                {
                    "dataset": cell[0],
                    "topology": cell[1],
                    "strategy": cell[2],
                    "rank_within_strategy": str(i),
                    "arch_key": e.arch.key,
                    "val_acc": fmt_acc(e.val_accuracy),
                    "test_acc": fmt_acc(e.test_accuracy),
                }
            )
    return rows


def evolution_lines(report: ExperimentReport) -> list[str]:
    """Per-iteration best architecture with the slots that changed (JSON lines)."""
    out = []
    for run in report.runs:
        if run.failed:
            continue
        prev = None
        for it in run.result.iterations:
            if it.best_so_far_key is None:
                continue
            ops = it.best_so_far_key.split("|", 1)[1].split(",")
            changed = [] if prev is None else [i for i, (a, b) in enumerate(zip(prev, ops)) if a != b]
            out.append(
                json.dumps(
                    {
                        "dataset": run.dataset,
                        "topology": run.topology,
                        "strategy": run.label,
                        "seed": run.seed,
                        "iteration": it.iteration,
                        "best_key": it.best_so_far_key,
                        "best_val_acc": fmt_acc(it.best_so_far_acc),
                        "ops": ops,
                        "changed_slots": changed,
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
            )
            prev = ops
    return out


def _csv_text(columns: Sequence[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _run_csv(result: SearchResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_ITERATION_COLUMNS)
    w.writerows(result.report_csv_rows())
    return buf.getvalue()


# -- emission --------------------------------------------------------------


def counted_cells(spec: ExperimentSpec, runs: Iterable[RunRecord]) -> list[dict]:
    """Cells in table order with their run and failure counts."""
    counts: dict[tuple, list[int]] = {}
    for run in runs:
        c = counts.setdefault((run.dataset, run.topology, run.label), [0, 0])
        c[0] += 1
        c[1] += int(run.failed)
    out = []
    for c in cell_list(spec):
        n, failed = counts.get((c["dataset"], c["topology"], c["strategy"]), (0, 0))
        out.append(dict(c, runs=n, failed=failed))
    return out


def emit_report(report: ExperimentReport, out_dir: str | Path) -> dict:
    """Write all report artifacts atomically and return the manifest."""
    out_dir = Path(out_dir)
    parent = out_dir.resolve().parent
    parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.tmp-", dir=parent))
    try:
        files = _write_artifacts(report, tmp)
        backup = None
        if out_dir.exists():
            backup = parent / f".{out_dir.name}.old-{os.getpid()}"
            os.replace(out_dir, backup)
        os.replace(tmp, out_dir)
        if backup is not None:
            shutil.rmtree(backup, ignore_errors=True)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return files


def _write_artifacts(report: ExperimentReport, root: Path) -> dict:
    rows = curves_rows(report.runs)
    summary = render_summary(report.summaries, summary_meta(report))
    (root / "summary.md").write_text(summary, encoding="utf-8")
    (root / "curves.csv").write_text(_csv_text(CURVES_COLUMNS, rows), encoding="utf-8")
    (root / "top10.csv").write_text(_csv_text(TOP10_COLUMNS, top10_rows(report)), encoding="utf-8")
    evo = evolution_lines(report)
    (root / "evolution.jsonl").write_text("".join(l + "\n" for l in evo), encoding="utf-8")
    (root / "transcripts").mkdir()
    (root / "runs").mkdir()
    transcript_files, run_files = [], []
    for run in report.runs:
        if run.result is None:
            continue
        if run.result.transcripts:
            name = f"transcripts/{run.run_id}.jsonl"
            with open(root / name, "w", encoding="utf-8") as fh:
                for t in run.result.transcripts:
                    fh.write(json.dumps(t.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
            transcript_files.append(name)
        (root / f"runs/{run.run_id}.json").write_text(run.result.report_json(), encoding="utf-8")
        (root / f"runs/{run.run_id}.csv").write_text(_run_csv(run.result), encoding="utf-8")
        run_files += [f"runs/{run.run_id}.json", f"runs/{run.run_id}.csv"]
    manifest = {
        "kind": report.spec.kind,
        "artifacts": {
            "summary": "summary.md",
            "curves": "curves.csv",
            "top10": "top10.csv",
            "evolution": "evolution.jsonl",
            "transcripts": "transcripts/",
            "manifest": "manifest.json",
        },
        "transcript_files": transcript_files,
        "run_files": run_files,
        "cells": counted_cells(report.spec, report.runs),
        "failures": [
            {"run": r.run_id, "dataset": r.dataset, "topology": r.topology,
             "strategy": r.label, "seed": r.seed, "error": r.error}
            for r in report.runs
            if r.failed
        ],
        "flags": report.flags,
        "summary_meta": summary_meta(report),
        "variants": [
            {"label": v.label, "strategy": v.strategy.strategy_kind, "ablation": v.prompt.ablation.name}
            for v in report.spec.variants
        ],
        "config": report.spec.config,
    }
    (root / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return manifest


# -- verification ----------------------------------------------------------


def read_curves(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def verify_report(out_dir: str | Path) -> tuple[bool, str]:
    """Recompute ``summary.md`` from curves.csv and the benchmark tables; diff it."""
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / "manifest.json").read_text(encoding="utf-8"))
    cfg = manifest["config"]
    variants = manifest.get("variants", [])
    spec = spec_from_config(
        cfg,
        kind=manifest.get("kind", "search"),
        ablations=[v["ablation"] for v in variants] if manifest.get("kind") == "ablation" else None,
    )
    res = resolve_resources(spec)
    rows = read_curves(out_dir / "curves.csv")
    summaries = summarize(manifest["cells"], rows, res.tables)
    expected = render_summary(summaries, manifest["summary_meta"])
    actual = (out_dir / "summary.md").read_text(encoding="utf-8")
    if expected == actual:
        return True, ""
    diff = difflib.unified_diff(
        actual.splitlines(keepends=True),
        expected.splitlines(keepends=True),
        fromfile="summary.md (on disk)",
        tofile="summary.md (recomputed)",
    )
    return False, "".join(diff)


def spec_from_file(path: str | Path | None, overrides: Iterable[str] = (), kind="search") -> ExperimentSpec:
    try:
        return spec_from_config(load_config(path, overrides), kind)
    except ConfigError as exc:
        raise SpecError(str(exc)) from None
