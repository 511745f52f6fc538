from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable

from ..oracle import BenchmarkRecord, BenchmarkTable, fmt_acc, query
from ..search_space import Architecture

STRATEGY_KINDS = ("gpt4gnas", "random", "evolutionary", "rl")


@dataclass(frozen=True)
class EvoConfig:
    population_size: int = 50
    parent_count: int = 15
    mutation_rate: float = 0.15
    crossover_rate: float = 0.8


@dataclass(frozen=True)
class RLConfig:
    learning_rate: float = 0.00035
    baseline_decay: float = 0.9
    entropy_weight: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class StrategyConfig:
    strategy_kind: str = "gpt4gnas"
    T: int = 15
    N: int = 10
    seed: int = 0
    explore_iterations: int = 3
    evo: EvoConfig = field(default_factory=EvoConfig)
    rl: RLConfig = field(default_factory=RLConfig)
    max_queries: int | None = None  # optional cap on unique oracle queries

    def __post_init__(self):
        if self.strategy_kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy {self.strategy_kind!r}")
        if self.T < 1 or self.N < 1:
            raise ValueError("T and N must be >= 1")
        if not 1 <= self.evo.parent_count <= self.evo.population_size:
            raise ValueError("need 1 <= parent_count <= population_size")
        for rate in (self.evo.mutation_rate, self.evo.crossover_rate):
            if not 0.0 <= rate <= 1.0:
                raise ValueError("rates must lie in [0, 1]")
        if self.rl.learning_rate < 0 or not 0.0 <= self.rl.baseline_decay <= 1.0:
            raise ValueError("invalid RL settings")

    @property
    def budget(self) -> int:
        """Upper bound on unique oracle queries for this configuration."""
        cap = self.T * self.N
        if self.strategy_kind == "evolutionary":
            cap += self.evo.population_size
        return cap if self.max_queries is None else min(cap, self.max_queries)

    def to_dict(self) -> dict:
        return asdict(self)


class CountingOracle:
    """Benchmark lookup that counts queries; every search goes through one."""

    def __init__(self, table: BenchmarkTable):
        self.table = table
        self.calls = 0
        self.keys: list[str] = []

    def __call__(self, arch: Architecture) -> BenchmarkRecord:
        self.calls += 1
        self.keys.append(arch.key)
        return query(self.table, arch)


@dataclass(frozen=True)
class Evaluation:
    arch: Architecture
    val_accuracy: float
    test_accuracy: float
    iteration: int
    order: int


class SearchState:
    """Evaluated history, best-so-far and the iteration counter."""

    def __init__(self):
        self.history: list[Evaluation] = []
        self.evaluated_keys: set[str] = set()
        self.best: Evaluation | None = None
        self.t = 0

    def __len__(self):
        return len(self.history)

    def seen(self, arch: Architecture) -> bool:
        return arch.key in self.evaluated_keys

    def add(self, arch: Architecture, record: BenchmarkRecord, iteration: int) -> Evaluation:
        if arch.key in self.evaluated_keys:
            raise ValueError(f"{arch.key} evaluated twice")
        ev = Evaluation(arch, record.val_accuracy, record.test_accuracy, iteration, len(self.history))
        self.history.append(ev)
        self.evaluated_keys.add(arch.key)
        # strict '>' keeps the earliest evaluation on ties
        if self.best is None or ev.val_accuracy > self.best.val_accuracy:
            self.best = ev
        return ev

    def ranked(self) -> list[Evaluation]:
        return sorted(self.history, key=lambda e: (-e.val_accuracy, e.order))

    def lookup(self, key: str) -> Evaluation | None:
        for e in self.history:
            if e.arch.key == key:
                return e
        return None


@dataclass
class IterationRecord:
    iteration: int
    batch_keys: list[str]
    accuracies: list[float]
    best_so_far_key: str | None
    best_so_far_acc: float | None
    unique_queries: int
    diagnostics: dict = field(default_factory=dict)
    topped_up: int = 0

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "batch_keys": list(self.batch_keys),
            "accuracies": [fmt_acc(a) for a in self.accuracies],
            "best_so_far_key": self.best_so_far_key,
            "best_so_far_acc": None if self.best_so_far_acc is None else fmt_acc(self.best_so_far_acc),
            "unique_queries": self.unique_queries,
            "diagnostics": dict(sorted(self.diagnostics.items())),
            "topped_up": self.topped_up,
        }


CSV_ITERATION_COLUMNS = (
    "iteration",
    "batch_keys",
    "accuracies",
    "best_so_far_key",
    "best_so_far_acc",
    "unique_queries",
    "diagnostics",
    "topped_up",
)


@dataclass
class SearchResult:
    strategy: str
    seed: int
    state: SearchState
    iterations: list[IterationRecord] = field(default_factory=list)
    status: str = "ok"  # ok | aborted | exhausted | stalled | interrupted
    error: str | None = None
    feedback_prompts: int = 0
    completions: int = 0
    transcripts: list = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    extras: dict = field(default_factory=dict, repr=False)

    @property
    def best(self) -> Evaluation | None:
        return self.state.best

    @property
    def failed(self) -> bool:
        return self.status == "aborted" or self.state.best is None

    def record_iteration(self, iteration: int, batch: list[Evaluation], diagnostics=None, topped_up=0):
        best = self.state.best
        self.iterations.append(
            IterationRecord(
                iteration=iteration,
                batch_keys=[e.arch.key for e in batch],
                accuracies=[e.val_accuracy for e in batch],
                best_so_far_key=best.arch.key if best else None,
                best_so_far_acc=best.val_accuracy if best else None,
                unique_queries=len(self.state.history),
                diagnostics=dict(diagnostics or {}),
                topped_up=topped_up,
            )
        )

    def report_dict(self) -> dict:
        best = self.state.best
        return {
            "strategy": self.strategy,
            "seed": self.seed,
            "status": self.status,
            "error": self.error,
            "feedback_prompts": self.feedback_prompts,
            "completions": self.completions,
            "unique_queries": len(self.state.history),
            "best_key": best.arch.key if best else None,
            "best_val_acc": fmt_acc(best.val_accuracy) if best else None,
            "best_test_acc": fmt_acc(best.test_accuracy) if best else None,
            "notes": list(self.notes),
            "iterations": [it.to_dict() for it in self.iterations],
        }

    def report_json(self) -> str:
        return json.dumps(self.report_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def report_csv_rows(self) -> list[list[str]]:
        rows = []
        for it in self.iterations:
            d = it.to_dict()
            rows.append(
                [
                    str(d["iteration"]),
                    ";".join(d["batch_keys"]),
                    ";".join(d["accuracies"]),
                    d["best_so_far_key"] or "",
                    d["best_so_far_acc"] or "",
                    str(d["unique_queries"]),
                    json.dumps(d["diagnostics"], sort_keys=True),
                    str(d["topped_up"]),
                ]
            )
        return rows


def evaluate_batch(
    archs: list[Architecture],
    state: SearchState,
    oracle: CountingOracle,
    iteration: int,
    budget: int,
    diagnostics: dict | None = None,
) -> list[Evaluation]:
    """Query unseen architectures (within budget) and merge them into ``state``.

    Keys missing from the table are dropped and counted, never scored.
    """
    out = []
    for arch in archs:
        if state.seen(arch):
            if diagnostics is not None:
                diagnostics["skipped_seen"] = diagnostics.get("skipped_seen", 0) + 1
            continue
        if len(state.history) >= budget:
            if diagnostics is not None:
                diagnostics["over_budget"] = diagnostics.get("over_budget", 0) + 1
            continue
        if arch not in oracle.table:
            if diagnostics is not None:
                diagnostics["not_found"] = diagnostics.get("not_found", 0) + 1
            continue
        out.append(state.add(arch, oracle(arch), iteration))
    return out


StopCheck = Callable[[], bool]
