"""Tabular evaluation oracle.

A :class:`BenchmarkTable` maps architecture keys to precomputed accuracies so
a search can evaluate candidates by lookup instead of training. Tables load
from ``.gnasbench.json`` documents or are generated deterministically by
:func:`synth_benchmark` for tests and desk-scale experiments.

Accuracies are canonicalized to two fractional digits on the way in, and
written back with exactly two, so load/dump cycles are bit-exact.
"""

from __future__ import annotations

import bisect
import hashlib
import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .search_space import (
    NUM_SLOTS,
    Architecture,
    Registry,
    SearchSpace,
    SearchSpaceError,
    decode,
    default_registry,
    enumerate_architectures,
)

BENCH_SUFFIX = ".gnasbench.json"
DEFAULT_GENERATION_CAP = 10**6
_CENT = Decimal("0.01")


class BenchmarkError(ValueError):
    pass


class SchemaError(BenchmarkError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        where = f"record {offset}: " if offset is not None else ""
        super().__init__(where + message)


class AccuracyRangeError(BenchmarkError):
    pass


class DuplicateKeyError(BenchmarkError):
    pass


class EmptyBenchmarkError(BenchmarkError):
    def __init__(self):
        super().__init__("empty benchmark")


class NotFoundError(KeyError):
    """Architecture key absent from the table. The oracle never invents values."""

    def __init__(self, key: str):
        self.key = key
        super().__init__(key)

    def __str__(self):
        return f"architecture not in benchmark: {self.key}"


class GenerationCapError(BenchmarkError):
    pass


def canonical_accuracy(value) -> float:
    """Round to two fractional digits (half-up) and return the nearest float."""
    try:
        d = Decimal(str(value)) if not isinstance(value, Decimal) else value
        d = d.quantize(_CENT, rounding=ROUND_HALF_UP)
    except (InvalidOperation, ValueError):
        raise AccuracyRangeError(f"not a number: {value!r}") from None
    return float(d)


def fmt_acc(value: float) -> str:
    return f"{value:.2f}"


@dataclass(frozen=True)
class BenchmarkRecord:
    arch_key: str
    val_accuracy: float
    test_accuracy: float
    params: float | None = None
    latency_ms: float | None = None

    def __post_init__(self):
        for name in ("val_accuracy", "test_accuracy"):
            v = getattr(self, name)
            if not (0.0 <= v <= 100.0):
                raise AccuracyRangeError(f"{self.arch_key}: {name} {v} outside [0, 100]")


@dataclass(frozen=True, eq=False)
class BenchmarkTable:
    dataset: str
    records: Mapping[str, BenchmarkRecord]
    registry: Registry = field(default_factory=default_registry, repr=False)

    def __post_init__(self):
        if not self.records:
            raise EmptyBenchmarkError()
        records = dict(self.records)
        object.__setattr__(self, "records", records)
        # ties ordered by key so the index is reproducible
        order = sorted(records, key=lambda k: (-records[k].val_accuracy, k))
        object.__setattr__(self, "rank_index", tuple(order))
        object.__setattr__(
            self, "_val_sorted", sorted(r.val_accuracy for r in records.values())
        )
        object.__setattr__(
            self, "_test_sorted", sorted(r.test_accuracy for r in records.values())
        )

    def __len__(self):
        return len(self.records)

    def __contains__(self, item) -> bool:
        key = item.key if isinstance(item, Architecture) else item
        return key in self.records

    @property
    def topology_ids(self) -> list[str]:
        return sorted({k.split("|", 1)[0] for k in self.records})

    def restrict(self, topology_id: str) -> "BenchmarkTable":
        prefix = topology_id + "|"
        sub = {k: r for k, r in self.records.items() if k.startswith(prefix)}
        if not sub:
            raise BenchmarkError(
                f"benchmark {self.dataset!r} has no records for topology {topology_id!r}"
            )
        return BenchmarkTable(self.dataset, sub, self.registry)

    def to_json(self) -> str:
        return dump_benchmark(self)


def query(table: BenchmarkTable, arch: Architecture | str) -> BenchmarkRecord:
    key = arch.key if isinstance(arch, Architecture) else arch
    try:
        return table.records[key]
    except KeyError:
        raise NotFoundError(key) from None


def _competition_rank(sorted_values: list[float], value: float) -> int:
    return 1 + len(sorted_values) - bisect.bisect_right(sorted_values, value)


def rank(table: BenchmarkTable, arch: Architecture | str, metric: str = "val") -> int:
    """1-based competition rank: 1 + number of records with strictly higher accuracy."""
    rec = query(table, arch)
    if metric == "val":
        return _competition_rank(table._val_sorted, rec.val_accuracy)
    if metric == "test":
        return _competition_rank(table._test_sorted, rec.test_accuracy)
    raise ValueError(f"unknown metric {metric!r}")


def rank_of_value(table: BenchmarkTable, value: float, metric: str = "val") -> int:
    values = table._val_sorted if metric == "val" else table._test_sorted
    return _competition_rank(values, value)


def top_k(table: BenchmarkTable, k: int) -> list[tuple[Architecture, BenchmarkRecord]]:
    if not 1 <= k <= len(table):
        raise ValueError(f"k={k} outside [1, {len(table)}]")
    return [
        (decode(key, table.registry), table.records[key]) for key in table.rank_index[:k]
    ]


def op_baseline(table: BenchmarkTable, op: str) -> tuple[BenchmarkRecord, int, int]:
    """Best-by-val record among architectures using ``op`` in every slot, any topology.

    Returns the record with its val and test rank over the whole table; this is
    how fixed hand-designed GNNs are placed against a benchmark.
    """
    name = table.registry.resolve_op(op) or op
    cands = [
        r for k, r in table.records.items() if all(o == name for o in k.split("|", 1)[1].split(","))
    ]
    if not cands:
        raise NotFoundError(f"*|{name},{name},{name},{name}")
    best = min(cands, key=lambda r: (-r.val_accuracy, r.arch_key))
    return best, rank(table, best.arch_key, "val"), rank(table, best.arch_key, "test")


# -- serialization ---------------------------------------------------------


def _num(v: Decimal | int | float, name: str, offset: int) -> Decimal:
    if isinstance(v, bool) or not isinstance(v, (int, float, Decimal)):
        raise SchemaError(f"{name} must be a number, got {v!r}", offset)
    return v if isinstance(v, Decimal) else Decimal(str(v))


def parse_benchmark(doc: Mapping, registry: Registry | None = None) -> BenchmarkTable:
    registry = registry or default_registry()
    if not isinstance(doc, Mapping):
        raise SchemaError("document must be an object")
    dataset = doc.get("dataset")
    if not isinstance(dataset, str) or not dataset:
        raise SchemaError("'dataset' must be a non-empty string")
    raw = doc.get("records")
    if not isinstance(raw, list):
        raise SchemaError("'records' must be a list")
    if not raw:
        raise EmptyBenchmarkError()
    records: dict[str, BenchmarkRecord] = {}
    for i, item in enumerate(raw):
        if not isinstance(item, Mapping):
            raise SchemaError("record must be an object", i)
        for req in ("arch", "val_acc", "test_acc"):
            if req not in item:
                raise SchemaError(f"missing field {req!r}", i)
        if not isinstance(item["arch"], str):
            raise SchemaError("'arch' must be a string", i)
        try:
            arch = decode(item["arch"], registry)
        except SearchSpaceError as exc:
            raise SchemaError(str(exc), i) from None
        key = arch.key
        if key in records:
            raise DuplicateKeyError(f"record {i}: duplicate architecture {key}")
        val = _num(item["val_acc"], "val_acc", i)
        test = _num(item["test_acc"], "test_acc", i)
        for name, v in (("val_acc", val), ("test_acc", test)):
            if not (0 <= v <= 100):
                raise AccuracyRangeError(f"record {i}: {name} {v} outside [0, 100]")
        opt = {}
        for name in ("params", "latency_ms"):
            if item.get(name) is not None:
                opt[name] = float(_num(item[name], name, i))
        records[key] = BenchmarkRecord(
            key, canonical_accuracy(val), canonical_accuracy(test), **opt
        )
    return BenchmarkTable(dataset, records, registry)


def load_benchmark(path: str | Path, registry: Registry | None = None) -> BenchmarkTable:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from None
    return parse_benchmark(doc, registry)


def _fmt_opt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def dump_benchmark(table: BenchmarkTable) -> str:
    """Serialize in key order; accuracy fields always carry two decimals."""
    lines = []
    for key in sorted(table.records):
        r = table.records[key]
        parts = [
            f'"arch": {json.dumps(key)}',
            f'"val_acc": {fmt_acc(r.val_accuracy)}',
            f'"test_acc": {fmt_acc(r.test_accuracy)}',
        ]
        if r.params is not None:
            parts.append(f'"params": {_fmt_opt(r.params)}')
        if r.latency_ms is not None:
            parts.append(f'"latency_ms": {_fmt_opt(r.latency_ms)}')
        lines.append("    {" + ", ".join(parts) + "}")
    body = ",\n".join(lines)
    return f'{{\n  "dataset": {json.dumps(table.dataset)},\n  "records": [\n{body}\n  ]\n}}\n'


def save_benchmark(table: BenchmarkTable, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(dump_benchmark(table), encoding="utf-8")
    return path


# -- synthetic fixtures ----------------------------------------------------

SYNTH_BASE = 62.0
SYNTH_SLOT_EFFECT = 1.5  # per-(slot, op) structured effect in [0, this)
SYNTH_VAL_NOISE = 2.0  # val noise in [0, this)
SYNTH_TEST_NOISE = 2.0  # test = val + noise in [-this, this]
SYNTH_PLANTED_BONUS = 4.0  # per slot matching the planted pattern
SYNTH_MIN, SYNTH_MAX = 50.0, 95.0


def _unit(*parts) -> float:
    """Deterministic uniform in [0, 1) from a hash of ``parts``."""
    h = hashlib.blake2b("\x1f".join(map(str, parts)).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "big") / 2.0**64


def _clamp(x: float, lo: float = SYNTH_MIN, hi: float = SYNTH_MAX) -> float:
    return min(max(x, lo), hi)


def synth_accuracy(
    arch: Architecture, seed: int, planted: Sequence[str] | None = None
) -> tuple[float, float]:
    """The generating function behind :func:`synth_benchmark`: (val, test).

    The planted bonus (4 per matching slot) exceeds the largest possible gain
    from slot effects plus noise on a single slot, so the fully matching
    architecture is the unique maximum.
    """
    key = arch.key
    val = SYNTH_BASE
    for slot, op in enumerate(arch.ops):
        val += SYNTH_SLOT_EFFECT * _unit("effect", seed, arch.topology_id, slot, op)
    val += SYNTH_VAL_NOISE * _unit("val", seed, key)
    if planted is not None:
        val += SYNTH_PLANTED_BONUS * sum(a == b for a, b in zip(arch.ops, planted))
    val = canonical_accuracy(_clamp(val))
    test = val + SYNTH_TEST_NOISE * (2.0 * _unit("test", seed, key) - 1.0)
    return val, canonical_accuracy(_clamp(test))


def synth_benchmark(
    space: SearchSpace,
    dataset: str = "synthetic",
    seed: int = 0,
    planted: Sequence[str] | str | None = None,
    cap: int = DEFAULT_GENERATION_CAP,
    registry: Registry | None = None,
) -> BenchmarkTable:
    if space.cardinality > cap:
        raise GenerationCapError(
            f"space has {space.cardinality} architectures, generation cap is {cap}"
        )
    registry = registry or default_registry()
    if isinstance(planted, str):
        planted = [t.strip() for t in planted.split(",")]
    if planted is not None:
        resolved = [registry.resolve_op(t) for t in planted]
        bad = [t for t, r in zip(planted, resolved) if r is None or r not in space.op_names]
        if bad or len(resolved) != NUM_SLOTS:
            raise BenchmarkError(f"planted pattern {list(planted)} invalid for this space")
        planted = resolved
    records = {}
    for arch in enumerate_architectures(space):
        val, test = synth_accuracy(arch, seed, planted)
        records[arch.key] = BenchmarkRecord(arch.key, val, test)
    return BenchmarkTable(dataset, records, registry)


def table_from_values(
    dataset: str, values: Mapping[str, float] | Iterable[tuple[str, float]], registry=None
) -> BenchmarkTable:
    """Small helper for hand-built tables: test accuracy mirrors val."""
    items = values.items() if isinstance(values, Mapping) else values
    recs = {}
    for key, v in items:
        v = canonical_accuracy(v)
        recs[key] = BenchmarkRecord(key, v, v)
    return BenchmarkTable(dataset, recs, registry or default_registry())
