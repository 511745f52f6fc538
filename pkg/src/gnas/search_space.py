"""Discrete GNN search space: macro topologies, operations and architectures.

An architecture is a fixed macro topology (a DAG over ``input``, four
operation nodes and ``output``) plus one candidate operation per node.
Everything here is immutable; enumeration streams can be recreated freely.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

NUM_SLOTS = 4
NUM_NODES = NUM_SLOTS + 2
NODE_NAMES = ("input", "op1", "op2", "op3", "op4", "output")

KEY_SEP = "|"
OP_SEP = ","


class SearchSpaceError(ValueError):
    """Base class for search-space configuration and contract errors."""


class TopologyStructureError(SearchSpaceError):
    """Adjacency matrix has the wrong shape or non-binary entries."""


class TopologyValidationError(SearchSpaceError):
    """Adjacency matrix is well formed but not a valid macro topology."""

    def __init__(self, topology_id: str, node: str, reason: str):
        self.topology_id = topology_id
        self.node = node
        super().__init__(f"topology {topology_id!r}: node {node} {reason}")


class ResolutionError(SearchSpaceError):
    """An op name or topology id does not resolve in the registry."""

    def __init__(self, message: str, unknown: Sequence[str] = ()):
        self.unknown = list(unknown)
        super().__init__(message)


class ArityError(SearchSpaceError):
    pass


def normalize_token(token: str) -> str:
    """Lookup form of an op spelling: casefolded, alphanumerics only."""
    return re.sub(r"[^0-9a-z]", "", token.casefold())


@dataclass(frozen=True)
class OperationKind:
    name: str
    aliases: tuple[str, ...] = ()
    description: str = ""

    def __post_init__(self):
        if not self.name or KEY_SEP in self.name or OP_SEP in self.name:
            raise SearchSpaceError(f"invalid operation name {self.name!r}")
        object.__setattr__(self, "aliases", tuple(self.aliases))


@dataclass(frozen=True, eq=False)
class MacroTopology:
    """Connection pattern shared by every architecture of a search space.

    ``adjacency[i][j]`` is true when node ``i`` feeds node ``j``; nodes are
    ordered as ``NODE_NAMES``.
    """

    id: str
    adjacency: tuple[tuple[bool, ...], ...]

    def __post_init__(self):
        validate_adjacency(self.id, self.adjacency)
        object.__setattr__(
            self, "adjacency", tuple(tuple(bool(v) for v in row) for row in self.adjacency)
        )

    def __eq__(self, other):
        if not isinstance(other, MacroTopology):
            return NotImplemented
        return self.id == other.id and self.adjacency == other.adjacency

    def __hash__(self):
        return hash((self.id, self.adjacency))

    @property
    def num_edges(self) -> int:
        return sum(sum(row) for row in self.adjacency)

    def rows(self) -> list[list[int]]:
        return [[int(v) for v in row] for row in self.adjacency]


def _check_structure(topology_id: str, matrix) -> list[list[int]]:
    if not isinstance(matrix, (list, tuple)) or len(matrix) != NUM_NODES:
        n = len(matrix) if isinstance(matrix, (list, tuple)) else "?"
        raise TopologyStructureError(
            f"topology {topology_id!r}: adjacency must have {NUM_NODES} rows, got {n}"
        )
    rows = []
    for i, row in enumerate(matrix):
        if not isinstance(row, (list, tuple)) or len(row) != NUM_NODES:
            raise TopologyStructureError(
                f"topology {topology_id!r}: row {i} must have {NUM_NODES} entries"
            )
        clean = []
        for v in row:
            if isinstance(v, bool) or v in (0, 1):
                clean.append(int(v))
            else:
                raise TopologyStructureError(
                    f"topology {topology_id!r}: row {i} has non-binary entry {v!r}"
                )
        rows.append(clean)
    return rows


def validate_adjacency(topology_id: str, matrix) -> None:
    rows = _check_structure(topology_id, matrix)
    for i in range(NUM_NODES):
        for j in range(i + 1):
            if rows[i][j]:
                raise TopologyValidationError(
                    topology_id,
                    NODE_NAMES[j],
                    f"has an edge from {NODE_NAMES[i]}; matrix must be strictly upper-triangular",
                )
    # forward reachability from input, backward from output (order is topological)
    from_input = [False] * NUM_NODES
    from_input[0] = True
    for j in range(1, NUM_NODES):
        from_input[j] = any(from_input[i] and rows[i][j] for i in range(j))
    to_output = [False] * NUM_NODES
    to_output[-1] = True
    for i in range(NUM_NODES - 2, -1, -1):
        to_output[i] = any(rows[i][j] and to_output[j] for j in range(i + 1, NUM_NODES))
    for node in range(1, NUM_NODES - 1):
        if not from_input[node]:
            raise TopologyValidationError(
                topology_id, NODE_NAMES[node], "is not reachable from input"
            )
        if not to_output[node]:
            raise TopologyValidationError(
                topology_id, NODE_NAMES[node], "has no path to output"
            )


def load_topologies(source: str | Path | Mapping | None = None) -> list[MacroTopology]:
    """Load and validate topologies from a JSON document, path or parsed mapping.

    ``None`` loads the bundled nine-entry default set.
    """
    if source is None:
        doc = json.loads(_bundled("topologies.json"))
    elif isinstance(source, Mapping):
        doc = source
    else:
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    entries = doc.get("topologies") if isinstance(doc, Mapping) else doc
    if not isinstance(entries, list):
        raise TopologyStructureError("topology config must hold a 'topologies' list")
    out, seen = [], set()
    for k, entry in enumerate(entries):
        if not isinstance(entry, Mapping) or "id" not in entry or "adjacency" not in entry:
            raise TopologyStructureError(f"topology entry {k} needs 'id' and 'adjacency'")
        tid = str(entry["id"])
        if tid in seen:
            raise TopologyStructureError(f"duplicate topology id {tid!r}")
        seen.add(tid)
        out.append(MacroTopology(tid, _check_structure(tid, entry["adjacency"])))
    return out


def load_operations(source: str | Path | Mapping | None = None) -> list[OperationKind]:
    if source is None:
        doc = json.loads(_bundled("operations.json"))
    elif isinstance(source, Mapping):
        doc = source
    else:
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    entries = doc.get("operations") if isinstance(doc, Mapping) else doc
    return [
        OperationKind(e["name"], tuple(e.get("aliases", ())), e.get("description", ""))
        for e in entries
    ]


def _bundled(name: str) -> str:
    return resources.files("gnas.data").joinpath(name).read_text(encoding="utf-8")


@dataclass(frozen=True, eq=False)
class Registry:
    """Operations and topologies known to a run, plus alias resolution."""

    operations: tuple[OperationKind, ...]
    topologies: Mapping[str, MacroTopology] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "operations", tuple(self.operations))
        object.__setattr__(self, "topologies", dict(self.topologies))
        _ = self._lookup  # validate aliases eagerly

    @cached_property
    def _lookup(self) -> dict[str, str]:
        table: dict[str, str] = {}
        for op in self.operations:
            for spelling in (op.name, *op.aliases):
                norm = normalize_token(spelling)
                if not norm:
                    continue
                owner = table.setdefault(norm, op.name)
                if owner != op.name:
                    raise SearchSpaceError(
                        f"alias {spelling!r} maps to both {owner} and {op.name}"
                    )
        return table

    @cached_property
    def by_name(self) -> dict[str, OperationKind]:
        return {op.name: op for op in self.operations}

    def resolve_op(self, token: str) -> str | None:
        """Canonical op name for ``token``, or None if it is unknown."""
        if not isinstance(token, str):
            return None
        return self._lookup.get(normalize_token(token))

    def topology(self, topology_id: str) -> MacroTopology:
        try:
            return self.topologies[topology_id]
        except KeyError:
            raise ResolutionError(
                f"unknown topology id {topology_id!r}", [topology_id]
            ) from None

    def space(self, topology_id: str, ops: Iterable[str] | None = None) -> "SearchSpace":
        if ops is None:
            kinds = self.operations
        else:
            names = [self.resolve_op(o) for o in ops]
            unknown = [o for o, n in zip(ops, names) if n is None]
            if unknown:
                raise ResolutionError(f"unknown operations: {unknown}", unknown)
            kinds = tuple(self.by_name[n] for n in dict.fromkeys(names))
        return SearchSpace(self.topology(topology_id), tuple(kinds))


_DEFAULT_REGISTRY: Registry | None = None


def default_registry() -> Registry:
    global _DEFAULT_REGISTRY
    if _DEFAULT_REGISTRY is None:
        _DEFAULT_REGISTRY = Registry(
            tuple(load_operations()), {t.id: t for t in load_topologies()}
        )
    return _DEFAULT_REGISTRY


@dataclass(frozen=True, order=True)
class Architecture:
    topology_id: str
    ops: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        if len(self.ops) != NUM_SLOTS:
            raise ArityError(f"{len(self.ops)} ops, expected {NUM_SLOTS}")

    @property
    def key(self) -> str:
        return encode(self)

    def __str__(self):
        return self.key


def encode(arch: Architecture) -> str:
    return f"{arch.topology_id}{KEY_SEP}{OP_SEP.join(arch.ops)}"


def decode(key: str, registry: Registry | None = None) -> Architecture:
    """Parse ``"topology|op1,op2,op3,op4"``, normalizing op aliases.

    With a registry whose topology table is empty, topology ids are not checked.
    """
    registry = registry or default_registry()
    if key.count(KEY_SEP) != 1:
        raise SearchSpaceError(f"malformed architecture key {key!r}")
    tid, ops_part = (s.strip() for s in key.split(KEY_SEP))
    tokens = [t.strip() for t in ops_part.split(OP_SEP)]
    unknown = []
    if registry.topologies and tid not in registry.topologies:
        unknown.append(tid)
    names = [registry.resolve_op(t) for t in tokens]
    unknown += [t for t, n in zip(tokens, names) if n is None]
    if unknown:
        raise ResolutionError(f"cannot resolve {unknown} in key {key!r}", unknown)
    return Architecture(tid, tuple(names))


@dataclass(frozen=True)
class SearchSpace:
    topology: MacroTopology
    operations: tuple[OperationKind, ...]

    def __post_init__(self):
        object.__setattr__(self, "operations", tuple(self.operations))
        if not self.operations:
            raise SearchSpaceError("search space needs at least one operation")

    @property
    def op_names(self) -> tuple[str, ...]:
        return tuple(op.name for op in self.operations)

    @property
    def cardinality(self) -> int:
        return len(self.operations) ** NUM_SLOTS

    def __len__(self):
        return self.cardinality

    def __contains__(self, arch: Architecture) -> bool:
        names = set(self.op_names)
        return arch.topology_id == self.topology.id and all(o in names for o in arch.ops)

    def architecture(self, indices: Sequence[int]) -> Architecture:
        names = self.op_names
        return Architecture(self.topology.id, tuple(names[i] for i in indices))


def enumerate_architectures(space: SearchSpace) -> Iterator[Architecture]:
    """Every architecture once, in lexicographic order of the op list."""
    names = space.op_names
    for combo in itertools.product(names, repeat=NUM_SLOTS):
        yield Architecture(space.topology.id, combo)


def categorical_draw(u: float, probs: np.ndarray) -> int:
    """Inverse-CDF sample of an index from ``probs`` given a uniform ``u``."""
    cdf = np.cumsum(probs)
    return min(int(np.searchsorted(cdf, u * cdf[-1], side="right")), len(probs) - 1)


def _draw_indices(us: np.ndarray, slot_probs: Sequence[np.ndarray]) -> np.ndarray:
    """Vectorized :func:`categorical_draw` over rows of ``us`` (one column per slot)."""
    out = np.empty(us.shape, dtype=np.int64)
    for s, p in enumerate(slot_probs):
        cdf = np.cumsum(p)
        idx = np.searchsorted(cdf, us[:, s] * cdf[-1], side="right")
        out[:, s] = np.minimum(idx, len(p) - 1)
    return out


def uniform_probs(k: int) -> np.ndarray:
    return np.full(k, 1.0 / k)


def _slot_probs(space: SearchSpace, slot_probs) -> list[np.ndarray]:
    if slot_probs is None:
        return [uniform_probs(len(space.operations))] * NUM_SLOTS
    return [np.asarray(p, dtype=float) for p in slot_probs]


def sample_architecture(
    space: SearchSpace, rng: np.random.Generator, slot_probs: Sequence[np.ndarray] | None = None
) -> Architecture:
    """One architecture from independent per-slot categoricals (uniform by default).

    Always consumes exactly ``NUM_SLOTS`` uniforms from ``rng`` so that
    samplers with different slot distributions share one stream discipline.
    """
    probs = _slot_probs(space, slot_probs)
    return space.architecture(_draw_indices(rng.random((1, NUM_SLOTS)), probs)[0])


def random_architecture(space: SearchSpace, rng: np.random.Generator) -> Architecture:
    return sample_architecture(space, rng)


# attempts per rejection round; the first round is a single draw
_REJECTION_ROUNDS = (1, 4, 16, 64, 256, 1024)


def draw_unseen(
    space: SearchSpace,
    rng: np.random.Generator,
    seen: set[str],
    slot_probs: Sequence[np.ndarray] | None = None,
) -> Architecture | None:
    """Sample an architecture whose key is not in ``seen``; None once exhausted.

    Rejection sampling in rounds of growing size (the remainder of a round is
    discarded). If every round misses, picks among the unseen architectures
    with probability proportional to their likelihood under ``slot_probs``.
    Every sampler in the package draws through here, so equal slot
    distributions and seeds give equal trajectories.
    """
    if len(seen) >= space.cardinality:
        return None
    probs = _slot_probs(space, slot_probs)
    grid, keys = _grid(space)
    k = len(space.operations)
    place = k ** np.arange(NUM_SLOTS - 1, -1, -1)
    for size in _REJECTION_ROUNDS:
        idx = _draw_indices(rng.random((size, NUM_SLOTS)), probs)
        for code in idx @ place:
            if keys[code] not in seen:
                return space.architecture(grid[code])
    unseen = np.fromiter((k not in seen for k in keys), dtype=bool, count=len(keys))
    if not unseen.any():
        return None
    weights = np.ones(len(keys))
    for s, p in enumerate(probs):
        weights *= p[grid[:, s]]
    weights = np.where(unseen, weights, 0.0)
    if weights.sum() <= 0:
        weights = unseen.astype(float)
    choice = categorical_draw(rng.random(), weights)
    return space.architecture(grid[choice])


_GRID_CACHE: dict = {}


def _grid(space: SearchSpace) -> tuple[np.ndarray, list[str]]:
    ck = (space.topology.id, space.op_names)
    if ck not in _GRID_CACHE:
        k = len(space.operations)
        grid = np.array(list(itertools.product(range(k), repeat=NUM_SLOTS)), dtype=np.int64)
        keys = [a.key for a in enumerate_architectures(space)]
        _GRID_CACHE[ck] = (grid, keys)
    return _GRID_CACHE[ck]


def mutate(
    arch: Architecture, space: SearchSpace, rng: np.random.Generator, rate: float
) -> Architecture:
    """Flip each slot with probability ``rate`` to a uniformly chosen different op."""
    names = space.op_names
    ops = list(arch.ops)
    flips = rng.random(NUM_SLOTS) < rate
    for i in range(NUM_SLOTS):
        if flips[i] and len(names) > 1:
            choices = [n for n in names if n != ops[i]]
            ops[i] = choices[int(rng.integers(len(choices)))]
    return Architecture(arch.topology_id, tuple(ops))


def crossover(a: Architecture, b: Architecture, rng: np.random.Generator) -> Architecture:
    """Uniform crossover: each slot comes from ``a`` or ``b`` with probability 1/2."""
    if a.topology_id != b.topology_id:
        raise SearchSpaceError(
            f"crossover across topologies {a.topology_id!r} and {b.topology_id!r}"
        )
    pick = rng.random(NUM_SLOTS) < 0.5
    ops = tuple(x if p else y for x, y, p in zip(a.ops, b.ops, pick))
    return Architecture(a.topology_id, ops)
