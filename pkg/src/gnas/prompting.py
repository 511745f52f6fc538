"""Prompt rendering and response parsing for the LLM-driven search.

The search prompt describes the task, the search space (adjacency matrix and
candidate operations) and the explore/exploit strategy; the feedback prompt
lists evaluated models with their accuracies. Both end with a fixed output
contract so responses can be parsed back into architectures.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

from .search_space import NODE_NAMES, NUM_SLOTS, Architecture, SearchSpace

if TYPE_CHECKING:
    from .strategies.base import SearchState

OUTPUT_FORMAT_VERSION = "gnas-output-v1"

SYSTEM_TEXT = (
    "You are an expert in graph neural networks and neural architecture search. "
    "Follow the output format exactly."
)

TASK_MARKER = "// Search Task"
SPACE_MARKER = "// Search Space"
STRATEGY_MARKER = "// Search Strategy"
FEEDBACK_MARKER = "// Search Feedback"
OUTPUT_MARKER = "// Output Format"

# Substrings owned by each ablatable part of the prompt.
CONNECTIONS_TEXT = "The adjacency matrix of operation connections is as follows:"
OPERATIONS_TEXT = "operations that can be selected:"
EXPLORATION_TEXT = "Randomly select a batch of operations for evaluation."
EXPLOITATION_TEXT = (
    "sampling the best candidate operations from previously generated candidates"
)

TASK_TEMPLATE = (
    "The task is to choose the best GNN architecture on a given dataset. "
    "The architecture will be trained and tested on {dataset}, and the objective "
    "is to maximize model accuracy."
)
SPACE_PREAMBLE = (
    "A GNN architecture is defined as follows: The first operation is input, the last "
    "operation is output, and the intermediate operations are candidate operations."
)
CONNECTIONS_EXPLAIN = (
    "where the (i,j)-th element in the adjacency matrix denotes that the output of "
    "operation i will be used as the input of operation j."
)
STRATEGY_TEMPLATE = (
    "At the beginning, when only a few numbers of evaluated architectures are "
    "available, use the exploration strategy to explore the operations. "
    + EXPLORATION_TEXT
    + " When a certain amount of evaluated architectures are available, use the "
    "exploitation strategy to find the best operations by "
    + EXPLOITATION_TEXT
    + ".\nFor the first {explore} iterations, explore; afterwards, exploit."
)

# Versioned; tests pin this text.
OUTPUT_CONTRACT = (
    "Propose exactly {n} new architectures. Reply with one fenced code block "
    "marked json that contains a JSON array of exactly {n} objects, one per "
    'architecture, each of the form {{"ops": ["<op1>", "<op2>", "<op3>", "<op4>"]}}, '
    "where <opK> is the candidate operation assigned to operation node opK. "
    "Use the operation names exactly as listed. Put nothing else inside the code block."
)
FEEDBACK_LINE = "Model [{key}] achieves an accuracy of {acc}."
FEEDBACK_LINE_RE = re.compile(r"Model \[[^\]]+\] achieves an accuracy of [0-9.]+")
FEEDBACK_INTRO = "The following architectures have been evaluated so far:"
FEEDBACK_REQUEST = (
    "Based on these results, propose {n} new architectures that are not among the "
    "models reported above."
)
TRUNCATION_NOTE = (
    "(Only the top {k} of {total} evaluated models by accuracy and every model from "
    "the most recent iteration are listed, to respect the prompt length limit.)"
)


@dataclass(frozen=True)
class Ablation:
    include_connections: bool = True
    include_operations: bool = True
    include_strategy: bool = True

    @classmethod
    def from_name(cls, name: str | None) -> "Ablation":
        name = (name or "none").strip().lower()
        table = {
            "none": cls(),
            "no-connections": cls(include_connections=False),
            "no-operations": cls(include_operations=False),
            "no-strategy": cls(include_strategy=False),
        }
        if name not in table:
            raise ValueError(f"unknown ablation {name!r}; expected one of {sorted(table)}")
        return table[name]

    @property
    def name(self) -> str:
        off = [
            n
            for n, on in (
                ("no-connections", self.include_connections),
                ("no-operations", self.include_operations),
                ("no-strategy", self.include_strategy),
            )
            if not on
        ]
        return "+".join(off) if off else "none"

    @property
    def label(self) -> str:
        labels = {
            "none": "GPT4GNAS",
            "no-connections": "¬Connections",
            "no-operations": "¬Operation",
            "no-strategy": "¬Strategy",
        }
        return labels.get(self.name, self.name)


@dataclass(frozen=True)
class PromptOptions:
    """Rendering knobs shared by search and feedback prompts."""

    ablation: Ablation = field(default_factory=Ablation)
    explore_iterations: int = 3
    token_budget: int = 6000
    reattach_context: bool = True


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str
    ablation: Ablation
    kind: str = "search"
    n_requested: int = 0
    truncated: bool = False

    def __post_init__(self):
        if not self.user_text:
            raise ValueError("prompt body must be non-empty")

    @property
    def token_estimate(self) -> int:
        return estimate_tokens(self.system_text) + estimate_tokens(self.user_text)

    def messages(self) -> list[dict]:
        return [
            {"role": "system", "content": self.system_text},
            {"role": "user", "content": self.user_text},
        ]


def estimate_tokens(text: str) -> int:
    """Rough size: about four characters per token."""
    return math.ceil(len(text) / 4)


def render_adjacency(space: SearchSpace) -> list[str]:
    width = max(len(n) for n in NODE_NAMES)
    return [
        f"{name.ljust(width)}  [{', '.join(str(v) for v in row)}]"
        for name, row in zip(NODE_NAMES, space.topology.rows())
    ]


def _task_section(dataset: str) -> str:
    return f"{TASK_MARKER}\n{TASK_TEMPLATE.format(dataset=dataset)}"


def _space_section(space: SearchSpace, ablation: Ablation) -> str | None:
    if not (ablation.include_connections or ablation.include_operations):
        return None
    parts = [SPACE_MARKER, SPACE_PREAMBLE]
    if ablation.include_connections:
        parts.append(CONNECTIONS_TEXT)
        parts.append("        " + "  ".join(NODE_NAMES))
        parts.extend(render_adjacency(space))
        parts.append(CONNECTIONS_EXPLAIN)
    if ablation.include_operations:
        ops = space.operations
        parts.append(f"There are {len(ops)} {OPERATIONS_TEXT}")
        for op in ops:
            parts.append(f"- {op.name}: {op.description}" if op.description else f"- {op.name}")
    return "\n".join(parts)


def _strategy_section(explore: int) -> str:
    return f"{STRATEGY_MARKER}\n{STRATEGY_TEMPLATE.format(explore=explore)}"


def _output_section(n: int) -> str:
    return f"{OUTPUT_MARKER}\n{OUTPUT_CONTRACT.format(n=n)}"


def _context_sections(dataset, space, opts: PromptOptions) -> list[str]:
    sections = [_task_section(dataset)]
    space_text = _space_section(space, opts.ablation)
    if space_text:
        sections.append(space_text)
    if opts.ablation.include_strategy:
        sections.append(_strategy_section(opts.explore_iterations))
    return sections


def build_gnas_prompt(
    dataset: str, space: SearchSpace, n: int, opts: PromptOptions | None = None
) -> PromptBundle:
    """The initial search prompt: task, space, strategy, output contract."""
    if not dataset:
        raise ValueError("dataset name must be non-empty")
    opts = opts or PromptOptions()
    sections = _context_sections(dataset, space, opts) + [_output_section(n)]
    return PromptBundle(SYSTEM_TEXT, "\n\n".join(sections), opts.ablation, "search", n)


def feedback_line(key: str, acc: float) -> str:
    return FEEDBACK_LINE.format(key=key, acc=f"{acc:.2f}")


def select_feedback(state: "SearchState", k: int):
    """History entries reported when truncating: top-``k`` plus the last iteration."""
    last_t = state.history[-1].iteration
    top = {e.arch.key for e in state.ranked()[:k]}
    return [e for e in state.history if e.arch.key in top or e.iteration == last_t]


def build_feedback_prompt(
    state: "SearchState",
    dataset: str,
    space: SearchSpace,
    n: int,
    opts: PromptOptions | None = None,
) -> PromptBundle:
    """Feedback prompt listing evaluated models, truncated to ``opts.token_budget``."""
    opts = opts or PromptOptions()
    if not state.history:
        raise ValueError("feedback prompt needs at least one evaluated architecture")
    head = _context_sections(dataset, space, opts) if opts.reattach_context else []
    tail = [
        FEEDBACK_REQUEST.format(n=n),
        _output_section(n),
    ]

    def render(entries, note: str | None) -> str:
        lines = [FEEDBACK_MARKER, FEEDBACK_INTRO]
        if note:
            lines.append(note)
        lines += [feedback_line(e.arch.key, e.val_accuracy) for e in entries]
        return "\n\n".join(head + ["\n".join(lines)] + tail)

    text = render(state.history, None)
    truncated = False
    if estimate_tokens(SYSTEM_TEXT) + estimate_tokens(text) > opts.token_budget:
        truncated = True
        total = len(state.history)
        # largest k that fits; k >= 1 keeps the best-so-far in view regardless
        lo, hi = 1, total
        while lo < hi:
            mid = (lo + hi + 1) // 2
            cand = render(select_feedback(state, mid), TRUNCATION_NOTE.format(k=mid, total=total))
            if estimate_tokens(SYSTEM_TEXT) + estimate_tokens(cand) <= opts.token_budget:
                lo = mid
            else:
                hi = mid - 1
        text = render(select_feedback(state, lo), TRUNCATION_NOTE.format(k=lo, total=total))
    return PromptBundle(SYSTEM_TEXT, text, opts.ablation, "feedback", n, truncated)


# -- response parsing ------------------------------------------------------


class ParseError(ValueError):
    pass


class EmptyBatch(ParseError):
    """No valid architecture could be extracted from a response."""

    def __init__(self, diagnostics: "ParseDiagnostics"):
        self.diagnostics = diagnostics
        super().__init__(f"no valid architectures in response ({diagnostics.summary()})")


@dataclass
class ParseDiagnostics:
    raw_blocks_found: int = 0
    raw_candidates: int = 0
    valid: int = 0
    dropped_invalid_op: list[str] = field(default_factory=list)
    dropped_invalid_entries: int = 0
    dropped_malformed: int = 0
    dropped_duplicates: int = 0
    dropped_already_evaluated: int = 0
    dropped_excess: int = 0

    @property
    def dropped(self) -> int:
        return (
            self.dropped_invalid_entries
            + self.dropped_malformed
            + self.dropped_duplicates
            + self.dropped_already_evaluated
            + self.dropped_excess
        )

    def summary(self) -> str:
        return (
            f"blocks={self.raw_blocks_found} candidates={self.raw_candidates} "
            f"valid={self.valid} invalid_op={self.dropped_invalid_entries} "
            f"malformed={self.dropped_malformed} dup={self.dropped_duplicates} "
            f"seen={self.dropped_already_evaluated} excess={self.dropped_excess}"
        )

    def counters(self) -> dict:
        return {
            "raw_blocks_found": self.raw_blocks_found,
            "raw_candidates": self.raw_candidates,
            "valid": self.valid,
            "dropped_invalid_op": self.dropped_invalid_entries,
            "dropped_malformed": self.dropped_malformed,
            "dropped_duplicates": self.dropped_duplicates,
            "dropped_already_evaluated": self.dropped_already_evaluated,
            "dropped_excess": self.dropped_excess,
        }


_FENCE_RE = re.compile(r"```[ \t]*([A-Za-z0-9_-]*)[^\n]*\n(.*?)```", re.S)


def _bare_arrays(text: str) -> list:
    """Top-level JSON arrays embedded anywhere in ``text``."""
    decoder = json.JSONDecoder()
    found, i = [], 0
    while True:
        i = text.find("[", i)
        if i < 0:
            return found
        try:
            value, end = decoder.raw_decode(text, i)
        except json.JSONDecodeError:
            i += 1
            continue
        if isinstance(value, list) and value:
            found.append(value)
        i = end


def _is_candidate_array(value) -> bool:
    return isinstance(value, list) and any(
        isinstance(v, dict) or (isinstance(v, list) and all(isinstance(x, str) for x in v))
        for v in value
    )


def extract_candidates(text: str) -> tuple[list, int]:
    """Candidate entries from fenced JSON arrays, falling back to bare arrays."""
    blocks = 0
    entries: list = []
    for match in _FENCE_RE.finditer(text or ""):
        body = match.group(2).strip()
        try:
            value = json.loads(body)
        except json.JSONDecodeError:
            arrays = [a for a in _bare_arrays(body) if _is_candidate_array(a)]
            if not arrays:
                continue
            value = arrays[0]
        if isinstance(value, dict) and isinstance(value.get("architectures"), list):
            value = value["architectures"]
        if _is_candidate_array(value):
            blocks += 1
            entries.extend(value)
    if blocks:
        return entries, blocks
    for arr in _bare_arrays(text or ""):
        if _is_candidate_array(arr):
            blocks += 1
            entries.extend(arr)
    return entries, blocks


def _entry_tokens(entry):
    if isinstance(entry, dict):
        entry = entry.get("ops", entry.get("operations"))
    if isinstance(entry, list) and all(isinstance(t, str) for t in entry):
        return entry
    return None


def parse_architectures(
    text: str,
    space: SearchSpace,
    n_expected: int,
    already_seen: Iterable[str] = (),
    registry=None,
) -> tuple[list[Architecture], ParseDiagnostics]:
    """Extract at most ``n_expected`` new, valid architectures from ``text``.

    Raises :class:`EmptyBatch` when nothing valid remains.
    """
    from .search_space import default_registry

    registry = registry or default_registry()
    seen = set(already_seen)
    allowed = set(space.op_names)
    diag = ParseDiagnostics()
    entries, diag.raw_blocks_found = extract_candidates(text)
    diag.raw_candidates = len(entries)
    out: list[Architecture] = []
    batch_keys: set[str] = set()
    for entry in entries:
        tokens = _entry_tokens(entry)
        if tokens is None or len(tokens) != NUM_SLOTS:
            diag.dropped_malformed += 1
            continue
        names = [registry.resolve_op(t) for t in tokens]
        bad = [t for t, n in zip(tokens, names) if n is None or n not in allowed]
        if bad:
            diag.dropped_invalid_entries += 1
            diag.dropped_invalid_op.extend(bad)
            continue
        arch = Architecture(space.topology.id, tuple(names))
        if arch.key in batch_keys:
            diag.dropped_duplicates += 1
        elif arch.key in seen:
            diag.dropped_already_evaluated += 1
        elif len(out) >= n_expected:
            diag.dropped_excess += 1
        else:
            batch_keys.add(arch.key)
            out.append(arch)
    diag.valid = len(out)
    if not out:
        raise EmptyBatch(diag)
    return out, diag


def format_response(archs: Sequence[Architecture], preamble: str = "") -> str:
    """Render architectures in the mandated output format (used by mocks and tests)."""
    body = json.dumps([{"ops": list(a.ops)} for a in archs], indent=2)
    head = f"{preamble}\n\n" if preamble else ""
    return f"{head}```json\n{body}\n```\n"
