from __future__ import annotations

import numpy as np

from ..oracle import BenchmarkTable
from ..search_space import SearchSpace, draw_unseen
from .base import CountingOracle, SearchResult, SearchState, StopCheck, StrategyConfig, evaluate_batch


def run_random(
    space: SearchSpace, table: BenchmarkTable, cfg: StrategyConfig, stop: StopCheck | None = None
) -> SearchResult:
    """Uniform sampling without replacement, N per iteration for T iterations."""
    state = SearchState()
    result = SearchResult("random", cfg.seed, state)
    oracle = CountingOracle(table)
    rng = np.random.default_rng(cfg.seed)
    taken: set[str] = set()
    budget = cfg.budget
    for t in range(1, cfg.T + 1):
        if stop is not None and stop():
            result.status = "interrupted"
            break
        batch, exhausted = [], False
        while len(batch) < cfg.N and len(taken) < budget:
            arch = draw_unseen(space, rng, taken)
            if arch is None:
                exhausted = True
                break
            taken.add(arch.key)
            batch.append(arch)
        counters: dict = {}
        evals = evaluate_batch(batch, state, oracle, t, budget, counters)
        state.t = t
        result.record_iteration(t, evals, counters)
        if exhausted:
            result.status = "exhausted"
            result.notes.append(f"search space exhausted after {len(taken)} architectures")
            break
    return result
