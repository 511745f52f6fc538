"""Steady-state genetic search: truncation parent selection, uniform crossover,
per-slot mutation, worst-out replacement."""

from __future__ import annotations

import numpy as np

from ..oracle import BenchmarkTable
from ..search_space import SearchSpace, crossover, draw_unseen, mutate
from .base import (
    CountingOracle,
    Evaluation,
    SearchResult,
    SearchState,
    StopCheck,
    StrategyConfig,
    evaluate_batch,
)

CHILD_ATTEMPTS_PER_SLOT = 10


def _fitness_order(e: Evaluation):
    return (-e.val_accuracy, e.order)


def run_evolutionary(
    space: SearchSpace, table: BenchmarkTable, cfg: StrategyConfig, stop: StopCheck | None = None
) -> SearchResult:
    evo = cfg.evo
    state = SearchState()
    result = SearchResult("evolutionary", cfg.seed, state)
    oracle = CountingOracle(table)
    rng = np.random.default_rng(cfg.seed)
    budget = cfg.budget
    taken: set[str] = set()

    init = []
    while len(init) < min(evo.population_size, budget):
        arch = draw_unseen(space, rng, taken)
        if arch is None:
            break
        taken.add(arch.key)
        init.append(arch)
    population = evaluate_batch(init, state, oracle, 0, budget)
    result.record_iteration(0, population)

    for t in range(1, cfg.T + 1):
        if stop is not None and stop():
            result.status = "interrupted"
            break
        if len(state.history) >= budget:
            break
        parents = sorted(population, key=_fitness_order)[: evo.parent_count]
        children, dups, attempts = [], 0, 0
        room = budget - len(state.history)
        while len(children) < min(cfg.N, room) and attempts < CHILD_ATTEMPTS_PER_SLOT * cfg.N:
            attempts += 1
            a = parents[int(rng.integers(len(parents)))]
            b = parents[int(rng.integers(len(parents)))]
            if rng.random() < evo.crossover_rate:
                child = crossover(a.arch, b.arch, rng)
            else:
                child = a.arch
            child = mutate(child, space, rng, evo.mutation_rate)
            if child.key in taken:
                dups += 1
                continue
            taken.add(child.key)
            children.append(child)
        counters = {"duplicate_children": dups}
        evals = evaluate_batch(children, state, oracle, t, budget, counters)
        for e in evals:
            population.append(e)
            if len(population) > evo.population_size:
                # worst accuracy leaves; among ties the most recent one
                worst = min(population, key=lambda x: (x.val_accuracy, -x.order))
                population.remove(worst)
        state.t = t
        result.record_iteration(t, evals, counters)
        if not children:
            result.status = "stalled"
            result.notes.append(
                f"iteration {t}: no unseen child in {attempts} attempts; population converged"
            )
            break
    return result
