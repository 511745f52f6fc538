"""LLM-driven search loop: prompt, sample, evaluate, feed back."""

from __future__ import annotations

import numpy as np

from ..llm_client import Backend, LLMClient, LLMConfig, LLMError
from ..oracle import BenchmarkTable
from ..prompting import (
    EmptyBatch,
    PromptOptions,
    build_feedback_prompt,
    build_gnas_prompt,
    parse_architectures,
)
from ..search_space import SearchSpace, draw_unseen
from .base import CountingOracle, SearchResult, SearchState, StopCheck, StrategyConfig, evaluate_batch

TOPUP_STREAM = 0x70


def _request_batch(client, prompt, space, n, state, rng):
    """Ask for a batch; retry once on an empty parse, then top up at random."""
    counters: dict = {"retries": 0}
    for attempt in range(2):
        text = client.complete(prompt)
        try:
            archs, diag = parse_architectures(text, space, n, state.evaluated_keys)
        except EmptyBatch as exc:
            counters.update({f"parse_{k}": v for k, v in exc.diagnostics.counters().items()})
            if attempt == 0:
                counters["retries"] = 1
            continue
        counters.update({f"parse_{k}": v for k, v in diag.counters().items()})
        return archs, counters, 0
    taken = set(state.evaluated_keys)
    archs = []
    while len(archs) < n:
        arch = draw_unseen(space, rng, taken)
        if arch is None:
            break
        taken.add(arch.key)
        archs.append(arch)
    return archs, counters, len(archs)


def run_gpt4gnas(
    space: SearchSpace,
    table: BenchmarkTable,
    cfg: StrategyConfig,
    backend: Backend,
    llm_cfg: LLMConfig | None = None,
    prompt_opts: PromptOptions | None = None,
    dataset: str | None = None,
    stop: StopCheck | None = None,
) -> SearchResult:
    """Run T rounds: the first batch comes from the search prompt, later ones from
    feedback prompts. Every batch, including the last, is evaluated."""
    if prompt_opts is None:
        prompt_opts = PromptOptions(explore_iterations=cfg.explore_iterations)
    dataset = dataset or table.dataset
    state = SearchState()
    result = SearchResult("gpt4gnas", cfg.seed, state)
    client = LLMClient(backend, llm_cfg)
    result.transcripts = client.transcripts
    oracle = CountingOracle(table)
    rng = np.random.default_rng([cfg.seed, TOPUP_STREAM])
    budget = cfg.budget

    for t in range(1, cfg.T + 1):
        if stop is not None and stop():
            result.status = "interrupted"
            break
        if t == 1 or not state.history:
            prompt = build_gnas_prompt(dataset, space, cfg.N, prompt_opts)
        else:
            prompt = build_feedback_prompt(state, dataset, space, cfg.N, prompt_opts)
            result.feedback_prompts += 1
        try:
            archs, counters, topped = _request_batch(client, prompt, space, cfg.N, state, rng)
        except (LLMError, OSError) as exc:
            result.status = "aborted"
            result.error = f"{type(exc).__name__}: {exc}"
            break
        finally:
            result.completions = len(client.transcripts)
        evals = evaluate_batch(archs, state, oracle, t, budget, counters)
        state.t = t
        result.record_iteration(t, evals, counters, topped)
        if topped:
            result.notes.append(f"iteration {t}: topped up {topped} random architectures")

    assert oracle.calls == len(state.history)
    return result
