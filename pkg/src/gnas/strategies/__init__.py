from __future__ import annotations

from .base import (
    STRATEGY_KINDS,
    CountingOracle,
    EvoConfig,
    Evaluation,
    IterationRecord,
    RLConfig,
    SearchResult,
    SearchState,
    StrategyConfig,
)
from .evolutionary import run_evolutionary
from .gpt import run_gpt4gnas
from .random_search import run_random
from .rl import run_rl


def run_strategy(space, table, cfg: StrategyConfig, backend=None, stop=None, **gpt_kwargs) -> SearchResult:
    """Dispatch on ``cfg.strategy_kind``; ``backend`` is only used by gpt4gnas."""
    kind = cfg.strategy_kind
    if kind == "gpt4gnas":
        if backend is None:
            raise ValueError("gpt4gnas needs a completion backend")
        return run_gpt4gnas(space, table, cfg, backend, stop=stop, **gpt_kwargs)
    runner = {"random": run_random, "evolutionary": run_evolutionary, "rl": run_rl}[kind]
    return runner(space, table, cfg, stop=stop)


__all__ = [
    "STRATEGY_KINDS",
    "CountingOracle",
    "EvoConfig",
    "Evaluation",
    "IterationRecord",
    "RLConfig",
    "SearchResult",
    "SearchState",
    "StrategyConfig",
    "run_evolutionary",
    "run_gpt4gnas",
    "run_random",
    "run_rl",
    "run_strategy",
]
