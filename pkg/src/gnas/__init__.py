"""LLM-guided graph neural architecture search over tabular benchmarks."""

from .harness import emit_report, run_ablation, run_experiment, spec_from_config, verify_report
from .oracle import (
    BenchmarkRecord,
    BenchmarkTable,
    load_benchmark,
    op_baseline,
    query,
    rank,
    synth_benchmark,
    top_k,
)
from .strategies import StrategyConfig, run_strategy
from .search_space import (
    Architecture,
    MacroTopology,
    OperationKind,
    Registry,
    SearchSpace,
    decode,
    default_registry,
    encode,
    enumerate_architectures,
    load_topologies,
)

__version__ = "0.1.0"
