import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gnas.llm_client import ScriptedBackend, make_mock_greedy, make_mock_random
from gnas.oracle import table_from_values
from gnas.prompting import format_response
from gnas.search_space import Architecture, enumerate_architectures
from gnas.strategies import (
    EvoConfig,
    RLConfig,
    StrategyConfig,
    run_evolutionary,
    run_gpt4gnas,
    run_random,
    run_rl,
    run_strategy,
)
from gnas.strategies.rl import Adam, SlotPolicy, entropy_grad, log_prob, log_prob_grad, softmax

from .conftest import PLANTED_TOP


def trajectory(result):
    return [e.arch.key for e in result.state.history]


def check_invariants(result, cfg):
    keys = trajectory(result)
    assert len(keys) == len(set(keys)) == len(result.state.evaluated_keys)
    assert len(keys) <= cfg.budget
    best = max(result.state.history, key=lambda e: e.val_accuracy)
    assert result.state.best.val_accuracy == best.val_accuracy
    prev = -1.0
    for it in result.iterations:
        assert it.best_so_far_acc >= prev
        prev = it.best_so_far_acc


# -- gpt loop --------------------------------------------------------------


def test_gpt_greedy_finds_top(space, fixture_table):
    cfg = StrategyConfig("gpt4gnas", T=15, N=10)
    res = run_gpt4gnas(space, fixture_table, cfg, make_mock_greedy(fixture_table, "space-1"))
    assert res.state.best.arch.key == PLANTED_TOP
    assert res.state.best.iteration == 1
    assert len(res.state.history) == 150 and res.feedback_prompts == 14
    assert res.completions == 15
    check_invariants(res, cfg)


def test_random_mock_matches_random_search(space, fixture_table):
    cfg = StrategyConfig("gpt4gnas", T=5, N=10, seed=4)
    gpt = run_gpt4gnas(space, fixture_table, cfg, make_mock_random(space, 4))
    rnd = run_random(space, fixture_table, StrategyConfig("random", T=5, N=10, seed=4))
    assert trajectory(gpt) == trajectory(rnd)


def test_scripted_duplicates_dropped_and_counted(space, fixture_table):
    archs = [fixture_table.rank_index[i] for i in (5, 6, 7)]
    a = [Architecture("space-1", tuple(k.split("|")[1].split(","))) for k in archs]
    script = [
        format_response([a[0], a[1], a[0]]),  # in-batch duplicate
        format_response([a[1], a[2]]),  # a[1] already evaluated
    ]
    cfg = StrategyConfig("gpt4gnas", T=2, N=3)
    res = run_gpt4gnas(space, fixture_table, cfg, ScriptedBackend(script))
    assert trajectory(res) == [a[0].key, a[1].key, a[2].key]
    d1, d2 = res.iterations[0].diagnostics, res.iterations[1].diagnostics
    assert d1["parse_dropped_duplicates"] == 1
    assert d2["parse_dropped_already_evaluated"] == 1
    assert res.iterations[1].topped_up == 0  # partial batch is not padded


def test_empty_parse_retry_then_topup(space, fixture_table):
    cfg = StrategyConfig("gpt4gnas", T=1, N=4)
    res = run_gpt4gnas(space, fixture_table, cfg, ScriptedBackend(["no idea", "still nothing"]))
    assert res.completions == 2
    assert res.iterations[0].topped_up == 4 and len(res.state.history) == 4
    assert res.iterations[0].diagnostics["retries"] == 1
    assert res.notes


def test_empty_parse_recovers_on_retry(space, fixture_table):
    good = format_response(list(enumerate_architectures(space))[:2])
    res = run_gpt4gnas(space, fixture_table, StrategyConfig("gpt4gnas", T=1, N=2), ScriptedBackend(["?", good]))
    assert res.iterations[0].topped_up == 0 and len(res.state.history) == 2


def test_script_exhaustion_aborts(space, fixture_table):
    good = format_response(list(enumerate_architectures(space))[:2])
    res = run_gpt4gnas(space, fixture_table, StrategyConfig("gpt4gnas", T=3, N=2), ScriptedBackend([good]))
    assert res.status == "aborted" and "ScriptExhausted" in res.error
    assert len(res.state.history) == 2  # completed work is kept


def test_not_found_is_dropped_not_queried(space):
    table = table_from_values("d", {"space-1|GCN,GCN,GCN,GCN": 70.0, "space-1|GAT,GCN,GCN,GCN": 71.0})
    script = [format_response([Architecture("space-1", ("GCN",) * 4), Architecture("space-1", ("GIN",) * 4)])]
    res = run_gpt4gnas(space, table, StrategyConfig("gpt4gnas", T=1, N=2), ScriptedBackend(script))
    assert trajectory(res) == ["space-1|GCN,GCN,GCN,GCN"]
    assert res.iterations[0].diagnostics["not_found"] == 1


def test_stop_interrupts(space, fixture_table):
    calls = []
    stop = lambda: (calls.append(1), len(calls) > 2)[1]
    res = run_gpt4gnas(space, fixture_table, StrategyConfig("gpt4gnas", T=15, N=10),
                       make_mock_greedy(fixture_table), stop=stop)
    assert res.status == "interrupted" and len(res.iterations) == 2


# -- random ----------------------------------------------------------------


@given(st.integers(0, 1000), st.integers(1, 6), st.integers(1, 12))
@settings(max_examples=25, deadline=None)
def test_random_invariants(space, fixture_table, seed, T, N):
    cfg = StrategyConfig("random", T=T, N=N, seed=seed)
    res = run_random(space, fixture_table, cfg)
    assert len(res.state.history) == T * N
    check_invariants(res, cfg)


def test_random_exhausts_small_space(toy_space, toy_table):
    res = run_random(toy_space, toy_table, StrategyConfig("random", T=20, N=10))
    assert res.status == "exhausted" and len(res.state.history) == 81
    assert res.state.best.arch.key == toy_table.rank_index[0]


def test_max_queries_cap(space, fixture_table):
    cfg = StrategyConfig("random", T=15, N=10, max_queries=37)
    assert len(run_random(space, fixture_table, cfg).state.history) == 37


# -- evolutionary ----------------------------------------------------------


@given(st.integers(0, 1000), st.integers(1, 30), st.data())
@settings(max_examples=20, deadline=None)
def test_evolutionary_invariants(space, fixture_table, seed, pop, data):
    parents = data.draw(st.integers(1, pop))
    cfg = StrategyConfig("evolutionary", T=5, N=6, seed=seed, evo=EvoConfig(pop, parents, 0.15, 0.8))
    res = run_evolutionary(space, fixture_table, cfg)
    assert len(res.state.history) <= 5 * 6 + pop
    check_invariants(res, cfg)


def test_hill_climbing_degenerate(space, fixture_table):
    cfg = StrategyConfig("evolutionary", T=10, N=3, evo=EvoConfig(1, 1, 0.3, 0.8))
    res = run_evolutionary(space, fixture_table, cfg)
    check_invariants(res, cfg)


def test_evolutionary_stalls_on_tiny_space(registry):
    sp = registry.space("space-1", ["GCN"])
    table = table_from_values("d", {"space-1|GCN,GCN,GCN,GCN": 50.0})
    res = run_evolutionary(sp, table, StrategyConfig("evolutionary", T=3, N=2, evo=EvoConfig(4, 2)))
    assert res.status == "stalled" and len(res.state.history) == 1


def test_evolutionary_finds_planted_often(space, fixture_table):
    hits = 0
    for seed in range(5):
        cfg = StrategyConfig("evolutionary", T=15, N=10, seed=seed, max_queries=150)
        hits += run_evolutionary(space, fixture_table, cfg).state.best.arch.key == PLANTED_TOP
    assert hits >= 2


# -- rl --------------------------------------------------------------------


def numeric_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2 * h)
    return g


@given(st.integers(0, 10_000), st.integers(2, 9))
@settings(max_examples=40, deadline=None)
def test_log_prob_grad_finite_difference(seed, k):
    rng = np.random.default_rng(seed)
    logits = rng.normal(size=(4, k))
    choice = rng.integers(0, k, size=4)
    analytic = log_prob_grad(logits, choice)
    numeric = numeric_grad(lambda x: log_prob(x, choice), logits)
    np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8)


@given(st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_entropy_grad_finite_difference(seed):
    rng = np.random.default_rng(seed)
    logits = rng.normal(size=(4, 5))

    def entropy(x):
        p = softmax(x)
        return float(-(p * np.log(p)).sum())

    np.testing.assert_allclose(entropy_grad(logits), numeric_grad(entropy, logits), rtol=1e-5, atol=1e-8)


def test_softmax_rows_sum_to_one():
    p = softmax(np.array([[1000.0, 0.0], [1.0, 1.0]]))
    np.testing.assert_allclose(p.sum(axis=1), 1.0)
    assert np.isfinite(p).all()


def test_policy_gradient_uses_baseline():
    pol = SlotPolicy(3, RLConfig(learning_rate=0.1))
    choice = np.array([0, 1, 2, 0])
    assert np.all(pol.gradient(choice, 0.8) == 0)  # warm start: zero advantage
    pol.update(choice, 0.8)
    assert pol.baseline == 0.8
    g = pol.gradient(choice, 0.9)
    np.testing.assert_allclose(g, (0.9 - 0.8) * log_prob_grad(pol.logits, choice))
    pol.update(choice, 0.9)
    assert pol.baseline == pytest.approx(0.9 * 0.8 + 0.1 * 0.9)


def test_adam_first_step_is_lr_sized():
    opt = Adam((2,), lr=0.01)
    out = opt.step(np.zeros(2), np.array([5.0, -0.001]))
    np.testing.assert_allclose(out, [0.01, -0.01], rtol=1e-4)


def test_rl_lr_zero_is_random(space, fixture_table):
    cfg = StrategyConfig("rl", T=8, N=10, seed=5, rl=RLConfig(learning_rate=0.0))
    rl = run_rl(space, fixture_table, cfg)
    rnd = run_random(space, fixture_table, StrategyConfig("random", T=8, N=10, seed=5))
    assert trajectory(rl) == trajectory(rnd)


def test_rl_converges_with_larger_step(space):
    values = {a.key: 70.0 + 10.0 * (a.ops[0] == "GAT") for a in enumerate_architectures(space)}
    table = table_from_values("d", values)
    cfg = StrategyConfig("rl", T=200, N=1, seed=0, rl=RLConfig(learning_rate=0.03))
    res = run_rl(space, table, cfg)
    gat = space.op_names.index("GAT")
    assert max(p[0, gat] for p in res.extras["prob_trace"]) > 0.9


@given(st.integers(0, 500))
@settings(max_examples=10, deadline=None)
def test_rl_invariants(space, fixture_table, seed):
    cfg = StrategyConfig("rl", T=5, N=10, seed=seed, rl=RLConfig(learning_rate=0.05))
    check_invariants(run_rl(space, fixture_table, cfg), cfg)


# -- shared ----------------------------------------------------------------


@pytest.mark.parametrize("kind", ["random", "evolutionary", "rl"])
def test_report_determinism(space, fixture_table, kind):
    cfg = StrategyConfig(kind, T=5, N=10, seed=3)
    a = run_strategy(space, fixture_table, cfg).report_json()
    b = run_strategy(space, fixture_table, cfg).report_json()
    assert a == b
    json.loads(a)


def test_strategy_config_validation():
    with pytest.raises(ValueError):
        StrategyConfig("bayesian")
    with pytest.raises(ValueError):
        StrategyConfig("random", T=0)
    with pytest.raises(ValueError):
        StrategyConfig("evolutionary", evo=EvoConfig(5, 6))
    assert StrategyConfig("evolutionary").budget == 200
    assert StrategyConfig("random", max_queries=150).budget == 150


def test_run_strategy_needs_backend_for_gpt(space, fixture_table):
    with pytest.raises(ValueError):
        run_strategy(space, fixture_table, StrategyConfig("gpt4gnas"))
