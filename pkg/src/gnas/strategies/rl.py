"""REINFORCE controller with one independent softmax policy per op slot."""

from __future__ import annotations

import numpy as np

from ..oracle import BenchmarkTable
from ..search_space import NUM_SLOTS, SearchSpace, draw_unseen
from .base import CountingOracle, RLConfig, SearchResult, SearchState, StopCheck, StrategyConfig, evaluate_batch


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_prob(logits: np.ndarray, choice: np.ndarray) -> float:
    """log pi(choice) summed over slots; ``logits`` is (slots, ops)."""
    z = logits - logits.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(z).sum(axis=-1))
    return float(sum(z[s, c] - logz[s] for s, c in enumerate(choice)))


def log_prob_grad(logits: np.ndarray, choice: np.ndarray) -> np.ndarray:
    """d log pi(choice) / d logits = one_hot(choice) - softmax(logits), per slot."""
    g = -softmax(logits)
    g[np.arange(len(choice)), choice] += 1.0
    return g


def entropy_grad(logits: np.ndarray) -> np.ndarray:
    p = softmax(logits)
    logp = np.log(p)
    h = -(p * logp).sum(axis=-1, keepdims=True)
    return -p * (logp + h)


class Adam:
    """Adam ascent on a single parameter array."""

    def __init__(self, shape, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return params + self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class SlotPolicy:
    """Per-slot categorical policy trained by REINFORCE with an EMA baseline.

    The baseline starts at the first observed reward, so a constant reward
    stream yields zero advantage from the first update on.
    """

    def __init__(self, num_ops: int, cfg: RLConfig, slots: int = NUM_SLOTS):
        self.cfg = cfg
        self.logits = np.zeros((slots, num_ops))
        self.opt = Adam(self.logits.shape, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
        self.baseline: float | None = None
        self.updates = 0

    def probs(self) -> np.ndarray:
        return softmax(self.logits)

    def gradient(self, choice: np.ndarray, reward: float) -> np.ndarray:
        baseline = reward if self.baseline is None else self.baseline
        g = (reward - baseline) * log_prob_grad(self.logits, choice)
        if self.cfg.entropy_weight:
            g = g + self.cfg.entropy_weight * entropy_grad(self.logits)
        return g

    def update(self, choice: np.ndarray, reward: float) -> None:
        g = self.gradient(choice, reward)
        self.logits = self.opt.step(self.logits, g)
        if self.baseline is None:
            self.baseline = reward
        else:
            d = self.cfg.baseline_decay
            self.baseline = d * self.baseline + (1 - d) * reward
        self.updates += 1


def run_rl(
    space: SearchSpace, table: BenchmarkTable, cfg: StrategyConfig, stop: StopCheck | None = None
) -> SearchResult:
    state = SearchState()
    result = SearchResult("rl", cfg.seed, state)
    oracle = CountingOracle(table)
    rng = np.random.default_rng(cfg.seed)
    names = space.op_names
    index = {n: i for i, n in enumerate(names)}
    policy = SlotPolicy(len(names), cfg.rl)
    taken: set[str] = set()
    budget = cfg.budget
    trace = []
    for t in range(1, cfg.T + 1):
        if stop is not None and stop():
            result.status = "interrupted"
            break
        probs = policy.probs()
        batch, exhausted = [], False
        while len(batch) < cfg.N and len(taken) < budget:
            arch = draw_unseen(space, rng, taken, slot_probs=list(probs))
            if arch is None:
                exhausted = True
                break
            taken.add(arch.key)
            batch.append(arch)
        counters: dict = {}
        evals = evaluate_batch(batch, state, oracle, t, budget, counters)
        for e in evals:
            choice = np.array([index[o] for o in e.arch.ops])
            policy.update(choice, e.val_accuracy / 100.0)
        state.t = t
        result.record_iteration(t, evals, counters)
        trace.append(policy.probs())
        if exhausted:
            result.status = "exhausted"
            break
    result.extras = {"policy": policy, "prob_trace": trace}
    return result
