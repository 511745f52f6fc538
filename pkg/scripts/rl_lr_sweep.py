"""How fast the per-slot REINFORCE controller concentrates on a dominant op.

Table: val = 80 when slot 0 is GAT, else 70. Reports, per learning rate, how many
seeds push p(GAT) above 0.9 within T iterations of N samples.

    python scripts/rl_lr_sweep.py --lrs 0.00035,0.003,0.01,0.03
"""

import argparse

import numpy as np

from gnas.oracle import table_from_values
from gnas.search_space import default_registry, enumerate_architectures
from gnas.strategies import RLConfig, StrategyConfig, run_rl


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--lrs", default="0.00035,0.003,0.01,0.03")
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--iterations", type=int, default=200)
    ap.add_argument("--batch-size", type=int, default=10)
    args = ap.parse_args()

    space = default_registry().space("space-1")
    table = table_from_values("dominant", {a.key: 70.0 + 10.0 * (a.ops[0] == "GAT") for a in enumerate_architectures(space)})
    gat = space.op_names.index("GAT")
    for lr in map(float, args.lrs.split(",")):
        peaks = []
        for seed in range(args.seeds):
            cfg = StrategyConfig("rl", T=args.iterations, N=args.batch_size, seed=seed, rl=RLConfig(learning_rate=lr))
            res = run_rl(space, table, cfg)
            peaks.append(max(p[0, gat] for p in res.extras["prob_trace"]))
        hits = sum(p > 0.9 for p in peaks)
        print(f"lr={lr:<8g} seeds over 0.9: {hits:2d}/{args.seeds}  mean peak p(GAT) {np.mean(peaks):.3f}")


if __name__ == "__main__":
    main()
