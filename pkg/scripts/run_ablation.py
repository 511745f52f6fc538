"""Prompt ablation sweep (full prompt plus each single-section ablation) with a report.

    python scripts/run_ablation.py --config configs/fixture.toml --out reports/ablation
"""

import argparse
import sys

from gnas.config import load_config
from gnas.harness import emit_report, run_ablation, spec_from_config


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config")
    ap.add_argument("--set", action="append", default=[])
    ap.add_argument("--out", default="reports/ablation")
    args = ap.parse_args()
    cfg = load_config(args.config, ["search.strategies=gpt4gnas", *args.set])
    report = run_ablation(spec_from_config(cfg, kind="ablation"))
    emit_report(report, args.out)
    for s in report.summaries:
        val = "—" if s.absent else f"{s.val_acc:.2f} ({s.val_rank})"
        print(f"{s.dataset:>10} {s.topology:>8} {s.label:>14}  {val}")
    if report.flags.get("mock_invariant"):
        print("note: mock backends ignore prompt text; rows are identical by construction")
    return 1 if report.failed_runs else 0


if __name__ == "__main__":
    sys.exit(main())
