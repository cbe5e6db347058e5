"""Run every figure preset and write one CSV per method under results/.

Usage:
    python scripts/reproduce_figures.py [--outdir results] [--only fig2,fig5]

Each CSV holds per-(trial, iteration) measurements; the companion .summary
file carries the across-trial mean and standard deviation per iteration,
which is what the figures plot.
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from cocoef.presets import PRESET_NAMES, preset_configs  # noqa: E402
from cocoef.runner import emit_csv, run_experiment  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--outdir", default="results")
    parser.add_argument("--only", help="comma-separated preset names")
    parser.add_argument("--trials", type=int, default=5)
    args = parser.parse_args()

    names = args.only.split(",") if args.only else list(PRESET_NAMES)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for name in names:
        for label, config in preset_configs(name, trials=args.trials).items():
            start = time.perf_counter()
            metrics = run_experiment(config)
            path = outdir / f"{name}_{label}.csv"
            emit_csv(metrics, path)
            print(
                f"{name} {label:22s} final mean loss {metrics.final_loss_mean():10.4g}"
                f"   ({time.perf_counter() - start:5.1f}s) -> {path}"
            )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
