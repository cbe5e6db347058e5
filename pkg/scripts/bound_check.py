"""Compare a bound-conforming run against its convergence guarantee.

Runs error feedback with top-k keeping 60% of coordinates (contraction 0.4),
verifies the measured aggregate discrepancy stays inside the bound's
validity region, and prints the running average of the squared gradient
norm next to the closed-form bound at several horizons.

Usage:
    python scripts/bound_check.py [--iterations 10000] [--seed 31]
"""

import argparse
import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from cocoef.allocation import vartheta  # noqa: E402
from cocoef.compression import delta_of  # noqa: E402
from cocoef.config import make_config  # noqa: E402
from cocoef.runner import run_trial  # noqa: E402
from cocoef.tasks import loss  # noqa: E402
from cocoef.theory import (  # noqa: E402
    TheoryInputs,
    bound_constants,
    convergence_bound,
    estimate_heterogeneity,
    estimate_smoothness,
)


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--iterations", type=int, default=10_000)
    parser.add_argument("--seed", type=int, default=31)
    args = parser.parse_args()

    config = make_config(
        num_devices=40, num_subsets=40, dim=20, replication=30,
        straggler_prob=0.2, method_kind="cocoef", compressor_kind="top_k",
        k=12, iterations=args.iterations, gamma0=3e-7, trials=1, seed=args.seed,
    )
    trace = run_trial(config, 0, record_iterates=True)
    delta = delta_of(config.method.compressor)
    qa_max = float(np.nanmax(trace.qa))
    limit = (2.0 * delta + 1.0) / 2.0
    print(f"delta = {delta:.3f}, measured qa max = {qa_max:.4f} (limit {limit})")
    if qa_max >= limit:
        print("measured discrepancy outside the validity region; bound not applicable")
        return 1

    probes = trace.thetas[:: max(1, len(trace.thetas) // 32)]
    beta_hat = 2.0 * estimate_heterogeneity(trace.task, probes)
    theta_ls, *_ = np.linalg.lstsq(trace.task.features, trace.task.labels, rcond=None)
    shared = dict(
        p=config.straggler_prob, delta=delta, qa=qa_max,
        num_devices=config.num_devices, num_subsets=config.num_subsets,
        vartheta=vartheta(trace.alloc), smoothness=estimate_smoothness(trace.task),
        heterogeneity=beta_hat, initial_loss=float(trace.loss[0]),
        min_loss=loss(trace.task, theta_ls),
    )
    print(f"heterogeneity estimate (2x trajectory max) = {beta_hat:.4g}")

    running = np.cumsum(trace.grad_norm_sq) / np.arange(1, config.iterations + 1)
    print(f"{'T':>8} {'empirical avg':>16} {'bound':>16} {'ratio':>8}")
    horizon = 100
    while horizon <= config.iterations:
        inputs = TheoryInputs(
            lr_scale=config.gamma0 * math.sqrt(horizon + 1.0), **shared
        )
        constants = bound_constants(inputs)
        value = convergence_bound(horizon, inputs, constants)
        empirical = running[horizon - 1]
        print(f"{horizon:>8} {empirical:>16.6g} {value:>16.6g} {empirical / value:>8.3f}")
        horizon *= 10
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
