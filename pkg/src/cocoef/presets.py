"""Preset experiment grids for the linear-regression study.

Each preset reruns one comparison at a fixed reference operating point
(N = M = D = 100, single-sample subsets, five trials, shared seed):

    fig2  all six methods at d=5, p=0.2, K=2, per-method tuned rates
    fig3  error feedback with sign quantization across p at d=2
    fig4  error feedback with sign quantization across d at p=0.9
    fig5  error feedback on/off for sign and top-k compression
    fig6  constant versus decaying learning rate at p=0.5, d=2

Iteration budgets are chosen so each run finishes in well under a minute.
"""

from __future__ import annotations

from .config import LR_INV_SQRT, ExperimentConfig, make_config
from .runner import RunMetrics, run_experiment

PRESET_NAMES = ("fig2", "fig3", "fig4", "fig5", "fig6")

DEFAULT_SEED = 20240
DEFAULT_TRIALS = 5

_SCALE = dict(num_devices=100, num_subsets=100, dim=100)


def preset_configs(
    name: str, seed: int = DEFAULT_SEED, trials: int = DEFAULT_TRIALS
) -> dict[str, ExperimentConfig]:
    """The labeled config grid of one preset."""
    base = dict(_SCALE, trials=trials, seed=seed)
    if name == "fig2":
        shared = dict(base, replication=5, straggler_prob=0.2, iterations=1000)
        return {
            "cocoef_sign": make_config(
                method_kind="cocoef", compressor_kind="grouped_sign",
                gamma0=1e-5, **shared,
            ),
            "cocoef_topk": make_config(
                method_kind="cocoef", compressor_kind="top_k", k=2,
                gamma0=1e-5, **shared,
            ),
            "unbiased_sign": make_config(
                method_kind="unbiased", compressor_kind="stochastic_sign",
                gamma0=2e-6, **shared,
            ),
            "unbiased_randk": make_config(
                method_kind="unbiased", compressor_kind="amplified_rand_k", k=2,
                gamma0=1e-5, **shared,
            ),
            "unbiased_diff_sign": make_config(
                method_kind="unbiased_diff", compressor_kind="stochastic_sign",
                gamma0=2e-6, **shared,
            ),
            "unbiased_diff_randk": make_config(
                method_kind="unbiased_diff", compressor_kind="amplified_rand_k", k=2,
                gamma0=6e-6, **shared,
            ),
        }
    if name == "fig3":
        shared = dict(base, replication=2, gamma0=1e-5, iterations=1500)
        return {
            f"p{p}": make_config(
                method_kind="cocoef", compressor_kind="grouped_sign",
                straggler_prob=p, **shared,
            )
            for p in (0.1, 0.5, 0.9)
        }
    if name == "fig4":
        shared = dict(base, straggler_prob=0.9, gamma0=1e-5, iterations=2000)
        return {
            f"d{d}": make_config(
                method_kind="cocoef", compressor_kind="grouped_sign",
                replication=d, **shared,
            )
            for d in (1, 5, 10, 20)
        }
    if name == "fig5":
        shared = dict(base, replication=5, straggler_prob=0.2, gamma0=1e-5,
                      iterations=1000)
        return {
            "cocoef_sign": make_config(
                method_kind="cocoef", compressor_kind="grouped_sign", **shared,
            ),
            "coco_sign": make_config(
                method_kind="coco", compressor_kind="grouped_sign", **shared,
            ),
            "cocoef_topk": make_config(
                method_kind="cocoef", compressor_kind="top_k", k=2, **shared,
            ),
            "coco_topk": make_config(
                method_kind="coco", compressor_kind="top_k", k=2, **shared,
            ),
        }
    if name == "fig6":
        shared = dict(base, replication=2, straggler_prob=0.5, gamma0=2e-5,
                      iterations=2000)
        return {
            "constant": make_config(
                method_kind="cocoef", compressor_kind="grouped_sign", **shared,
            ),
            "inv_sqrt": make_config(
                method_kind="cocoef", compressor_kind="grouped_sign",
                lr_schedule=LR_INV_SQRT, **shared,
            ),
        }
    raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")


def run_figure_preset(
    name: str, seed: int = DEFAULT_SEED, trials: int = DEFAULT_TRIALS
) -> dict[str, RunMetrics]:
    """Run every config of the named preset and return metrics per label."""
    return {
        label: run_experiment(cfg)
        for label, cfg in preset_configs(name, seed=seed, trials=trials).items()
    }
