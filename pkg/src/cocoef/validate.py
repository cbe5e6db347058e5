"""Self-contained invariant battery behind the ``validate`` CLI command.

Runs a reduced-scale version of the correctness checks (compression
contraction and unbiasedness, encoding identity, error-feedback
conservation, the virtual-iterate recursion, unbiased aggregation, and the
unit behavior of the theory formulas) in a few seconds.  The full-scale
acceptance suite lives in the test directory.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import compression, protocol, theory
from .allocation import uniform_random_allocation
from .config import make_config
from .protocol import DeviceState
from .runner import run_experiment, run_trial
from .streams import substream
from .tasks import full_gradient, generate_synthetic, subset_gradient

Check = tuple[str, Callable[[], None]]


def _check_contraction() -> None:
    rng = substream(1001, 0)
    dim = 64
    specs = [
        compression.grouped_sign_spec(dim, group_size=1),
        compression.grouped_sign_spec(dim, group_size=4),
        compression.sign_spec(dim),
        compression.top_k_spec(dim, 1),
        compression.top_k_spec(dim, dim // 2),
        compression.top_k_spec(dim, dim),
    ]
    for spec in specs:
        delta = compression.delta_of(spec)
        for _ in range(200):
            x = rng.standard_normal(dim) * 10.0 ** rng.integers(-3, 4)
            err = x - compression.compress(spec, x)
            lhs = float(np.dot(err, err))
            rhs = delta * float(np.dot(x, x))
            if lhs > rhs * (1.0 + 1e-12):
                raise AssertionError(f"contraction violated for {spec.kind}: {lhs} > {rhs}")


def _check_unbiasedness() -> None:
    rng = substream(1002, 0)
    dim = 16
    draws = 20_000
    x = rng.standard_normal(dim) * 3.0
    for spec in (
        compression.stochastic_sign_spec(dim),
        compression.amplified_rand_k_spec(dim, 4),
    ):
        samples = np.empty((draws, dim))
        for j in range(draws):
            samples[j] = compression.compress(spec, x, rng)
        gap = np.abs(samples.mean(axis=0) - x)
        stderr = samples.std(axis=0) / math.sqrt(draws)
        # deterministic coordinates have ~zero stderr; allow mean rounding
        passed = gap <= 5.0 * stderr + 1e-9 * max(1.0, float(np.abs(x).max()))
        if passed.mean() < 0.99:
            raise AssertionError(f"{spec.kind} looks biased: {passed.mean():.2%} within 5 SE")


def _check_encoding_identity() -> None:
    rng = substream(1003, 0)
    for _ in range(20):
        n = int(rng.integers(2, 20))
        m = int(rng.integers(1, 25))
        dim = int(rng.integers(1, 12))
        d = int(rng.integers(1, n + 1))
        p = float(rng.uniform(0.0, 0.9))
        task = generate_synthetic(m, dim, rng)
        alloc = uniform_random_allocation(n, m, d, rng)
        theta = rng.standard_normal(dim)
        total = np.zeros(dim)
        for i in range(n):
            grads = {int(k): subset_gradient(task, int(k), theta) for k in alloc.subsets_of(i)}
            total += protocol.encode_local(grads, alloc.replication, p, dim=dim)
        grad = full_gradient(task, theta)
        rel = np.linalg.norm((1.0 - p) * total - grad) / max(np.linalg.norm(grad), 1e-30)
        if rel > 1e-9:
            raise AssertionError(f"encoding identity off by {rel:.2e}")


def _check_error_feedback_conservation() -> None:
    rng = substream(1004, 0)
    dim = 32
    spec = compression.sign_spec(dim)
    for _ in range(200):
        g = rng.standard_normal(dim) * 10.0 ** rng.integers(-2, 3)
        e = rng.standard_normal(dim)
        state = DeviceState((), e.copy())
        gamma = float(10.0 ** rng.uniform(-6, 0))
        message, new_error = protocol.device_step_cocoef(g, state, gamma, spec)
        shifted = gamma * g + e
        rel = np.linalg.norm(message + new_error - shifted) / max(
            np.linalg.norm(shifted), 1e-30
        )
        if rel > 1e-12:
            raise AssertionError(f"conservation off by {rel:.2e}")


def _check_virtual_recursion() -> None:
    cfg = make_config(
        num_devices=12, num_subsets=15, dim=10, replication=3, straggler_prob=0.3,
        method_kind="cocoef", compressor_kind="grouped_sign",
        iterations=200, gamma0=1e-4, trials=2, seed=77, debug_invariants=True,
    )
    metrics = run_experiment(cfg)
    worst = float(np.nanmax(metrics.residual))
    if worst > 1e-9:
        raise AssertionError(f"virtual-iterate residual {worst:.2e}")


def _check_unbiased_aggregate() -> None:
    cfg = make_config(
        num_devices=8, num_subsets=10, dim=6, replication=3, straggler_prob=0.4,
        method_kind="unbiased", compressor_kind="stochastic_sign",
        iterations=1, gamma0=1e-4, seed=5,
    )
    trace = run_trial(cfg, 0)
    task, alloc, theta = trace.task, trace.alloc, trace.theta0
    rng = substream(1005, 0)
    draws = 10_000
    encoded = np.stack([
        protocol.encode_local(
            {int(k): subset_gradient(task, int(k), theta) for k in alloc.subsets_of(i)},
            alloc.replication, cfg.straggler_prob, dim=cfg.dim,
        )
        for i in range(cfg.num_devices)
    ])
    spec = cfg.method.compressor
    totals = np.empty((draws, cfg.dim))
    for j in range(draws):
        mask = rng.random(cfg.num_devices) >= cfg.straggler_prob
        total = np.zeros(cfg.dim)
        for i in np.flatnonzero(mask):
            total += compression.compress(spec, encoded[i], rng)
        totals[j] = total
    grad = full_gradient(task, theta)
    gap = np.abs(totals.mean(axis=0) - grad)
    stderr = totals.std(axis=0) / math.sqrt(draws)
    if not (gap <= 5.0 * stderr + 1e-12).all():
        raise AssertionError("unbiased aggregate deviates from the full gradient")


def _check_theory_units() -> None:
    base = dict(
        qa=0.1, num_devices=50, num_subsets=50, vartheta=2.0, smoothness=1.0,
        heterogeneity=1.0, initial_loss=1.0, min_loss=0.0, lr_scale=1.0,
    )
    if theory.xi1(theory.TheoryInputs(p=0.0, delta=0.3, **base)) != 0.0:
        raise AssertionError("xi1 should vanish at p = 0")
    if theory.xi1(theory.TheoryInputs(p=0.4, delta=0.0, **base)) != 0.0:
        raise AssertionError("xi1 should vanish at delta = 0")
    flat = theory.TheoryInputs(p=0.4, delta=0.3, **{**base, "vartheta": 0.0})
    _, eps1 = theory.epsilons(flat, theory.xi1(flat), theory.xi2(flat))
    if eps1 != 0.0:
        raise AssertionError("eps1 should vanish at vartheta = 0")
    inputs = theory.TheoryInputs(p=0.2, delta=0.3, **base)
    constants = theory.bound_constants(inputs)
    b1 = theory.convergence_bound(100, inputs, constants)
    b2 = theory.convergence_bound(400, inputs, constants)
    if not b2 < b1:
        raise AssertionError("convergence bound must decrease with the horizon")


def _check_all_straggler_iterations() -> None:
    cfg = make_config(
        num_devices=2, num_subsets=4, dim=3, replication=1, straggler_prob=0.9,
        method_kind="cocoef", compressor_kind="grouped_sign",
        iterations=60, gamma0=1e-4, seed=11,
    )
    trace = run_trial(cfg, 0)
    if not np.isfinite(trace.loss).all():
        raise AssertionError("loss must stay finite under heavy straggling")
    idle = np.flatnonzero(trace.nonstragglers == 0)
    idle = idle[idle < cfg.iterations - 1]
    if idle.size == 0:
        raise AssertionError("expected at least one all-straggler iteration")
    if not np.array_equal(trace.loss[idle + 1], trace.loss[idle]):
        raise AssertionError("all-straggler iterations must leave the model unchanged")


CHECKS: tuple[Check, ...] = (
    ("compression contraction", _check_contraction),
    ("compressor unbiasedness", _check_unbiasedness),
    ("encoding identity", _check_encoding_identity),
    ("error-feedback conservation", _check_error_feedback_conservation),
    ("virtual-iterate recursion", _check_virtual_recursion),
    ("unbiased aggregation", _check_unbiased_aggregate),
    ("theory formula units", _check_theory_units),
    ("all-straggler iterations", _check_all_straggler_iterations),
)


def run_invariant_suite(verbose: bool = True) -> bool:
    """Run every check; print one PASS/FAIL line each; True if all pass."""
    all_ok = True
    for name, check in CHECKS:
        try:
            check()
        except Exception as exc:  # noqa: BLE001 - report any failure mode
            all_ok = False
            if verbose:
                print(f"FAIL {name}: {exc}")
        else:
            if verbose:
                print(f"PASS {name}")
    return all_ok
