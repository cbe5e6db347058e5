"""Multi-trial seeded execution of the training loop, metrics, CSV output.

Each trial draws its own task, allocation, and initial model from keyed
substreams of the root seed, then runs the configured method for T
iterations.  Per iteration the recorded row holds the pre-update loss and
squared gradient norm at theta^t together with that step's non-straggler
count, measured aggregate discrepancy (error-feedback methods only), and
the relative residual of the virtual-iterate recursion
x^{t+1} = x^t - gamma * sum_i I_i g_i (the central runtime correctness
check; NaN where a quantity does not apply).  Identical configs produce
bit-identical metrics and byte-identical CSV files.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import streams
from .allocation import AllocationMatrix, uniform_random_allocation, vartheta
from .compression import delta_of, is_stochastic
from .config import LR_CONSTANT, ExperimentConfig
from .errors import InvariantViolation
from .protocol import (
    COCO,
    COCOEF,
    UNBIASED,
    UNBIASED_DIFF,
    DeviceState,
    device_step_cocoef,
    device_step_unbiased,
    device_step_unbiased_diff,
    reference_gain,
    sample_stragglers,
    server_aggregate,
    server_update,
)
from .tasks import LinearRegressionTask, generate_synthetic, loss, subset_gradient
from .theory import (
    TheoryInputs,
    bound_constants,
    convergence_bound,
    estimate_heterogeneity,
    estimate_smoothness,
)

ENCODING_TOL = 1e-9
VIRTUAL_TOL = 1e-9
_TINY = 1e-30


@dataclass
class TrialTrace:
    """Everything recorded from one trial."""

    loss: np.ndarray  # (T,)
    grad_norm_sq: np.ndarray  # (T,)
    nonstragglers: np.ndarray  # (T,) int
    qa: np.ndarray  # (T,), NaN where not applicable
    residual: np.ndarray  # (T,), NaN where not applicable
    error_sum_sq: np.ndarray  # (T,), ||sum_i e_i^{t+1}||^2 (zero without EF)
    theta_final: np.ndarray
    task: LinearRegressionTask
    alloc: AllocationMatrix
    theta0: np.ndarray
    thetas: list[np.ndarray] | None = None  # theta^0 .. theta^T if recorded


@dataclass
class RunMetrics:
    """Stacked per-(trial, iteration) measurements of one experiment."""

    config: ExperimentConfig
    loss: np.ndarray  # (trials, T)
    grad_norm_sq: np.ndarray
    nonstragglers: np.ndarray
    qa: np.ndarray
    residual: np.ndarray
    bound: np.ndarray | None = None  # (T,) theory curve when emit_theory ran

    def loss_mean(self) -> np.ndarray:
        return self.loss.mean(axis=0)

    def loss_std(self) -> np.ndarray:
        return self.loss.std(axis=0)

    def final_loss_mean(self) -> float:
        return float(self.loss[:, -1].mean())


def trial_components(
    config: ExperimentConfig, trial: int
) -> tuple[LinearRegressionTask, AllocationMatrix, np.ndarray]:
    """The task, allocation, and initial model of one trial.

    Derived from (seed, stream, trial) only, so they are shared by every
    method run under the same seed and unaffected by the trial count.
    """
    task = generate_synthetic(
        config.num_subsets,
        config.dim,
        streams.substream(config.seed, streams.TASK, trial),
    )
    alloc = uniform_random_allocation(
        config.num_devices,
        config.num_subsets,
        list(config.replication),
        streams.substream(config.seed, streams.ALLOCATION, trial),
    )
    theta0 = streams.substream(config.seed, streams.THETA0, trial).standard_normal(
        config.dim
    )
    return task, alloc, theta0


def run_trial(
    config: ExperimentConfig, trial: int, record_iterates: bool = False
) -> TrialTrace:
    """Simulate one trial of the configured method."""
    task, alloc, theta = trial_components(config, trial)
    num_devices = config.num_devices
    num_subsets = config.num_subsets
    dim = config.dim
    horizon = config.iterations
    p = config.straggler_prob
    method = config.method
    spec = method.compressor
    kind = method.kind
    needs_rng = is_stochastic(spec)
    track_ef = kind == COCOEF
    track_qa = kind in (COCOEF, COCO)
    debug = config.debug_invariants

    # per-subset encoding coefficients 1/(d_k*(1-p))
    coef = 1.0 / (alloc.replication * (1.0 - p))
    device_subsets = [alloc.subsets_of(i) for i in range(num_devices)]
    states = [
        DeviceState(tuple(int(k) for k in device_subsets[i]), np.zeros(dim))
        for i in range(num_devices)
    ]
    if kind == UNBIASED_DIFF:
        refs_device = np.zeros((num_devices, dim))
        refs_server = np.zeros((num_devices, dim))
        ref_gain = reference_gain(spec)

    loss_row = np.empty(horizon)
    grad_row = np.empty(horizon)
    count_row = np.empty(horizon, dtype=np.int64)
    qa_row = np.full(horizon, np.nan)
    residual_row = np.full(horizon, np.nan)
    error_row = np.zeros(horizon)
    theta0 = theta.copy()
    iterates: list[np.ndarray] | None = [theta.copy()] if record_iterates else None

    for t in range(horizon):
        gamma_t = config.gamma(t)

        gradmat = np.empty((num_subsets, dim))
        for k in range(num_subsets):
            gradmat[k] = subset_gradient(task, k, theta)
        grad = np.zeros(dim)
        for k in range(num_subsets):
            grad += gradmat[k]
        loss_t = loss(task, theta)
        if not math.isfinite(loss_t):
            raise InvariantViolation(
                f"non-finite loss at trial {trial} iteration {t}"
            )
        scaled = coef[:, None] * gradmat

        draw = sample_stragglers(
            num_devices, p, streams.substream(config.seed, streams.STRAGGLER, trial, t)
        )
        responding = draw.responding

        if debug:
            _check_encoding_identity(
                scaled, device_subsets, p, grad, dim, trial, t
            )

        if track_ef:
            x_prev = theta - _error_total(states)

        messages: list[np.ndarray] = []
        encoded_sum = np.zeros(dim)
        shifted_sum = np.zeros(dim)
        resid_sum = np.zeros(dim)
        for i in responding:
            g_i = np.zeros(dim)
            for k in device_subsets[i]:
                g_i += scaled[k]
            encoded_sum += g_i
            rng_i = (
                streams.substream(config.seed, streams.COMPRESSOR, trial, t, int(i))
                if needs_rng
                else None
            )
            if kind in (COCOEF, COCO):
                state = states[i]
                message, new_error = device_step_cocoef(
                    g_i, state, gamma_t, spec, rng_i
                )
                shifted_sum += message
                shifted_sum += new_error
                resid_sum += new_error
                if track_ef:
                    state.error = new_error
            elif kind == UNBIASED:
                message = device_step_unbiased(g_i, spec, rng_i)
            elif kind == UNBIASED_DIFF:
                message, refs_device[i] = device_step_unbiased_diff(
                    g_i, refs_device[i], spec, rng_i
                )
                reconstructed = refs_server[i] + message
                refs_server[i] = refs_server[i] + ref_gain * message
                if debug and not np.array_equal(refs_device[i], refs_server[i]):
                    raise InvariantViolation(
                        f"reference desync at trial {trial} iteration {t} device {i}"
                    )
                message = reconstructed
            else:  # uncompressed
                message = g_i
            messages.append(message)

        aggregate = server_aggregate(messages, dim=dim)
        theta_next = server_update(theta, aggregate, method, gamma_t)

        loss_row[t] = loss_t
        grad_row[t] = float(np.dot(grad, grad))
        count_row[t] = responding.size
        if track_qa and responding.size:
            denom = float(np.dot(shifted_sum, shifted_sum))
            if denom > 0.0:
                qa_row[t] = float(np.dot(resid_sum, resid_sum)) / denom
        if track_ef:
            error_total = _error_total(states)
            error_row[t] = float(np.dot(error_total, error_total))
            x_next = theta_next - error_total
            rhs = x_prev - gamma_t * encoded_sum
            scale = max(
                float(np.linalg.norm(x_next)),
                float(np.linalg.norm(x_prev)),
                gamma_t * float(np.linalg.norm(encoded_sum)),
                _TINY,
            )
            residual_row[t] = float(np.linalg.norm(x_next - rhs)) / scale
            if debug and residual_row[t] > VIRTUAL_TOL:
                raise InvariantViolation(
                    f"virtual-iterate recursion violated at trial {trial} "
                    f"iteration {t}: relative residual {residual_row[t]:.3e}"
                )

        theta = theta_next
        if iterates is not None:
            iterates.append(theta.copy())

    return TrialTrace(
        loss=loss_row,
        grad_norm_sq=grad_row,
        nonstragglers=count_row,
        qa=qa_row,
        residual=residual_row,
        error_sum_sq=error_row,
        theta_final=theta,
        task=task,
        alloc=alloc,
        theta0=theta0,
        thetas=iterates,
    )


def _error_total(states: list[DeviceState]) -> np.ndarray:
    total = np.zeros_like(states[0].error)
    for state in states:
        total += state.error
    return total


def _check_encoding_identity(
    scaled: np.ndarray,
    device_subsets: list[np.ndarray],
    p: float,
    grad: np.ndarray,
    dim: int,
    trial: int,
    t: int,
) -> None:
    """(1-p) * sum over all devices of g_i must reconstruct the full gradient."""
    total = np.zeros(dim)
    for subsets in device_subsets:
        g_i = np.zeros(dim)
        for k in subsets:
            g_i += scaled[k]
        total += g_i
    scale = max(float(np.linalg.norm(grad)), _TINY)
    rel = float(np.linalg.norm((1.0 - p) * total - grad)) / scale
    if rel > ENCODING_TOL:
        raise InvariantViolation(
            f"encoding identity violated at trial {trial} iteration {t}: "
            f"relative residual {rel:.3e}"
        )


def run_experiment(config: ExperimentConfig) -> RunMetrics:
    """Run all trials of a config and stack their traces.

    Deterministic: an identical config yields bit-identical metrics.
    """
    record = config.emit_theory
    traces = [
        run_trial(config, trial, record_iterates=(record and trial == 0))
        for trial in range(config.trials)
    ]
    metrics = RunMetrics(
        config=config,
        loss=np.stack([tr.loss for tr in traces]),
        grad_norm_sq=np.stack([tr.grad_norm_sq for tr in traces]),
        nonstragglers=np.stack([tr.nonstragglers for tr in traces]),
        qa=np.stack([tr.qa for tr in traces]),
        residual=np.stack([tr.residual for tr in traces]),
    )
    if config.emit_theory:
        metrics.bound = _theory_curve(config, traces[0], metrics)
    return metrics


def _theory_curve(
    config: ExperimentConfig, trace: TrialTrace, metrics: RunMetrics
) -> np.ndarray | None:
    """Bound on the running average of ||grad F||^2, one value per iteration.

    Uses trial 0's task and allocation, the trajectory heterogeneity
    estimate with a 2x safety factor, and the maximum discrepancy measured
    across all trials.  Returns None (with a warning) when the method or
    measured constants fall outside the bound's validity region.
    """
    if config.method.kind != COCOEF:
        warnings.warn("theory bound is defined for the cocoef method only")
        return None
    if config.lr_schedule != LR_CONSTANT:
        warnings.warn("theory bound assumes the constant learning-rate schedule")
        return None
    delta = delta_of(config.method.compressor)
    qa_measured = (
        float(np.nanmax(metrics.qa)) if np.isfinite(metrics.qa).any() else 0.0
    )
    if delta >= 0.5 or qa_measured >= (2.0 * delta + 1.0) / 2.0:
        warnings.warn(
            f"bound conditions unmet: delta={delta:.3g}, measured qa={qa_measured:.3g}"
        )
        return None
    probes = trace.thetas[:: max(1, len(trace.thetas) // 32)] if trace.thetas else []
    heterogeneity = 2.0 * estimate_heterogeneity(trace.task, probes or [trace.theta0])
    theta_ls, *_ = np.linalg.lstsq(trace.task.features, trace.task.labels, rcond=None)
    min_loss = loss(trace.task, theta_ls)
    smoothness = estimate_smoothness(trace.task)
    horizon = config.iterations
    curve = np.full(horizon, np.nan)
    for t in range(horizon):
        inputs = TheoryInputs(
            p=config.straggler_prob,
            delta=delta,
            qa=qa_measured,
            num_devices=config.num_devices,
            num_subsets=config.num_subsets,
            vartheta=vartheta(trace.alloc),
            smoothness=smoothness,
            heterogeneity=heterogeneity,
            initial_loss=loss(trace.task, trace.theta0),
            min_loss=min_loss,
            lr_scale=config.gamma0 * math.sqrt(t + 1.0),
        )
        constants = bound_constants(inputs)
        if t > (constants.eps0 * inputs.lr_scale) ** 2 - 1.0:
            curve[t] = convergence_bound(t, inputs, constants)
    if np.isnan(curve).all():
        warnings.warn("bound horizon condition never satisfied; curve is empty")
        return None
    return curve


def _fmt(value: float) -> str:
    return repr(float(value))


def emit_csv(metrics: RunMetrics, path: str | Path) -> None:
    """Write per-(trial, iteration) rows plus a companion .summary file.

    Floats use shortest round-trip decimals, so parsing the file recovers
    the exact values.
    """
    path = Path(path)
    trials, horizon = metrics.loss.shape if metrics.loss.size else (0, 0)
    lines = ["trial,iter,loss,grad_norm_sq,nonstragglers,qa,residual"]
    for j in range(trials):
        for t in range(horizon):
            lines.append(
                f"{j},{t},{_fmt(metrics.loss[j, t])},{_fmt(metrics.grad_norm_sq[j, t])},"
                f"{int(metrics.nonstragglers[j, t])},{_fmt(metrics.qa[j, t])},"
                f"{_fmt(metrics.residual[j, t])}"
            )
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"failed to write metrics to {path}: {exc}") from exc

    header = "iter,loss_mean,loss_std,grad_norm_sq_mean,grad_norm_sq_std"
    with_bound = metrics.bound is not None
    if with_bound:
        header += ",bound"
    summary = [header]
    for t in range(horizon):
        row = (
            f"{t},{_fmt(metrics.loss[:, t].mean())},{_fmt(metrics.loss[:, t].std())},"
            f"{_fmt(metrics.grad_norm_sq[:, t].mean())},{_fmt(metrics.grad_norm_sq[:, t].std())}"
        )
        if with_bound:
            row += f",{_fmt(metrics.bound[t])}"
        summary.append(row)
    summary_path = path.with_name(path.name + ".summary")
    summary_path.write_text("\n".join(summary) + "\n")


def parse_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Read an emitted metrics CSV back into column arrays."""
    lines = Path(path).read_text().splitlines()
    names = lines[0].split(",")
    columns: dict[str, list[float]] = {name: [] for name in names}
    for line in lines[1:]:
        for name, token in zip(names, line.split(",")):
            columns[name].append(float(token))
    return {name: np.asarray(vals) for name, vals in columns.items()}
