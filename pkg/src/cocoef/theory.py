"""Closed-form constants of the convergence analysis, plus estimators.

For a run with straggler probability ``p``, contraction constant ``delta``,
aggregate discrepancy ``qa``, redundancy deficit ``vartheta``, smoothness
``L`` and heterogeneity radius ``beta``, the accumulated error-feedback
energy obeys

    sum_t ||sum_i e_i^{t+1}||^2
        <= (T+1)*gamma^2*xi1 + gamma^2*xi2 * sum_t ||grad F(theta^t)||^2,

valid when delta < 0.5 and qa < (2*delta + 1)/2, and the running average of
the squared gradient norm under the constant rate gamma = phi/sqrt(T+1) is
bounded by

    eps1*phi/(sqrt(T+1) - eps0*phi) + (F0 - F*)/(phi*sqrt(T+1) - eps0*phi^2)

for T > (eps0*phi)^2 - 1.  This module computes xi1, xi2, eps0, eps1 and
the bound itself, the conditional second-moment bound for the masked sum of
encoded gradients, and empirical estimators for the smoothness and
heterogeneity of a linear-regression task.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .tasks import LinearRegressionTask

__all__ = [
    "TheoryInputs",
    "BoundConstants",
    "xi1",
    "xi2",
    "epsilons",
    "bound_constants",
    "convergence_bound",
    "grad_sum_moment_bound",
    "estimate_smoothness",
    "estimate_heterogeneity",
]


@dataclass(frozen=True)
class TheoryInputs:
    """Every scalar the convergence constants depend on.

    ``lr_scale`` is the phi in the horizon-tied learning rate
    gamma = phi/sqrt(T+1).
    """

    p: float
    delta: float
    qa: float
    num_devices: int
    num_subsets: int
    vartheta: float
    smoothness: float
    heterogeneity: float
    initial_loss: float
    min_loss: float
    lr_scale: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p < 1.0:
            raise ConfigurationError(f"p must be in [0, 1), got {self.p}")
        if not 0.0 <= self.delta < 1.0:
            raise ConfigurationError(f"delta must be in [0, 1), got {self.delta}")
        if self.qa < 0.0 or self.vartheta < 0.0:
            raise ConfigurationError("qa and vartheta must be non-negative")
        if self.smoothness < 0.0 or self.heterogeneity < 0.0:
            raise ConfigurationError("smoothness and heterogeneity must be non-negative")
        if self.num_devices < 1 or self.num_subsets < 1:
            raise ConfigurationError("device and subset counts must be >= 1")
        if self.initial_loss < self.min_loss:
            raise ConfigurationError("initial_loss must be >= min_loss")
        if self.lr_scale <= 0.0:
            raise ConfigurationError(f"lr_scale must be positive, got {self.lr_scale}")


@dataclass(frozen=True)
class BoundConstants:
    """xi1/xi2 bound the accumulated error energy (per-iteration floor and
    gradient-energy gain); eps0 offsets the bound's denominator and eps1 is
    the numerator of its straggler-noise term."""

    xi1: float
    xi2: float
    eps0: float
    eps1: float


def _require_error_bound_conditions(inputs: TheoryInputs) -> None:
    limit = (2.0 * inputs.delta + 1.0) / 2.0
    if inputs.delta >= 0.5 or inputs.qa >= limit:
        raise ConfigurationError(
            "error-energy bound needs delta < 0.5 and qa < (2*delta+1)/2; "
            f"got delta={inputs.delta}, qa={inputs.qa}, qa limit={limit}"
        )


def _geometric_factors(inputs: TheoryInputs) -> tuple[float, float]:
    """Contraction factors of the summed-error and per-device recursions."""
    p, delta = inputs.p, inputs.delta
    summed = (1.0 - p) * (2.0 * delta + 1.0) / 2.0 + p
    per_device = 2.0 * (1.0 - p) * delta + p
    return summed, per_device


def xi1(inputs: TheoryInputs) -> float:
    """Per-iteration floor of the accumulated error-feedback energy.

    Zero whenever p, delta, vartheta, or the heterogeneity radius is zero.
    """
    _require_error_bound_conditions(inputs)
    p, delta = inputs.p, inputs.delta
    beta_sq = inputs.heterogeneity**2
    theta = inputs.vartheta
    summed, per_device = _geometric_factors(inputs)
    direct = 8.0 * beta_sq * p * delta * theta / (1.0 - p)
    tail_num = (4.0 * delta + 2.0) * 4.0 * delta * p * beta_sq * theta
    tail = 0.0
    if tail_num != 0.0:
        tail = tail_num / per_device / (1.0 - per_device)
    return (direct + tail) / (1.0 - summed)


def xi2(inputs: TheoryInputs) -> float:
    """Gain of the accumulated error energy in the gradient energy."""
    _require_error_bound_conditions(inputs)
    p, delta, qa = inputs.p, inputs.delta, inputs.qa
    summed, per_device = _geometric_factors(inputs)
    coupling = 1.0 / inputs.num_devices + 2.0 * inputs.vartheta / inputs.num_subsets**2
    direct = 4.0 * p * delta / (1.0 - p) * coupling
    discrepancy = (
        qa * (2.0 * delta + 1.0) / ((1.0 - p) * (2.0 * delta + 1.0 - 2.0 * qa))
    )
    tail_num = (4.0 * delta + 2.0) * 2.0 * delta * p
    tail = 0.0
    if tail_num != 0.0:
        tail = summed * (tail_num / per_device) * coupling / (summed - per_device)
    return (direct + discrepancy + tail) / (1.0 - summed)


def epsilons(inputs: TheoryInputs, xi1_value: float, xi2_value: float) -> tuple[float, float]:
    """Denominator offset eps0 and noise numerator eps1 of the rate bound.

    eps0 comes from the free parameter rho0 of the descent recursion: the
    optimizer rho0 = sqrt(L^2*xi1*(1-p)/(2*p*beta^2*vartheta)) is used when
    well defined, otherwise rho0 = L (any positive value yields a valid,
    merely looser, bound).
    """
    p = inputs.p
    ell = inputs.smoothness
    beta_sq = inputs.heterogeneity**2
    theta = inputs.vartheta
    coeff = (
        p / ((1.0 - p) * inputs.num_devices)
        + 1.0
        + 2.0 * p * theta / ((1.0 - p) * inputs.num_subsets**2)
    )
    noise_scale = p * beta_sq * theta / (1.0 - p)
    eps1 = math.sqrt(2.0 * ell**2 * xi1_value * noise_scale) + ell * noise_scale

    rad_num = ell**2 * xi1_value * (1.0 - p)
    rad_den = 2.0 * p * beta_sq * theta
    if rad_num > 0.0 and rad_den > 0.0:
        rho0 = math.sqrt(rad_num / rad_den)
    else:
        rho0 = ell if ell > 0.0 else 1.0
    eps0 = 0.5 * (ell + rho0) * coeff + ell**2 * xi2_value / (2.0 * rho0)
    return eps0, eps1


def bound_constants(inputs: TheoryInputs) -> BoundConstants:
    """Convenience wrapper computing all four constants at once."""
    x1 = xi1(inputs)
    x2 = xi2(inputs)
    e0, e1 = epsilons(inputs, x1, x2)
    return BoundConstants(x1, x2, e0, e1)


def convergence_bound(
    horizon: int, inputs: TheoryInputs, constants: BoundConstants
) -> float:
    """Bound on the running average of ||grad F||^2 after ``horizon`` iterations."""
    phi = inputs.lr_scale
    if horizon <= (constants.eps0 * phi) ** 2 - 1.0:
        raise ConfigurationError(
            f"horizon {horizon} too short for the convergence bound; "
            f"need T > (eps0*phi)^2 - 1 = {(constants.eps0 * phi) ** 2 - 1.0:.6g}"
        )
    root = math.sqrt(horizon + 1.0)
    gap = inputs.initial_loss - inputs.min_loss
    return constants.eps1 * phi / (root - constants.eps0 * phi) + gap / (
        phi * root - constants.eps0 * phi**2
    )


def grad_sum_moment_bound(inputs: TheoryInputs, grad_norm_sq: float) -> float:
    """Conditional second-moment bound for the straggler-masked encoded sum.

    Bounds E[||sum_i I_i g_i||^2] at a fixed model point whose full gradient
    has squared norm ``grad_norm_sq``.
    """
    p = inputs.p
    theta = inputs.vartheta
    floor = 2.0 * p * inputs.heterogeneity**2 * theta / (1.0 - p)
    coeff = (
        p / ((1.0 - p) * inputs.num_devices)
        + 1.0
        + 2.0 * p * theta / ((1.0 - p) * inputs.num_subsets**2)
    )
    return floor + coeff * grad_norm_sq


def estimate_smoothness(
    task: LinearRegressionTask, tol: float = 1e-8, max_iters: int = 10_000
) -> float:
    """Largest eigenvalue of sum_k z_k z_k^T by power iteration.

    Convergence is declared when the Rayleigh quotient moves by at most
    ``tol`` relatively between sweeps.
    """
    gram = task.features.T @ task.features
    v = np.full(task.dim, 1.0 / math.sqrt(task.dim))
    rayleigh = float(v @ gram @ v)
    for _ in range(max_iters):
        w = gram @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            # v is in the null space; restart from the dominant diagonal
            # direction, or conclude the matrix is zero (it is PSD).
            diag = np.diagonal(gram)
            if diag.max() == 0.0:
                return 0.0
            v = np.zeros(task.dim)
            v[int(np.argmax(diag))] = 1.0
            continue
        v = w / norm
        updated = float(v @ gram @ v)
        if abs(updated - rayleigh) <= tol * max(1.0, abs(updated)):
            return updated
        rayleigh = updated
    raise RuntimeError(
        f"power iteration did not converge within {max_iters} sweeps; "
        f"last Rayleigh quotient {rayleigh!r}"
    )


def estimate_heterogeneity(
    task: LinearRegressionTask, thetas: Sequence[np.ndarray]
) -> float:
    """Max over probe points and subsets of ||grad f_k - grad F / M||.

    A lower bound for the heterogeneity radius along the probed trajectory
    (no global bound exists for linear regression over all of R^D).
    """
    if len(thetas) == 0:
        raise ConfigurationError("need at least one probe point")
    worst = 0.0
    for theta in thetas:
        grads = (task.features @ theta - task.labels)[:, None] * task.features
        centered = grads - grads.sum(axis=0) / task.num_subsets
        worst = max(worst, math.sqrt(float((centered**2).sum(axis=1).max())))
    return worst
