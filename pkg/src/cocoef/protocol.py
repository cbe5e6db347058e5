"""Per-iteration device and server operations of the training protocol.

A non-straggling device encodes the gradients of its local subsets as
``g_i = sum_{k in S_i} grad_k / (d_k * (1 - p))``, so that summing over all
devices recovers the full gradient up to the factor ``1/(1 - p)`` that
cancels the expected straggler loss.  The error-feedback variant then
transmits ``C(gamma*g_i + e_i)`` and keeps the compression residual in
``e_i``; the unbiased baselines transmit ``C(g_i)`` (optionally against a
synchronized reference for gradient-difference compression) and let the
server apply the learning rate.  All functions here are pure: per-device
randomness comes in as an explicit generator, so device steps may run in
any order or in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .compression import (
    BIASED_KINDS,
    IDENTITY,
    STOCHASTIC_KINDS,
    CompressorSpec,
    compress,
    variance_factor,
)
from .errors import ConfigurationError

COCOEF = "cocoef"
COCO = "coco"
UNBIASED = "unbiased"
UNBIASED_DIFF = "unbiased_diff"
UNCOMPRESSED = "uncompressed"

METHOD_KINDS = (COCOEF, COCO, UNBIASED, UNBIASED_DIFF, UNCOMPRESSED)


@dataclass
class DeviceState:
    """Subset indices held by one device plus its persistent error vector."""

    subsets: tuple[int, ...]
    error: np.ndarray


@dataclass(frozen=True)
class StragglerDraw:
    """Per-device response indicators for one iteration (True = responds)."""

    indicators: np.ndarray

    @property
    def responding(self) -> np.ndarray:
        return np.flatnonzero(self.indicators)


@dataclass(frozen=True)
class MethodSpec:
    """A training method paired with a compatible compressor."""

    kind: str
    compressor: CompressorSpec

    def __post_init__(self) -> None:
        if self.kind not in METHOD_KINDS:
            raise ConfigurationError(f"unknown method kind {self.kind!r}")
        ckind = self.compressor.kind
        if self.kind in (COCOEF, COCO) and ckind in STOCHASTIC_KINDS:
            raise ConfigurationError(
                f"{self.kind} needs a biased or identity compressor, got {ckind}"
            )
        if self.kind in (UNBIASED, UNBIASED_DIFF) and ckind in BIASED_KINDS:
            raise ConfigurationError(
                f"{self.kind} needs an unbiased or identity compressor, got {ckind}"
            )
        if self.kind == UNCOMPRESSED and ckind != IDENTITY:
            raise ConfigurationError("uncompressed runs use the identity compressor")


def encode_local(
    subset_grads: Mapping[int, np.ndarray],
    replication: np.ndarray | Sequence[int],
    p: float,
    dim: int | None = None,
) -> np.ndarray:
    """Encode a device's subset gradients: sum_k grad_k / (d_k * (1 - p)).

    Subsets are accumulated in ascending index order.  An empty map yields
    the zero vector (``dim`` must then be given).
    """
    if not 0.0 <= p < 1.0:
        raise ConfigurationError(f"straggler probability must be in [0, 1), got {p}")
    keys = sorted(subset_grads)
    if dim is None:
        if not keys:
            raise ConfigurationError("dim required to encode an empty subset map")
        dim = len(subset_grads[keys[0]])
    total = np.zeros(dim)
    d = np.asarray(replication)
    for k in keys:
        if d[k] < 1:
            raise ConfigurationError(f"replication of subset {k} must be >= 1")
        total += (1.0 / (d[k] * (1.0 - p))) * np.asarray(subset_grads[k])
    return total


def device_step_cocoef(
    g: np.ndarray,
    state: DeviceState,
    gamma: float,
    spec: CompressorSpec,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Error-feedback step: message C(gamma*g + e) and the new residual.

    The returned pair satisfies message + new_error == gamma*g + e exactly
    (up to float rounding); the caller stores new_error back into the state.
    """
    if gamma <= 0.0:
        raise ConfigurationError(f"learning rate must be positive, got {gamma}")
    shifted = gamma * g + state.error
    message = compress(spec, shifted, rng)
    return message, shifted - message


def device_step_unbiased(
    g: np.ndarray, spec: CompressorSpec, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Baseline step: transmit C(g); the server applies the learning rate."""
    if spec.kind in BIASED_KINDS:
        raise ConfigurationError(
            f"unbiased baseline cannot use biased compressor {spec.kind!r}"
        )
    return compress(spec, g, rng)


def reference_gain(spec: CompressorSpec) -> float:
    """Damping 1/(1 + omega) for gradient-difference reference tracking.

    With an undamped update the tracking error grows by the compressor's
    variance factor omega per round and diverges whenever omega > 1; the
    damped update keeps it contracting.  Identity gives gain 1.
    """
    return 1.0 / (1.0 + variance_factor(spec))


def device_step_unbiased_diff(
    g: np.ndarray,
    reference: np.ndarray,
    spec: CompressorSpec,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient-difference step: message C(g - reference), damped reference update.

    Returns the message and reference + reference_gain(spec) * message.  The
    server keeps an identical reference per device (updated only on
    successful transmissions) and reconstructs reference + message.
    """
    if spec.kind in BIASED_KINDS:
        raise ConfigurationError(
            f"gradient-difference baseline cannot use biased compressor {spec.kind!r}"
        )
    message = compress(spec, g - reference, rng)
    return message, reference + reference_gain(spec) * message


def sample_stragglers(
    num_devices: int, p: float, rng: np.random.Generator
) -> StragglerDraw:
    """Independent Bernoulli(1-p) response indicators for one iteration.

    Implemented by thresholding shared uniforms (respond iff u >= p), so
    runs that differ only in p see monotonically coupled straggler sets.
    """
    if not 0.0 <= p <= 1.0:
        raise ConfigurationError(f"straggler probability must be in [0, 1], got {p}")
    return StragglerDraw(rng.random(num_devices) >= p)


def server_aggregate(
    messages: Sequence[np.ndarray], dim: int | None = None
) -> np.ndarray:
    """Elementwise sum of the received messages; empty input gives zeros."""
    if not messages:
        if dim is None:
            raise ConfigurationError("dim required to aggregate an empty message list")
        return np.zeros(dim)
    total = np.array(messages[0], dtype=np.float64)
    for m in messages[1:]:
        total += m
    return total


def server_update(
    theta: np.ndarray, aggregate: np.ndarray, method: MethodSpec, gamma: float
) -> np.ndarray:
    """One model update.

    Error-feedback methods ship gamma inside the messages, so the server
    subtracts the aggregate directly; the other methods scale by gamma here.
    """
    if method.kind in (COCOEF, COCO):
        return theta - aggregate
    return theta - gamma * aggregate


def virtual_iterate(theta: np.ndarray, errors: Sequence[np.ndarray]) -> np.ndarray:
    """Shadow iterate theta - sum_i e_i; follows an exact uncompressed recursion."""
    total = np.zeros_like(np.asarray(theta, dtype=np.float64))
    for e in errors:
        total += e
    return theta - total
