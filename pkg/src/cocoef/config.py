"""Experiment configuration and the flat key=value config-file format.

A config file holds one ``key = value`` pair per line (``#`` comments and
blank lines allowed).  Recognized keys:

    N, M, D          device / subset counts and model dimension
    d                replication per subset (int, or comma list of M ints)
    p                straggler probability in [0, 1)
    method           cocoef | coco | unbiased | unbiased_diff | uncompressed
    compressor       grouped_sign | top_k | stochastic_sign |
                     amplified_rand_k | identity   (default: identity)
    k                kept coordinates for top_k / amplified_rand_k
    group_size       consecutive-group size for grouped_sign
    groups           explicit grouped_sign groups, 1-based: "1,2;3,4"
    T                iterations per trial
    gamma0           base learning rate
    lr_schedule      constant | inv_sqrt      (default: constant)
    trials           independent trials       (default: 1)
    seed             64-bit root seed         (default: 0)
    emit_theory      true/false               (default: false)
    debug_invariants true/false               (default: false)

Unknown or duplicate keys are rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

from .compression import (
    AMPLIFIED_RAND_K,
    GROUPED_SIGN,
    IDENTITY,
    STOCHASTIC_SIGN,
    TOP_K,
    CompressorSpec,
    amplified_rand_k_spec,
    grouped_sign_spec,
    identity_spec,
    stochastic_sign_spec,
    top_k_spec,
)
from .errors import ConfigurationError
from .protocol import MethodSpec

LR_CONSTANT = "constant"
LR_INV_SQRT = "inv_sqrt"
LR_SCHEDULES = (LR_CONSTANT, LR_INV_SQRT)


@dataclass(frozen=True)
class ExperimentConfig:
    num_devices: int
    num_subsets: int
    dim: int
    replication: tuple[int, ...]  # one entry per subset
    straggler_prob: float
    method: MethodSpec
    iterations: int
    gamma0: float
    lr_schedule: str = LR_CONSTANT
    trials: int = 1
    seed: int = 0
    emit_theory: bool = False
    debug_invariants: bool = False

    def __post_init__(self) -> None:
        if min(self.num_devices, self.num_subsets, self.dim) < 1:
            raise ConfigurationError("N, M, and D must all be >= 1")
        if self.iterations < 1 or self.trials < 1:
            raise ConfigurationError("T and trials must be >= 1")
        if len(self.replication) != self.num_subsets:
            raise ConfigurationError(
                f"need one replication count per subset, got {len(self.replication)}"
            )
        if any(not 1 <= d <= self.num_devices for d in self.replication):
            raise ConfigurationError(
                f"replication must lie in [1, {self.num_devices}]"
            )
        if not 0.0 <= self.straggler_prob < 1.0:
            raise ConfigurationError(
                f"p must be in [0, 1), got {self.straggler_prob}"
            )
        if self.gamma0 <= 0.0:
            raise ConfigurationError(f"gamma0 must be positive, got {self.gamma0}")
        if self.lr_schedule not in LR_SCHEDULES:
            raise ConfigurationError(f"unknown lr_schedule {self.lr_schedule!r}")
        if self.method.compressor.dim != self.dim:
            raise ConfigurationError(
                f"compressor dim {self.method.compressor.dim} != model dim {self.dim}"
            )

    def gamma(self, t: int) -> float:
        """Learning rate at iteration t (0-based)."""
        if self.lr_schedule == LR_CONSTANT:
            return self.gamma0
        return self.gamma0 / math.sqrt(t + 1.0)

    def with_updates(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


def make_config(
    num_devices: int,
    num_subsets: int,
    dim: int,
    replication: int | tuple[int, ...],
    straggler_prob: float,
    method_kind: str,
    compressor_kind: str = IDENTITY,
    *,
    k: int | None = None,
    group_size: int | None = None,
    groups: tuple[tuple[int, ...], ...] | None = None,
    iterations: int = 1000,
    gamma0: float = 1e-5,
    lr_schedule: str = LR_CONSTANT,
    trials: int = 1,
    seed: int = 0,
    emit_theory: bool = False,
    debug_invariants: bool = False,
) -> ExperimentConfig:
    """Build a validated config without going through a file."""
    if isinstance(replication, int):
        replication = (replication,) * num_subsets
    spec = _build_compressor(compressor_kind, dim, k, group_size, groups)
    return ExperimentConfig(
        num_devices=num_devices,
        num_subsets=num_subsets,
        dim=dim,
        replication=tuple(int(d) for d in replication),
        straggler_prob=straggler_prob,
        method=MethodSpec(method_kind, spec),
        iterations=iterations,
        gamma0=gamma0,
        lr_schedule=lr_schedule,
        trials=trials,
        seed=seed,
        emit_theory=emit_theory,
        debug_invariants=debug_invariants,
    )


def _build_compressor(
    kind: str,
    dim: int,
    k: int | None,
    group_size: int | None,
    groups: tuple[tuple[int, ...], ...] | None,
) -> CompressorSpec:
    if kind == IDENTITY:
        _reject_params(kind, k=k, group_size=group_size, groups=groups)
        return identity_spec(dim)
    if kind == STOCHASTIC_SIGN:
        _reject_params(kind, k=k, group_size=group_size, groups=groups)
        return stochastic_sign_spec(dim)
    if kind == GROUPED_SIGN:
        _reject_params(kind, k=k)
        if group_size is None and groups is None:
            group_size = dim  # plain sign-bit quantization
        return grouped_sign_spec(dim, group_size=group_size, groups=groups)
    if kind == TOP_K:
        _reject_params(kind, group_size=group_size, groups=groups)
        if k is None:
            raise ConfigurationError("top_k needs k")
        return top_k_spec(dim, k)
    if kind == AMPLIFIED_RAND_K:
        _reject_params(kind, group_size=group_size, groups=groups)
        if k is None:
            raise ConfigurationError("amplified_rand_k needs k")
        return amplified_rand_k_spec(dim, k)
    raise ConfigurationError(f"unknown compressor kind {kind!r}")


def _reject_params(kind: str, **params) -> None:
    for name, value in params.items():
        if value is not None:
            raise ConfigurationError(f"compressor {kind!r} takes no {name} parameter")


_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}

_KNOWN_KEYS = {
    "N", "M", "D", "d", "p", "method", "compressor", "k", "group_size",
    "groups", "T", "gamma0", "lr_schedule", "trials", "seed",
    "emit_theory", "debug_invariants",
}

_REQUIRED_KEYS = ("N", "M", "D", "d", "p", "method", "T", "gamma0")


def parse_config_text(text: str) -> ExperimentConfig:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigurationError(f"line {lineno}: unknown config key {key!r}")
        if key in pairs:
            raise ConfigurationError(f"line {lineno}: duplicate config key {key!r}")
        pairs[key] = value

    missing = [key for key in _REQUIRED_KEYS if key not in pairs]
    if missing:
        raise ConfigurationError(f"missing required config keys: {', '.join(missing)}")

    try:
        num_subsets = int(pairs["M"])
        replication: int | tuple[int, ...]
        if "," in pairs["d"]:
            replication = tuple(int(tok) for tok in pairs["d"].split(","))
        else:
            replication = int(pairs["d"])
        groups = None
        if "groups" in pairs:
            groups = tuple(
                tuple(int(tok) - 1 for tok in chunk.split(","))
                for chunk in pairs["groups"].split(";")
            )
        return make_config(
            num_devices=int(pairs["N"]),
            num_subsets=num_subsets,
            dim=int(pairs["D"]),
            replication=replication,
            straggler_prob=float(pairs["p"]),
            method_kind=pairs["method"],
            compressor_kind=pairs.get("compressor", IDENTITY),
            k=int(pairs["k"]) if "k" in pairs else None,
            group_size=int(pairs["group_size"]) if "group_size" in pairs else None,
            groups=groups,
            iterations=int(pairs["T"]),
            gamma0=float(pairs["gamma0"]),
            lr_schedule=pairs.get("lr_schedule", LR_CONSTANT),
            trials=int(pairs.get("trials", "1")),
            seed=int(pairs.get("seed", "0")),
            emit_theory=_parse_bool(pairs.get("emit_theory", "false")),
            debug_invariants=_parse_bool(pairs.get("debug_invariants", "false")),
        )
    except ConfigurationError:
        raise
    except ValueError as exc:
        raise ConfigurationError(f"bad config value: {exc}") from exc


def _parse_bool(token: str) -> bool:
    try:
        return _BOOL_WORDS[token.lower()]
    except KeyError:
        raise ConfigurationError(f"expected a boolean, got {token!r}") from None


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text())
