"""Compression functions for gradient messages.

Covers the two biased compressors used by the error-feedback protocol
(grouped sign-bit quantization and top-k sparsification), the two unbiased
compressors used by the baselines (stochastic sign-bit quantization and
amplified rand-k sparsification), and the identity no-op.  Also provides
the contraction constant ``delta`` of each deterministic compressor and an
empirical estimator for the aggregate discrepancy ratio ``q_A``.

Conventions:
  * sign(0) = 0, so the zero vector is a fixed point of every compressor.
  * top-k ties are broken toward the lowest index.
  * all arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

GROUPED_SIGN = "grouped_sign"
TOP_K = "top_k"
STOCHASTIC_SIGN = "stochastic_sign"
AMPLIFIED_RAND_K = "amplified_rand_k"
IDENTITY = "identity"

KINDS = (GROUPED_SIGN, TOP_K, STOCHASTIC_SIGN, AMPLIFIED_RAND_K, IDENTITY)
BIASED_KINDS = (GROUPED_SIGN, TOP_K)
STOCHASTIC_KINDS = (STOCHASTIC_SIGN, AMPLIFIED_RAND_K)


@dataclass(frozen=True)
class CompressorSpec:
    """Description of one compression function on vectors of length ``dim``.

    ``groups`` (grouped_sign only) is a tuple of index tuples that must
    partition ``range(dim)``.  ``k`` (top_k / amplified_rand_k only) is the
    number of coordinates kept.
    """

    kind: str
    dim: int
    k: int | None = None
    groups: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown compressor kind {self.kind!r}")
        if self.dim < 1:
            raise ConfigurationError(f"dim must be >= 1, got {self.dim}")
        if self.kind == GROUPED_SIGN:
            if self.k is not None:
                raise ConfigurationError("grouped_sign takes no k parameter")
            self._check_groups()
            index = tuple(np.asarray(g, dtype=np.intp) for g in self.groups)
            object.__setattr__(self, "_group_index", index)
        elif self.kind in (TOP_K, AMPLIFIED_RAND_K):
            if self.groups is not None:
                raise ConfigurationError(f"{self.kind} takes no groups parameter")
            if self.k is None or not 1 <= self.k <= self.dim:
                raise ConfigurationError(
                    f"{self.kind} needs 1 <= k <= dim, got k={self.k}, dim={self.dim}"
                )
        else:
            if self.k is not None or self.groups is not None:
                raise ConfigurationError(f"{self.kind} takes no parameters")

    def _check_groups(self) -> None:
        if not self.groups:
            raise ConfigurationError("grouped_sign needs at least one group")
        seen: set[int] = set()
        total = 0
        for group in self.groups:
            if len(group) == 0:
                raise ConfigurationError("grouped_sign groups must be non-empty")
            seen.update(group)
            total += len(group)
        if total != self.dim or seen != set(range(self.dim)):
            raise ConfigurationError(
                f"grouped_sign groups must partition range({self.dim})"
            )


def grouped_sign_spec(
    dim: int,
    group_size: int | None = None,
    groups: tuple[tuple[int, ...], ...] | None = None,
) -> CompressorSpec:
    """Grouped sign-bit quantizer; consecutive groups of ``group_size`` by default."""
    if (group_size is None) == (groups is None):
        raise ConfigurationError("give exactly one of group_size or groups")
    if groups is None:
        if group_size < 1:
            raise ConfigurationError(f"group_size must be >= 1, got {group_size}")
        groups = tuple(
            tuple(range(lo, min(lo + group_size, dim)))
            for lo in range(0, dim, group_size)
        )
    return CompressorSpec(GROUPED_SIGN, dim, groups=tuple(tuple(g) for g in groups))


def sign_spec(dim: int) -> CompressorSpec:
    """Plain sign-bit quantizer: grouped_sign with a single group."""
    return grouped_sign_spec(dim, group_size=dim)


def top_k_spec(dim: int, k: int) -> CompressorSpec:
    return CompressorSpec(TOP_K, dim, k=k)


def stochastic_sign_spec(dim: int) -> CompressorSpec:
    return CompressorSpec(STOCHASTIC_SIGN, dim)


def amplified_rand_k_spec(dim: int, k: int) -> CompressorSpec:
    return CompressorSpec(AMPLIFIED_RAND_K, dim, k=k)


def identity_spec(dim: int) -> CompressorSpec:
    return CompressorSpec(IDENTITY, dim)


def is_biased(spec: CompressorSpec) -> bool:
    return spec.kind in BIASED_KINDS


def is_stochastic(spec: CompressorSpec) -> bool:
    return spec.kind in STOCHASTIC_KINDS


def compress(
    spec: CompressorSpec, x: np.ndarray, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Apply the compressor to ``x`` and return a vector of the same length.

    ``rng`` is consumed only by the stochastic kinds.  Deterministic kinds
    give bit-identical output for identical input; stochastic kinds are
    bit-reproducible given an identically seeded generator.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.dim,):
        raise ConfigurationError(
            f"input of shape {x.shape} does not match compressor dim {spec.dim}"
        )
    if not np.isfinite(x).all():
        raise ConfigurationError("compressor input has non-finite entries")

    if spec.kind == IDENTITY:
        return x.copy()

    if spec.kind == GROUPED_SIGN:
        out = np.zeros_like(x)
        for idx in group_index_arrays(spec):
            seg = x[idx]
            out[idx] = np.sign(seg) * (np.abs(seg).sum() / idx.size)
        return out

    if spec.kind == TOP_K:
        if spec.k == spec.dim:
            return x.copy()
        # stable sort on -|x| keeps the lowest index first among ties
        keep = np.argsort(-np.abs(x), kind="stable")[: spec.k]
        out = np.zeros_like(x)
        out[keep] = x[keep]
        return out

    if rng is None:
        raise ConfigurationError(f"{spec.kind} requires a random stream")

    if spec.kind == STOCHASTIC_SIGN:
        scale = float(np.abs(x).max())
        if scale == 0.0:
            return np.zeros_like(x)
        prob_plus = 0.5 * (1.0 + x / scale)
        signs = np.where(rng.random(spec.dim) < prob_plus, 1.0, -1.0)
        return scale * signs

    # amplified rand-k: keep k uniformly chosen coordinates, scaled by dim/k
    keep = rng.choice(spec.dim, size=spec.k, replace=False)
    out = np.zeros_like(x)
    out[keep] = x[keep] * (spec.dim / spec.k)
    return out


def group_index_arrays(spec: CompressorSpec) -> tuple[np.ndarray, ...]:
    """Index arrays of a grouped_sign spec (precomputed at construction)."""
    return spec._group_index  # type: ignore[attr-defined]


def variance_factor(spec: CompressorSpec) -> float:
    """Worst-case omega with E||C(x) - x||^2 <= omega * ||x||^2 (unbiased kinds).

    Exact for amplified rand-k (dim/k - 1); for stochastic sign-bit the
    worst case dim - 1 is attained by one-sparse inputs.  Reference-tracking
    schemes stay stable when they damp updates by 1/(1 + omega).
    """
    if spec.kind == AMPLIFIED_RAND_K:
        return spec.dim / spec.k - 1.0
    if spec.kind == STOCHASTIC_SIGN:
        return spec.dim - 1.0
    if spec.kind == IDENTITY:
        return 0.0
    raise ConfigurationError(
        f"variance factor undefined for biased compressor {spec.kind!r}"
    )


def delta_of(spec: CompressorSpec) -> float:
    """Contraction constant delta with ||C(x)-x||^2 <= delta*||x||^2 for all x.

    Defined for the deterministic kinds only: grouped_sign gives
    ``1 - 1/max_group_size``, top_k gives ``1 - k/dim``, identity gives 0.
    """
    if spec.kind == GROUPED_SIGN:
        return 1.0 - 1.0 / max(len(g) for g in spec.groups)
    if spec.kind == TOP_K:
        return 1.0 - spec.k / spec.dim
    if spec.kind == IDENTITY:
        return 0.0
    raise ConfigurationError(
        f"delta undefined for unbiased compressor {spec.kind!r}"
    )


def measure_qa(
    xs: list[np.ndarray],
    spec: CompressorSpec,
    trials: int = 1,
    rng: np.random.Generator | None = None,
) -> float:
    """Empirical aggregate discrepancy ||sum(x - C(x))||^2 / ||sum(x)||^2.

    Averaged over ``trials`` independent compressions; deterministic kinds
    need trials=1.
    """
    if trials < 1:
        raise ConfigurationError(f"trials must be >= 1, got {trials}")
    vectors = [np.asarray(x, dtype=np.float64) for x in xs]
    for x in vectors:
        if x.shape != (spec.dim,):
            raise ConfigurationError(
                f"input of shape {x.shape} does not match compressor dim {spec.dim}"
            )
    total = np.zeros(spec.dim)
    for x in vectors:
        total += x
    denom = float(np.dot(total, total))
    if denom == 0.0:
        raise ConfigurationError("aggregate discrepancy undefined for zero aggregate")
    acc = 0.0
    for _ in range(trials):
        resid = np.zeros(spec.dim)
        for x in vectors:
            resid += x - compress(spec, x, rng)
        acc += float(np.dot(resid, resid)) / denom
    return acc / trials
