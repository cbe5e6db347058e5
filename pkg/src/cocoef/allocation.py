"""Redundant assignment of training subsets to devices.

The generator is the uniform-random scheme: each subset is placed on
exactly ``d_k`` devices drawn uniformly without replacement, independently
per subset.  Averaged over draws this approximates a pairwise balanced
design, in which any two subsets co-reside on ``d_k1*d_k2/N`` devices;
``pairwise_balance_stats`` quantifies how far a realized matrix deviates
from that target.  ``vartheta`` is the redundancy deficit
``sum_k (1/d_k - 1/N)`` that enters the convergence constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class AllocationMatrix:
    """Binary device-by-subset assignment with per-subset replication counts."""

    assignment: np.ndarray  # (num_devices, num_subsets), entries 0/1
    replication: np.ndarray  # (num_subsets,), column sums of assignment

    def __post_init__(self) -> None:
        s = np.asarray(self.assignment)
        if s.ndim != 2:
            raise ConfigurationError("assignment must be a 2-d matrix")
        if not np.isin(s, (0, 1)).all():
            raise ConfigurationError("assignment entries must be 0 or 1")
        d = np.asarray(self.replication)
        if not np.array_equal(s.sum(axis=0), d):
            raise ConfigurationError("replication counts must equal column sums")
        if (d < 1).any():
            raise ConfigurationError("every subset needs at least one device")
        s = s.astype(np.int8)
        s.setflags(write=False)
        d = d.astype(np.int64)
        d.setflags(write=False)
        object.__setattr__(self, "assignment", s)
        object.__setattr__(self, "replication", d)

    @property
    def num_devices(self) -> int:
        return self.assignment.shape[0]

    @property
    def num_subsets(self) -> int:
        return self.assignment.shape[1]

    def subsets_of(self, device: int) -> np.ndarray:
        """Ascending indices of the subsets held by ``device``."""
        return np.flatnonzero(self.assignment[device])


def allocation_from_matrix(assignment: np.ndarray) -> AllocationMatrix:
    s = np.asarray(assignment)
    return AllocationMatrix(s, s.sum(axis=0))


def uniform_random_allocation(
    num_devices: int,
    num_subsets: int,
    replication: int | list[int] | tuple[int, ...] | np.ndarray,
    rng: np.random.Generator,
) -> AllocationMatrix:
    """Place each subset on exactly d_k devices chosen uniformly without replacement."""
    d = np.broadcast_to(np.asarray(replication, dtype=np.int64), (num_subsets,))
    if (d < 1).any() or (d > num_devices).any():
        raise ConfigurationError(
            f"replication must satisfy 1 <= d <= {num_devices}, got {replication!r}"
        )
    s = np.zeros((num_devices, num_subsets), dtype=np.int8)
    for k in range(num_subsets):
        holders = rng.choice(num_devices, size=int(d[k]), replace=False)
        s[holders, k] = 1
    return AllocationMatrix(s, d.copy())


@dataclass(frozen=True)
class BalanceStats:
    """Realized counts of an allocation versus the pairwise balanced targets."""

    subset_counts: np.ndarray  # (M,), devices per subset
    overlap: np.ndarray  # (M, M), devices holding both subsets
    max_deviation: float  # max over k1 != k2 of |overlap - d_k1*d_k2/N|


def pairwise_balance_stats(alloc: AllocationMatrix) -> BalanceStats:
    s = alloc.assignment.astype(np.int64)
    overlap = s.T @ s
    d = alloc.replication.astype(np.float64)
    target = np.outer(d, d) / alloc.num_devices
    deviation = np.abs(overlap - target)
    np.fill_diagonal(deviation, 0.0)
    return BalanceStats(
        subset_counts=overlap.diagonal().copy(),
        overlap=overlap,
        max_deviation=float(deviation.max()) if alloc.num_subsets > 1 else 0.0,
    )


def vartheta(alloc: AllocationMatrix, num_devices: int | None = None) -> float:
    """Redundancy deficit sum_k (1/d_k - 1/N); zero iff every subset is everywhere."""
    n = alloc.num_devices if num_devices is None else num_devices
    return float(np.sum(1.0 / alloc.replication - 1.0 / n))


def save_allocation(alloc: AllocationMatrix, path: str | Path) -> None:
    """Write the 0/1 matrix as one space-separated row of digits per device."""
    lines = [" ".join(str(int(v)) for v in row) for row in alloc.assignment]
    Path(path).write_text("\n".join(lines) + "\n")


def load_allocation(path: str | Path) -> AllocationMatrix:
    rows = [
        [int(tok) for tok in line.split()]
        for line in Path(path).read_text().splitlines()
        if line.strip()
    ]
    return allocation_from_matrix(np.asarray(rows, dtype=np.int8))
