"""Synthetic linear-regression learning task.

The dataset holds M single-sample subsets: features z_k with entries drawn
from N(0, 100) (variance 100), a ground-truth parameter vector with
standard-normal entries, and labels y_k ~ N(<z_k, theta_true>, 1).  The
per-subset loss is f_k(theta) = 0.5*(<theta, z_k> - y_k)^2 and the training
loss is their sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class LinearRegressionTask:
    features: np.ndarray  # (M, D)
    labels: np.ndarray  # (M,)
    theta_true: np.ndarray  # (D,), generator ground truth, kept for diagnostics

    def __post_init__(self) -> None:
        z = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.float64)
        t = np.asarray(self.theta_true, dtype=np.float64)
        if z.ndim != 2 or y.shape != (z.shape[0],) or t.shape != (z.shape[1],):
            raise ConfigurationError("inconsistent task shapes")
        for arr in (z, y, t):
            arr.setflags(write=False)
        object.__setattr__(self, "features", z)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "theta_true", t)

    @property
    def num_subsets(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def generate_synthetic(
    num_subsets: int, dim: int, rng: np.random.Generator
) -> LinearRegressionTask:
    """Draw a fresh task; identical rng state gives an identical task."""
    if num_subsets < 1 or dim < 1:
        raise ConfigurationError("num_subsets and dim must be >= 1")
    features = rng.normal(0.0, 10.0, size=(num_subsets, dim))
    theta_true = rng.standard_normal(dim)
    labels = features @ theta_true + rng.standard_normal(num_subsets)
    return LinearRegressionTask(features, labels, theta_true)


def subset_gradient(task: LinearRegressionTask, k: int, theta: np.ndarray) -> np.ndarray:
    """Gradient of f_k at theta: (<theta, z_k> - y_k) * z_k.  k is zero-based."""
    if not 0 <= k < task.num_subsets:
        raise IndexError(f"subset index {k} out of range [0, {task.num_subsets})")
    residual = np.dot(task.features[k], theta) - task.labels[k]
    return residual * task.features[k]


def loss(task: LinearRegressionTask, theta: np.ndarray) -> float:
    residuals = task.features @ theta - task.labels
    return 0.5 * float(np.dot(residuals, residuals))


def full_gradient(task: LinearRegressionTask, theta: np.ndarray) -> np.ndarray:
    """Sum of subset gradients, accumulated in ascending k for reproducibility."""
    total = np.zeros(task.dim)
    for k in range(task.num_subsets):
        total += subset_gradient(task, k, theta)
    return total


def save_task(task: LinearRegressionTask, path: str | Path) -> None:
    """Plain-text export: 'D M' header, theta_true row, then one 'z_k ... y_k' row per sample."""
    parts = [f"{task.dim} {task.num_subsets}"]
    parts.append(" ".join(repr(float(v)) for v in task.theta_true))
    for k in range(task.num_subsets):
        row = [repr(float(v)) for v in task.features[k]]
        row.append(repr(float(task.labels[k])))
        parts.append(" ".join(row))
    Path(path).write_text("\n".join(parts) + "\n")


def load_task(path: str | Path) -> LinearRegressionTask:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    dim, num_subsets = (int(tok) for tok in lines[0].split())
    theta_true = np.array([float(tok) for tok in lines[1].split()])
    if theta_true.shape != (dim,) or len(lines) != 2 + num_subsets:
        raise ConfigurationError(f"malformed task file {path}")
    features = np.empty((num_subsets, dim))
    labels = np.empty(num_subsets)
    for k, line in enumerate(lines[2:]):
        values = [float(tok) for tok in line.split()]
        if len(values) != dim + 1:
            raise ConfigurationError(f"malformed task row {k} in {path}")
        features[k] = values[:-1]
        labels[k] = values[-1]
    return LinearRegressionTask(features, labels, theta_true)
