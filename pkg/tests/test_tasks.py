import numpy as np
import pytest

from cocoef.streams import substream
from cocoef.tasks import (
    LinearRegressionTask,
    full_gradient,
    generate_synthetic,
    load_task,
    loss,
    save_task,
    subset_gradient,
)


def test_feature_variance_near_100():
    task = generate_synthetic(100, 100, substream(0, 0))
    assert 90.0 <= task.features.var() <= 110.0


def test_label_noise_is_standard_normal_around_clean_signal():
    task = generate_synthetic(10_000, 5, substream(1, 0))
    noise = task.labels - task.features @ task.theta_true
    assert abs(noise.mean()) <= 0.04
    assert 0.95 <= noise.std() <= 1.05


def test_generation_deterministic_under_seed():
    a = generate_synthetic(20, 7, substream(2, 0))
    b = generate_synthetic(20, 7, substream(2, 0))
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.theta_true, b.theta_true)


def test_subset_gradient_at_zero():
    task = generate_synthetic(6, 4, substream(3, 0))
    for k in range(task.num_subsets):
        expected = -task.labels[k] * task.features[k]
        assert np.array_equal(subset_gradient(task, k, np.zeros(4)), expected)


def test_subset_gradient_hand_value():
    task = LinearRegressionTask(
        features=np.array([[1.0, 0.0]]), labels=np.array([2.0]),
        theta_true=np.zeros(2),
    )
    assert np.array_equal(subset_gradient(task, 0, np.array([3.0, 5.0])), [1.0, 0.0])


def test_subset_gradient_vanishes_when_interpolating():
    task = LinearRegressionTask(
        features=np.array([[2.0, 1.0]]), labels=np.array([5.0]),
        theta_true=np.zeros(2),
    )
    assert np.array_equal(subset_gradient(task, 0, np.array([2.0, 1.0])), [0.0, 0.0])


def test_subset_gradient_index_out_of_range():
    task = generate_synthetic(3, 2, substream(4, 0))
    with pytest.raises(IndexError):
        subset_gradient(task, 3, np.zeros(2))
    with pytest.raises(IndexError):
        subset_gradient(task, -1, np.zeros(2))


def test_loss_zero_for_noiseless_labels_at_truth():
    rng = substream(5, 0)
    features = rng.normal(0.0, 10.0, size=(8, 3))
    theta = rng.standard_normal(3)
    task = LinearRegressionTask(features, features @ theta, theta)
    assert loss(task, theta) == 0.0


def test_loss_hand_value():
    task = LinearRegressionTask(np.array([[1.0]]), np.array([0.0]), np.zeros(1))
    assert loss(task, np.array([2.0])) == 2.0


def test_loss_is_sum_of_subset_losses():
    task = generate_synthetic(11, 6, substream(6, 0))
    theta = substream(6, 1).standard_normal(6)
    per_subset = sum(
        0.5 * (np.dot(task.features[k], theta) - task.labels[k]) ** 2
        for k in range(task.num_subsets)
    )
    assert loss(task, theta) == pytest.approx(per_subset, rel=1e-12)


def test_full_gradient_vanishes_at_least_squares_solution():
    task = generate_synthetic(30, 8, substream(7, 0))
    theta_ls, *_ = np.linalg.lstsq(task.features, task.labels, rcond=None)
    grad = full_gradient(task, theta_ls)
    scale = np.linalg.norm(task.features) * np.linalg.norm(task.labels)
    assert np.linalg.norm(grad) <= 1e-8 * scale


def test_full_gradient_matches_finite_differences():
    task = generate_synthetic(12, 5, substream(8, 0))
    rng = substream(8, 1)
    theta = rng.standard_normal(5)
    grad = full_gradient(task, theta)
    h = 1e-6
    for _ in range(10):
        direction = rng.standard_normal(5)
        direction /= np.linalg.norm(direction)
        numeric = (loss(task, theta + h * direction) - loss(task, theta - h * direction)) / (2 * h)
        analytic = float(np.dot(grad, direction))
        assert numeric == pytest.approx(analytic, rel=1e-5)


def test_full_gradient_at_zero():
    task = generate_synthetic(9, 4, substream(9, 0))
    expected = np.zeros(4)
    for k in range(task.num_subsets):
        expected += -task.labels[k] * task.features[k]
    assert np.array_equal(full_gradient(task, np.zeros(4)), expected)


def test_full_gradient_equals_ordered_subset_sum_bitwise():
    task = generate_synthetic(14, 6, substream(10, 0))
    theta = substream(10, 1).standard_normal(6)
    total = np.zeros(6)
    for k in range(task.num_subsets):
        total += subset_gradient(task, k, theta)
    assert np.array_equal(full_gradient(task, theta), total)


def test_task_file_round_trip_bitwise(tmp_path):
    task = generate_synthetic(7, 3, substream(11, 0))
    path = tmp_path / "task.txt"
    save_task(task, path)
    loaded = load_task(path)
    assert np.array_equal(loaded.features, task.features)
    assert np.array_equal(loaded.labels, task.labels)
    assert np.array_equal(loaded.theta_true, task.theta_true)
