import math

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import multivariate_normal

from ddrisk.core import BinGrid
from ddrisk.entropy import binned_entropy, histogram
from ddrisk.tasks import (
    GaussianMixtureTask,
    RejectionBudgetError,
    TruncatedGaussianSampler,
    sample_task,
    sample_truncated_gaussian,
    sample_uniform,
    true_density_truncated_gaussian,
    true_label,
)
from ddrisk.core import Point2


def _explicit_task(means, std=0.05):
    return GaussianMixtureTask(means=np.asarray(means, dtype=float),
                               component_std=std,
                               class_of_component=(1, 1, 0, 0), seed=0)


class TestSampleTask:
    def test_means_inside_square(self):
        task = sample_task(3)
        assert np.all(task.means >= 0.0) and np.all(task.means <= 1.0)
        assert task.means.shape == (4, 2)

    def test_deterministic(self):
        a, b = sample_task(11), sample_task(11)
        assert a.means.tobytes() == b.means.tobytes()

    def test_35_seeds_give_distinct_tasks(self):
        tasks = [sample_task(s) for s in range(35)]
        blobs = {t.means.tobytes() for t in tasks}
        assert len(blobs) == 35

    def test_no_degenerate_tasks(self):
        axis = (np.arange(200) + 0.5) / 200
        xx, yy = np.meshgrid(axis, axis)
        grid_pts = np.column_stack([xx.ravel(), yy.ravel()])
        for seed in range(20):
            labels = sample_task(seed).label_batch(grid_pts)
            assert labels.min() == 0 and labels.max() == 1

    def test_json_roundtrip(self):
        task = sample_task(5)
        back = GaussianMixtureTask.from_json(task.to_json())
        assert back.means.tobytes() == task.means.tobytes()
        assert back.component_std == task.component_std
        assert back.class_of_component == task.class_of_component


class TestTrueLabel:
    def test_dominant_positive_mean(self):
        task = _explicit_task([[0.1, 0.1], [0.1, 0.2], [0.9, 0.9], [0.9, 0.8]])
        assert true_label(task, Point2(0.1, 0.1)) == 1
        assert true_label(task, Point2(0.9, 0.9)) == 0

    def test_symmetric_tie_goes_negative(self):
        # positives and negatives mirror each other around the center
        task = _explicit_task([[0.25, 0.25], [0.75, 0.75], [0.25, 0.75], [0.75, 0.25]])
        assert true_label(task, Point2(0.5, 0.5)) == 0

    def test_matches_bruteforce_density_comparison(self):
        task = sample_task(9)
        rng = np.random.default_rng(0)
        pts = rng.random((500, 2))
        cov = np.eye(2) * task.component_std**2
        dens = np.stack([multivariate_normal(mean=m, cov=cov).pdf(pts)
                         for m in task.means], axis=1)
        cls = np.asarray(task.class_of_component)
        expected = (dens[:, cls == 1].sum(axis=1) > dens[:, cls == 0].sum(axis=1))
        assert np.array_equal(task.label_batch(pts), expected.astype(np.int64))

    def test_labeling_is_consistent_at_scale(self):
        task = sample_task(2)
        pts = np.random.default_rng(1).random((1_000_000, 2))
        assert np.array_equal(task.label_batch(pts), task.label_batch(pts))


class TestSampleUniform:
    def test_chi_square_occupancy(self):
        # offline Monte-Carlo of the occupancy statistic sum (O-1)^2 for
        # m=1e4 on the 100x100 grid gave mean 9992, sd 136; 5-sigma window
        task = sample_task(0)
        data = sample_uniform(task, 10_000, 123)
        counts = histogram(data.points, BinGrid(100)).counts
        stat = float(((counts - 1.0) ** 2).sum())
        assert 9315 < stat < 10670

    def test_deterministic_bytes(self):
        task = sample_task(0)
        a = sample_uniform(task, 64, 5)
        b = sample_uniform(task, 64, 5)
        assert a.points.tobytes() == b.points.tobytes()
        assert a.labels.tobytes() == b.labels.tobytes()

    def test_labels_follow_task(self):
        task = sample_task(4)
        data = sample_uniform(task, 256, 8)
        assert np.array_equal(data.labels, task.label_batch(data.points))


class TestTruncatedGaussian:
    def test_large_sigma_near_uniform_entropy(self):
        task = sample_task(0)
        data = sample_truncated_gaussian(task, 10_000, 10.0, 17)
        ent = binned_entropy(histogram(data.points, BinGrid(100)))
        # same window as a genuinely uniform 1e4-point sample
        assert ent > math.log(10_000) - 0.65

    def test_small_sigma_concentrates(self):
        # untruncated radial mass within 0.25 of center at sigma=0.05 is
        # 1 - exp(-12.5) ~ 0.999996; truncation only renormalizes upward
        task = sample_task(0)
        data = sample_truncated_gaussian(task, 5000, 0.05, 3)
        r = np.linalg.norm(data.points - 0.5, axis=1)
        assert np.mean(r <= 0.25) > 0.99

    def test_mean_approaches_center(self):
        task = sample_task(0)
        for sigma, tol in [(0.5, 0.05), (0.05, 0.01)]:
            data = sample_truncated_gaussian(task, 4000, sigma, 9)
            assert np.linalg.norm(data.points.mean(axis=0) - 0.5) < tol

    def test_all_points_inside_square(self):
        pts = TruncatedGaussianSampler(sigma=2.0).sample_points(2000, 1)
        assert np.all(pts >= 0.0) and np.all(pts <= 1.0)

    def test_budget_error_on_pathological_sigma(self):
        with pytest.raises(RejectionBudgetError):
            TruncatedGaussianSampler(sigma=1e9).sample_points(10, 0, retry_budget=100)

    def test_deterministic(self):
        task = sample_task(1)
        a = sample_truncated_gaussian(task, 128, 0.3, 6)
        b = sample_truncated_gaussian(task, 128, 0.3, 6)
        assert a.points.tobytes() == b.points.tobytes()


class TestTrueDensity:
    @pytest.mark.parametrize("sigma", [0.05, 0.3, 10.0])
    def test_integrates_to_one(self, sigma):
        val, err = integrate.dblquad(
            lambda y, x: true_density_truncated_gaussian(np.array([[x, y]]), sigma)[0],
            0.0, 1.0, 0.0, 1.0, epsabs=1e-9)
        assert val == pytest.approx(1.0, abs=1e-6)

    def test_flat_limit(self):
        dens = true_density_truncated_gaussian(
            np.array([[0.5, 0.5], [0.1, 0.9], [0.0, 0.0]]), 10.0)
        assert np.all(np.abs(dens - 1.0) < 0.01)

    @pytest.mark.parametrize("sigma", [0.05, 0.5, 2.0, 10.0])
    def test_center_beats_corner(self, sigma):
        center = true_density_truncated_gaussian(Point2(0.5, 0.5), sigma)
        corner = true_density_truncated_gaussian(Point2(0.0, 0.0), sigma)
        assert center > corner

    def test_matches_empirical_histogram(self):
        # sampler and analytic density must describe the same distribution
        task = sample_task(0)
        data = sample_truncated_gaussian(task, 40_000, 0.3, 21)
        grid = BinGrid(5)
        counts = histogram(data.points, grid).counts / len(data)
        axis = (np.arange(5) + 0.5) / 5
        xx, yy = np.meshgrid(axis, axis)
        cell_pts = np.column_stack([xx.ravel(), yy.ravel()])
        approx_mass = true_density_truncated_gaussian(cell_pts, 0.3) * grid.cell_area
        assert np.max(np.abs(counts - approx_mass)) < 0.01
