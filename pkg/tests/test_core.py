import numpy as np
import pytest
from hypothesis import given, strategies as st

from ddrisk.core import (
    BinGrid,
    Dataset,
    Point2,
    RiskReport,
    bin_index,
    bin_indices,
    child_rng,
    zero_one_loss,
)


class TestBinIndex:
    def test_origin_cell(self):
        assert bin_index(Point2(0.0, 0.0), BinGrid(100)) == 0

    def test_boundary_clamped_to_last_cell(self):
        assert bin_index(Point2(1.0, 1.0), BinGrid(100)) == 9999

    def test_floor_arithmetic(self):
        # floor(0.505*100)=50, floor(0.005*100)=0 -> 50 + 100*0
        assert bin_index(Point2(0.505, 0.005), BinGrid(100)) == 50

    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.integers(1, 50))
    def test_total_on_closed_square(self, x, y, k):
        idx = bin_index(Point2(x, y), BinGrid(k))
        assert 0 <= idx < k * k

    def test_surjective_when_sampling_densely(self):
        k = 7
        grid = BinGrid(k)
        axis = (np.arange(4 * k) + 0.5) / (4 * k)
        xx, yy = np.meshgrid(axis, axis)
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        assert set(bin_indices(pts, grid)) == set(range(k * k))

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(0)
        pts = rng.random((200, 2))
        grid = BinGrid(13)
        vec = bin_indices(pts, grid)
        for p, idx in zip(pts, vec):
            assert bin_index(Point2(*p), grid) == idx


class TestZeroOneLoss:
    @pytest.mark.parametrize("pred,truth,expected", [(0, 0, 0.0), (1, 1, 0.0),
                                                     (1, 0, 1.0), (0, 1, 1.0)])
    def test_truth_table(self, pred, truth, expected):
        assert zero_one_loss(pred, truth) == expected

    def test_rejects_nonbinary(self):
        with pytest.raises(ValueError):
            zero_one_loss(2, 0)


class TestDataset:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            Dataset(np.empty((0, 2)), np.empty(0), seed=0)

    def test_rejects_out_of_square(self):
        with pytest.raises(ValueError):
            Dataset(np.array([[1.5, 0.2]]), np.array([0]), seed=0)

    def test_immutable(self):
        ds = Dataset(np.array([[0.1, 0.2]]), np.array([1]), seed=3)
        with pytest.raises(ValueError):
            ds.points[0, 0] = 0.5

    def test_samples_roundtrip(self):
        ds = Dataset(np.array([[0.1, 0.2], [0.3, 0.4]]), np.array([1, 0]), seed=3)
        assert len(ds) == 2
        assert ds[1].label == 0
        assert ds[0].point == Point2(0.1, 0.2)
        assert [s.label for s in ds.samples] == [1, 0]


class TestChildRng:
    def test_same_stream_is_identical(self):
        a = child_rng(42, 1, 2).random(8)
        b = child_rng(42, 1, 2).random(8)
        assert a.tobytes() == b.tobytes()

    def test_distinct_streams_differ(self):
        a = child_rng(42, 1).random(8)
        b = child_rng(42, 2).random(8)
        c = child_rng(43, 1).random(8)
        assert a.tobytes() != b.tobytes()
        assert a.tobytes() != c.tobytes()


class TestRiskReport:
    def test_rejects_out_of_range_risk(self):
        with pytest.raises(ValueError):
            RiskReport(uniform_risk=1.2, dd_risk_by_gamma={}, bound_by_gamma={},
                       seed=0, n=10)

    def test_rejects_negative_bound(self):
        with pytest.raises(ValueError):
            RiskReport(uniform_risk=0.1, dd_risk_by_gamma={0.5: 0.4},
                       bound_by_gamma={0.5: -0.1}, seed=0, n=10)

    def test_vacuous_flag_and_rows(self):
        rep = RiskReport(uniform_risk=0.1, dd_risk_by_gamma={0.5: 0.4, 1.0: 0.9},
                         bound_by_gamma={0.5: 0.6, 1.0: 1.2}, seed=7, n=100, sigma=0.3)
        assert not rep.is_vacuous(0.5)
        assert rep.is_vacuous(1.0)
        rows = rep.to_rows()
        assert [r["gamma"] for r in rows] == [0.5, 1.0]
        assert rows[0]["uniform_risk"] == 0.1
