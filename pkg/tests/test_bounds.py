import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ddrisk.bounds import (
    bernoulli_kl,
    dd_alpha_branch,
    dd_risk_bound,
    dd_risk_bound_simplified,
    dd_risk_exact,
    l1_to_uniform,
    q_star_entropy_gap,
)
from ddrisk.core import BinGrid, child_rng


class TestQStarEntropyGap:
    def test_zero_at_equal_arguments(self):
        assert q_star_entropy_gap(0.37, 0.37) == pytest.approx(0.0, abs=1e-15)

    def test_hand_value(self):
        # 0.5*ln(5) + 0.5*ln(5/9)
        expected = 0.5 * math.log(5) + 0.5 * math.log(5 / 9)
        assert q_star_entropy_gap(0.5, 0.1) == pytest.approx(expected, abs=1e-15)
        assert q_star_entropy_gap(0.5, 0.1) == pytest.approx(0.51083, abs=5e-6)

    def test_limit_toward_one(self):
        assert q_star_entropy_gap(1 - 1e-9, 0.1) == pytest.approx(math.log(10), abs=1e-6)

    @pytest.mark.parametrize("eps,frac", [(0.0, 0.5), (1.0, 0.5), (0.5, 0.0), (0.5, 1.0)])
    def test_rejects_endpoints(self, eps, frac):
        with pytest.raises(ValueError):
            q_star_entropy_gap(eps, frac)

    @given(st.floats(0.001, 0.999), st.floats(0.001, 0.999))
    def test_matches_lemma_entropy_coding(self, eps, v):
        # independent coding: negated piecewise-uniform entropy gain on a
        # unit-volume domain
        lemma = -(eps * (math.log(v) - math.log(eps))
                  + (1 - eps) * (math.log(1 - v) - math.log(1 - eps)))
        assert q_star_entropy_gap(eps, v) == pytest.approx(lemma, abs=1e-12)


class TestBernoulliKl:
    @given(st.floats(0.01, 0.99))
    def test_strictly_increasing_above_r(self, r):
        eps = np.linspace(r, 1.0, 64)
        vals = [bernoulli_kl(e, r) for e in eps]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_endpoint_limits(self):
        assert bernoulli_kl(1.0, 0.1) == pytest.approx(math.log(10), abs=1e-15)
        assert bernoulli_kl(0.0, 0.1) == pytest.approx(-math.log(0.9), abs=1e-15)


class TestDdRiskExact:
    def test_gamma_zero_returns_r(self):
        assert dd_risk_exact(0.123, 0.0) == 0.123

    def test_threshold_saturates_at_one(self):
        for gamma in (0.2, 0.7, 1.5):
            assert dd_risk_exact(math.exp(-gamma), gamma) == 1.0
            assert dd_risk_exact(min(math.exp(-gamma) * 1.01, 0.99), gamma) == 1.0

    def test_inverse_of_hand_value(self):
        gamma = q_star_entropy_gap(0.5, 0.1)
        assert dd_risk_exact(0.1, gamma) == pytest.approx(0.5, abs=1e-6)
        assert dd_risk_exact(0.1, 0.51083) == pytest.approx(0.5, abs=1e-4)

    def test_root_property(self):
        for r, gamma in [(0.05, 0.3), (0.2, 0.8), (0.01, 2.0)]:
            eps = dd_risk_exact(r, gamma)
            assert bernoulli_kl(eps, r) == pytest.approx(gamma, abs=1e-8)

    def test_against_dense_grid_scan(self):
        # independent oracle: largest eps on a dense grid with KL <= gamma
        grid = np.linspace(1e-6, 1 - 1e-6, 200_001)
        for r, gamma in [(0.1, 0.5), (0.05, 1.0), (0.3, 0.4), (0.02, 2.5)]:
            kl = (grid * np.log(grid / r)
                  + (1 - grid) * np.log((1 - grid) / (1 - r)))
            feasible = grid[(grid >= r) & (kl <= gamma)]
            scan = feasible.max() if feasible.size else r
            assert dd_risk_exact(r, gamma) == pytest.approx(scan, abs=1e-5)

    def test_monotone_in_r_and_gamma(self):
        rs = np.linspace(0.01, 0.6, 25)
        vals = [dd_risk_exact(r, 0.5) for r in rs]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
        gammas = np.linspace(0.0, 3.0, 25)
        vals = [dd_risk_exact(0.1, g) for g in gammas]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


class TestDdRiskBound:
    def test_simplified_hand_value(self):
        # (0.5 + ln 2)/ln 10 = 0.51819 beats the additive 0.6
        val = dd_risk_bound_simplified(0.1, 0.5)
        assert val == pytest.approx((0.5 + math.log(2)) / math.log(10), abs=1e-15)
        assert val == pytest.approx(0.51819, abs=1e-4)
        assert 0.1 + math.sqrt(0.5 / 2) == pytest.approx(0.6, abs=1e-12)

    def test_gamma_zero_collapses_to_r(self):
        for r in (0.05, 0.2, 0.5):
            assert dd_risk_bound(r, 0.0) <= r + 1e-9

    def test_optimized_never_worse_than_fixed_alpha_half(self):
        for r in (0.02, 0.1, 0.3):
            for gamma in (0.1, 0.5, 1.0, 2.0):
                assert dd_risk_bound(r, gamma) <= dd_risk_bound_simplified(r, gamma) + 1e-12
                assert dd_risk_bound(r, gamma) <= dd_alpha_branch(r, gamma, 0.5) + 1e-12 \
                    if r < 0.5 else True

    def test_dominates_exact_on_sweep(self):
        for r in np.linspace(0.01, 0.4, 14):
            for gamma in np.linspace(0.0, 3.0, 13):
                bound = dd_risk_bound(float(r), float(gamma))
                exact = dd_risk_exact(float(r), float(gamma))
                assert bound >= exact - 1e-9, (r, gamma, bound, exact)

    def test_vacuous_regime_stays_above_one(self):
        # once r >= e^-gamma the exact risk is 1; a sound bound cannot dip below
        for r, gamma in [(0.7, 0.5), (0.2, 2.0), (0.9, 0.2)]:
            assert r >= math.exp(-gamma)
            assert dd_risk_bound(r, gamma) >= 1.0 - 1e-12

    def test_alpha_branch_rejects_bad_alpha(self):
        with pytest.raises(ValueError):
            dd_alpha_branch(0.3, 0.5, 0.2)


class TestL1ToUniform:
    def test_balanced_sample_is_zero(self):
        k = 4
        axis = (np.arange(k) + 0.5) / k
        xx, yy = np.meshgrid(axis, axis)
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        val = l1_to_uniform(pts, np.ones(len(pts)), BinGrid(k))
        assert val == pytest.approx(0.0, abs=1e-12)

    def test_point_mass_approaches_two(self):
        pts = np.tile([[0.5, 0.5]], (10, 1))
        val = l1_to_uniform(pts, np.ones(10), BinGrid(100))
        assert val == pytest.approx(2.0 * (1.0 - 1e-4), abs=1e-9)

    def test_uniform_large_sample_is_small(self):
        # multinomial fluctuation: E[l1] ~ k^2 * sqrt(2 p (1-p) / (pi m)) ~ 0.025
        pts = child_rng(3, 0).random((100_000, 2))
        assert l1_to_uniform(pts, np.ones(100_000), BinGrid(10)) < 0.1

    def test_rejects_zero_weights(self):
        with pytest.raises(ValueError):
            l1_to_uniform(np.array([[0.5, 0.5]]), np.array([0.0]), BinGrid(10))

    def test_weights_shift_the_mass(self):
        pts = np.array([[0.1, 0.1], [0.9, 0.1], [0.1, 0.9], [0.9, 0.9]])
        even = l1_to_uniform(pts, np.ones(4), BinGrid(2))
        skewed = l1_to_uniform(pts, np.array([1.0, 1.0, 1.0, 3.0]), BinGrid(2))
        assert even == pytest.approx(0.0, abs=1e-12)
        assert skewed > even
