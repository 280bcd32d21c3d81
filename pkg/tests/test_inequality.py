import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from citeskew.inequality import (
    CutSpec,
    DegenerateDistributionError,
    DegenerateDistributionWarning,
    gini,
    lorenz_curve,
    percentile_shares,
    percentile_shares_by,
    share_density,
    ShareBreakdown,
)

outcome_lists = st.lists(
    st.one_of(st.integers(0, 50).map(float), st.floats(0, 1e4, allow_nan=False)),
    min_size=1,
    max_size=60,
).filter(lambda xs: sum(xs) > 0)


class TestCutSpec:
    def test_default_labels(self):
        c = CutSpec()
        assert c.labels == ("bottom50", "mid40", "top10")
        assert c.widths == (50.0, 40.0, 10.0)

    def test_refined_labels(self):
        assert CutSpec((50, 80, 90)).labels == ("bottom50", "p50-80", "p80-90", "top10")

    @pytest.mark.parametrize("bad", [(), (0, 50), (50, 100), (90, 50), (50, 50)])
    def test_rejects_invalid(self, bad):
        with pytest.raises(ValueError):
            CutSpec(bad)

    def test_parse(self):
        assert CutSpec.parse("50,90") == CutSpec()


class TestFixtures:
    def test_uniform(self):
        b = percentile_shares([3.0] * 10)
        np.testing.assert_allclose(b.shares, (50, 40, 10), atol=1e-12)
        np.testing.assert_allclose(b.densities, (1, 1, 1), atol=1e-12)

    def test_one_heavy_unit(self):
        b = percentile_shares([1, 1, 1, 7])
        np.testing.assert_allclose(b.shares, (20, 52, 28), atol=1e-12)
        np.testing.assert_allclose(share_density(b), (0.4, 1.3, 2.8), atol=1e-12)

    def test_single_holder(self):
        b = percentile_shares([0] * 9 + [10])
        np.testing.assert_allclose(b.shares, (0, 0, 100), atol=1e-12)

    def test_single_unit(self):
        np.testing.assert_allclose(percentile_shares([4]).shares, (50, 40, 10), atol=1e-12)

    def test_ranked_by_authors(self):
        b = percentile_shares_by([10, 0, 5, 1], [1, 2, 3, 4])
        np.testing.assert_allclose(b.shares, (62.5, 35.0, 2.5), atol=1e-12)

    def test_pooled_ties_any_order(self):
        y = np.array([4, 0, 1, 1])
        r = np.array([1, 1, 2, 2])
        for perm in ([0, 1, 2, 3], [1, 0, 3, 2], [3, 1, 2, 0], [2, 3, 0, 1]):
            b = percentile_shares_by(y[perm], r[perm])
            np.testing.assert_allclose(b.shares, (66.667, 26.667, 6.667), atol=1e-3)
            np.testing.assert_allclose(b.shares, (200 / 3, 80 / 3, 20 / 3), atol=1e-12)

    def test_self_rank_matches_base(self):
        y = [3, 0, 9, 9, 1, 2]
        assert percentile_shares_by(y, y).shares == percentile_shares(y).shares

    def test_density_shape(self):
        b = ShareBreakdown(
            labels=("bottom50", "mid40", "top10"),
            widths=(50.0, 40.0, 10.0),
            shares=(9.9, 32.5, 57.6),
            n_units=0,
            total_outcome=1.0,
            gini=0.0,
        )
        np.testing.assert_allclose(share_density(b), (0.198, 0.8125, 5.76), atol=1e-12)


class TestErrors:
    def test_empty(self):
        with pytest.raises(ValueError):
            percentile_shares([])
        with pytest.raises(ValueError):
            gini([])

    def test_zero_total(self):
        with pytest.raises(DegenerateDistributionError):
            percentile_shares([0, 0, 0])
        with pytest.raises(DegenerateDistributionError):
            percentile_shares_by([0, 0], [1, 2])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            percentile_shares_by([1, 2, 3], [1, 2])

    def test_negative(self):
        with pytest.raises(ValueError):
            percentile_shares([1, -1, 3])


class TestGini:
    def test_equal(self):
        assert gini([5, 5, 5, 5]) == 0.0

    def test_one_to_four(self):
        assert abs(gini([1, 2, 3, 4]) - 0.25) < 1e-12

    def test_single_holder(self):
        assert abs(gini([0] * 9 + [10]) - 0.9) < 1e-12

    def test_all_zero_warns(self):
        with pytest.warns(DegenerateDistributionWarning):
            assert gini([0, 0, 0]) == 0.0

    def test_attached_to_breakdown(self):
        assert abs(percentile_shares([1, 2, 3, 4]).gini - 0.25) < 1e-12


class TestOracle:
    def test_random_instances(self):
        rng = np.random.default_rng(7)
        cuts = CutSpec((10, 50, 90, 99))
        for _ in range(200):
            y = oracles.random_instance(rng)
            r = oracles.random_ranking(rng, y.size)
            np.testing.assert_allclose(
                percentile_shares(y, cuts).shares, oracles.shares(y, cuts.cuts), atol=1e-9
            )
            np.testing.assert_allclose(
                percentile_shares_by(y, r, cuts).shares,
                oracles.shares(y, cuts.cuts, r),
                atol=1e-9,
            )
            assert abs(gini(y) - oracles.gini_pairwise(y)) < 1e-9

    def test_lorenz_knots(self):
        p, L = lorenz_curve([1, 1, 1, 7])
        np.testing.assert_allclose(p, [0, 0.75, 1])
        np.testing.assert_allclose(L, [0, 0.3, 1])


@settings(max_examples=200, deadline=None)
@given(outcome_lists)
def test_shares_sum_to_100(ys):
    assert abs(sum(percentile_shares(ys).shares) - 100.0) < 1e-9


@settings(max_examples=200, deadline=None)
@given(outcome_lists, st.randoms(use_true_random=False))
def test_permutation_invariance(ys, rnd):
    ranking = [float(i % 3) for i in range(len(ys))]
    pairs = list(zip(ys, ranking))
    base = percentile_shares_by(ys, ranking)
    rnd.shuffle(pairs)
    y2, r2 = zip(*pairs)
    perm = percentile_shares_by(y2, r2)
    np.testing.assert_allclose(perm.shares, base.shares, atol=1e-9)
    assert abs(perm.gini - base.gini) < 1e-9


@settings(max_examples=200, deadline=None)
@given(outcome_lists, st.floats(1e-3, 1e3))
def test_scale_invariance(ys, c):
    a = percentile_shares(ys)
    b = percentile_shares([c * y for y in ys])
    np.testing.assert_allclose(a.shares, b.shares, atol=1e-9)
    assert abs(a.gini - b.gini) < 1e-9


@settings(max_examples=200, deadline=None)
@given(outcome_lists)
def test_lorenz_gini_identity(ys):
    p, L = lorenz_curve(ys)
    area = float(np.sum(np.diff(p) * (L[1:] + L[:-1]) / 2))
    assert abs((1 - 2 * area) - gini(ys)) < 1e-9


@settings(max_examples=200, deadline=None)
@given(outcome_lists)
def test_refinement_additivity(ys):
    coarse = percentile_shares(ys, CutSpec((50, 90)))
    fine = percentile_shares(ys, CutSpec((50, 80, 90)))
    assert abs(fine.shares[1] + fine.shares[2] - coarse.shares[1]) < 1e-9
    assert abs(fine.shares[0] - coarse.shares[0]) < 1e-9


@settings(max_examples=200, deadline=None)
@given(outcome_lists, st.floats(1e-6, 1.0))
def test_transfer_to_top(ys, frac):
    ys = list(ys)
    n = len(ys)
    order = sorted(range(n), key=lambda i: ys[i])
    donors = [i for i in order[: int(0.9 * n)] if ys[i] > 0]
    if not donors:
        return
    donor, top = donors[0], order[-1]
    if donor == top:
        return
    before = percentile_shares(ys)
    eps = ys[donor] * frac
    moved = list(ys)
    moved[donor] -= eps
    moved[top] += eps
    after = percentile_shares(moved)
    assert after.shares[-1] >= before.shares[-1] - 1e-9
    assert after.gini >= before.gini - 1e-9


def test_all_zero_gini_no_warning_for_positive():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        gini([0, 0, 1])
