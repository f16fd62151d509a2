from statistics import NormalDist

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hurricast.errors import DomainError, SchemaError
from hurricast.metrics import (
    MetricReport,
    aplf,
    directional_accuracy,
    mae,
    pit_uniformity,
    pit_value,
    round_half_up,
    score,
)
from hurricast.qr import QuantileForecast, TauGrid

finite = st.floats(-1e4, 1e4, allow_nan=False)


def curve(values, taus=(0.1, 0.5, 0.9)):
    return QuantileForecast(TauGrid(tuple(taus)), np.asarray(values, dtype=float))


class TestMae:
    def test_identity(self):
        assert mae([1, 2, 3], [1, 2, 3]) == 0.0

    def test_example(self):
        assert mae([3, 5], [5, 4]) == 1.5

    def test_length_mismatch(self):
        with pytest.raises(SchemaError):
            mae([1, 2], [1])

    def test_empty(self):
        with pytest.raises(SchemaError):
            mae([], [])

    @given(st.lists(st.tuples(finite, finite), min_size=1, max_size=20), finite)
    def test_translation_invariance(self, pairs, c):
        y, f = map(np.array, zip(*pairs))
        assert mae(y + c, f + c) == pytest.approx(mae(y, f), abs=1e-7)

    def test_round_half_up(self):
        np.testing.assert_array_equal(round_half_up([0.5, 1.5, 2.49, -0.5, 2.5]), [1, 2, 2, 0, 3])


class TestDirectionalAccuracy:
    def test_all_match(self):
        assert directional_accuracy([1, 3, 2], [2, 4, 1]) == 1.0

    def test_none_match(self):
        assert directional_accuracy([1, 3, 2], [2, 1, 3]) == 0.0

    def test_ties_match_only_ties(self):
        assert directional_accuracy([1, 1, 2], [5, 5, 5]) == 0.5

    def test_too_short(self):
        with pytest.raises(SchemaError):
            directional_accuracy([1], [1])

    def test_alternative_reference(self):
        # forecast vs previous actual: 4-1 > 0 matches 3-1 > 0; 1-3 < 0 matches 2-3 < 0
        assert directional_accuracy([1, 3, 2], [9, 4, 1], reference="actual") == 1.0
        with pytest.raises(DomainError):
            directional_accuracy([1, 2], [1, 2], reference="bogus")

    @given(st.lists(st.integers(0, 30), min_size=2, max_size=20).filter(lambda v: len(set(v)) > 1),
           st.integers(-50, 50))
    def test_self_and_shift(self, y, c):
        y = np.asarray(y, dtype=float)
        assert directional_accuracy(y, y) == 1.0
        assert directional_accuracy(y, y + c) == 1.0

    @given(st.lists(st.tuples(finite, finite), min_size=2, max_size=20))
    def test_in_unit_interval(self, pairs):
        y, f = map(np.array, zip(*pairs))
        assert 0.0 <= directional_accuracy(y, f) <= 1.0


class TestAplf:
    def test_perfect(self):
        overall, per = aplf([4.0, 6.0], [curve([4, 4, 4]), curve([6, 6, 6])])
        assert overall == 0.0 and per.tolist() == [0.0, 0.0]

    def test_single_year_example(self):
        overall, _ = aplf([4.0], [curve([2.0], (0.5,))])
        assert overall == 1.0

    def test_hand_computed(self):
        # y=5, q=(2,4,8): 0.1*3, 0.5*1, 0.1*3 -> mean 0.3667
        overall, _ = aplf([5.0], [curve([2, 4, 8])])
        assert overall == pytest.approx((0.3 + 0.5 + 0.3) / 3)

    def test_grid_mismatch(self):
        with pytest.raises(SchemaError):
            aplf([1.0, 2.0], [curve([1, 2, 3]), curve([1, 2], (0.1, 0.9))])

    def test_count_mismatch(self):
        with pytest.raises(SchemaError):
            aplf([1.0, 2.0], [curve([1, 2, 3])])

    def test_restriction_to_subgrid(self):
        qf = QuantileForecast(TauGrid.default(), np.linspace(0, 18, 19))
        small, _ = aplf([9.0], [qf], TauGrid((0.1, 0.5, 0.9)))
        # q(0.1)=1, q(0.5)=9, q(0.9)=17
        assert small == pytest.approx((0.1 * 8 + 0 + 0.1 * 8) / 3)

    @given(st.lists(st.tuples(finite, finite), min_size=1, max_size=15))
    def test_median_grid_is_half_mae(self, pairs):
        y, m = map(np.array, zip(*pairs))
        overall, _ = aplf(y, [curve([v], (0.5,)) for v in m])
        assert overall == 0.5 * mae(y, m)


class TestPit:
    def test_median(self):
        assert pit_value(4.0, curve([2, 4, 8])).value == 0.5

    def test_interpolation(self):
        assert pit_value(6.0, curve([2, 4, 8])).value == pytest.approx(0.7)

    def test_clamps(self):
        lo = pit_value(1.0, curve([2, 4, 8]))
        hi = pit_value(9.0, curve([2, 4, 8]))
        assert (lo.value, lo.clamped) == (0.1, True)
        assert (hi.value, hi.clamped) == (0.9, True)
        assert not pit_value(2.0, curve([2, 4, 8])).clamped

    def test_atom_midpoint(self):
        assert pit_value(3.0, curve([3, 3, 3, 5], (0.1, 0.3, 0.5, 0.7))).value == pytest.approx(0.3)

    def test_non_monotone(self):
        qf = object.__new__(QuantileForecast)
        object.__setattr__(qf, "taus", TauGrid((0.1, 0.5)))
        object.__setattr__(qf, "values", np.array([3.0, 1.0]))
        with pytest.raises(DomainError):
            pit_value(2.0, qf)

    @given(st.lists(st.floats(-100, 100), min_size=3, max_size=3), finite, finite)
    def test_monotone_in_actual(self, q, a, b):
        qf = curve(sorted(q))
        lo, hi = sorted((a, b))
        assert pit_value(lo, qf).value <= pit_value(hi, qf).value + 1e-12

    def test_normal_calibration(self):
        m, s = 7.0, 2.5
        grid = TauGrid.default()
        nd = NormalDist(m, s)
        qf = QuantileForecast(grid, [nd.inv_cdf(t) for t in grid])
        draws = np.random.default_rng(2024).normal(m, s, 1000)
        mean, dist = pit_uniformity([pit_value(x, qf).value for x in draws])
        assert 0.45 <= mean <= 0.55
        assert dist <= 0.06


def test_pit_uniformity_of_exact_grid():
    mean, dist = pit_uniformity((np.arange(100) + 0.5) / 100)
    assert mean == pytest.approx(0.5) and dist == pytest.approx(0.005)


def test_score_report():
    years = [2019, 2020, 2021]
    y = [5.0, 8.0, 6.0]
    curves = [curve([3, 5, 7]), curve([4, 6, 9]), curve([4, 6, 8])]
    r = score(years, y, [5.4, 6.0, 5.0], curves)
    assert isinstance(r, MetricReport)
    assert r.mae == pytest.approx((0.4 + 2 + 1) / 3)
    assert r.mae_rounded == pytest.approx((0 + 2 + 1) / 3)
    assert r.da == 1.0
    assert r.aplf_small_grid == r.aplf_full_grid
    assert set(r.pit) == set(years) and r.pit[2019] == 0.5
    assert r.to_dict()["pit_clamped"] == {2019: False, 2020: False, 2021: False}
