import json
from statistics import NormalDist

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy import stats

from fwdim.errors import ValidationError
from fwdim.regression import (
    NormalScaler,
    RegressionData,
    StudentTScaler,
    build_regression_data,
    im_from_second_moment,
    moment_diagnostics,
)
from fwdim.sde import build_time_grid

GRID = build_time_grid(1.0, 0.25)


def _t4_quantile(p):
    # closed-form inverse CDF of Student-t with 4 degrees of freedom
    a = 4 * p * (1 - p)
    q = np.sqrt(np.cos(np.arccos(np.sqrt(a)) / 3) / np.sqrt(a) - 1)
    return 2 * np.sign(p - 0.5) * q


class TestBuild:
    def test_constant_values(self):
        d = build_regression_data(np.full((5, 8), 3.0), GRID, 2)
        assert np.all(d.y == 0.0)
        assert np.all(d.x == 3.0)

    def test_arithmetic_example(self):
        g = build_time_grid(0.5, 0.5)
        d = build_regression_data(np.array([[1.0, 3.0], [2.0, 1.0]]), g, 0)
        np.testing.assert_array_equal(d.x, [1.0, 2.0])
        np.testing.assert_array_equal(d.y, [4.0, 1.0])

    def test_homogeneity(self):
        v = np.random.default_rng(0).normal(size=(20, 8))
        d1 = build_regression_data(v, GRID, 1)
        d3 = build_regression_data(3.0 * v, GRID, 1)
        np.testing.assert_allclose(d3.y, 9.0 * d1.y, rtol=1e-14)

    def test_pipeline_mean_is_second_moment(self):
        v = np.random.default_rng(1).normal(size=(1000, 8))
        d = build_regression_data(v, GRID, 3)
        pnl = v[:, 7] - v[:, 6]
        assert abs(d.y.mean() - np.mean(pnl**2)) < 1e-12

    def test_custom_regressor(self):
        v = np.random.default_rng(2).normal(size=(10, 8))
        s = np.arange(10.0)
        np.testing.assert_array_equal(build_regression_data(v, GRID, 0, s).x, s)

    @pytest.mark.parametrize("k", [-1, 4])
    def test_index_out_of_range(self, k):
        with pytest.raises(ValidationError):
            build_regression_data(np.zeros((3, 8)), GRID, k)

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            build_regression_data(np.zeros((3, 7)), GRID, 0)

    def test_data_invariants(self):
        with pytest.raises(ValidationError):
            RegressionData(0, [1.0, 2.0], [1.0])
        with pytest.raises(ValidationError):
            RegressionData(0, [1.0], [-1.0])
        with pytest.raises(ValidationError):
            RegressionData(0, [np.nan], [1.0])


class TestScaler:
    def test_normal_examples(self):
        s = NormalScaler(0.99)
        z = NormalDist().inv_cdf(0.99)
        assert im_from_second_moment([0.0], s)[0] == 0.0
        assert im_from_second_moment([1.0], s)[0] == pytest.approx(z, rel=1e-12)
        assert im_from_second_moment([4.0], s)[0] == pytest.approx(2 * z, rel=1e-12)
        assert round(z, 4) == 2.3263 and round(2 * z, 4) == 4.6527

    def test_student_t_against_closed_form(self):
        s = StudentTScaler(0.99, 4.0)
        assert s.factor() == pytest.approx(_t4_quantile(0.99) * np.sqrt(2.0 / 4.0), rel=1e-12)

    @pytest.mark.parametrize("dof", [2.5, 3.0, 5.0, 30.0])
    def test_student_t_cdf_round_trip(self, dof):
        q = StudentTScaler(0.99, dof).factor() / np.sqrt((dof - 2) / dof)
        assert stats.t.cdf(q, dof) == pytest.approx(0.99, abs=1e-12)

    def test_student_t_fatter_in_far_tail(self):
        assert StudentTScaler(0.999, 5.0).factor() > NormalScaler(0.999).factor()

    def test_student_t_approaches_normal(self):
        assert StudentTScaler(0.99, 1e7).factor() == pytest.approx(
            NormalScaler(0.99).factor(), rel=1e-6
        )

    @pytest.mark.parametrize("dof", [0.5, 1.0, 2.0])
    def test_student_t_infinite_variance(self, dof):
        with pytest.raises(ValidationError):
            StudentTScaler(0.99, dof)

    @pytest.mark.parametrize("p", [0.0, 1.0, 1.2])
    def test_bad_p(self, p):
        with pytest.raises(ValidationError):
            NormalScaler(p)

    def test_negative_predictions_clamp(self):
        np.testing.assert_array_equal(im_from_second_moment([-3.0, -1e-20], NormalScaler()), 0.0)

    def test_non_finite(self):
        with pytest.raises(ValidationError):
            im_from_second_moment([np.inf], NormalScaler())

    @settings(max_examples=100, deadline=None)
    @given(
        hnp.arrays(float, 20, elements=st.floats(0, 1e6)),
        hnp.arrays(float, 20, elements=st.floats(0, 1e6)),
    )
    def test_monotone(self, a, b):
        hi, lo = np.maximum(a, b), np.minimum(a, b)
        s = StudentTScaler(0.99, 6.0)
        assert np.all(im_from_second_moment(hi, s) >= im_from_second_moment(lo, s))

    @settings(max_examples=100, deadline=None)
    @given(
        hnp.arrays(float, 10, elements=st.just(0.0) | st.floats(1e-290, 1e6)),
        st.sampled_from([0.5, 2.0, 4.0, -8.0]),
    )
    def test_homogeneous(self, m, c):
        # powers of two keep the check exact; subnormals are excluded
        s = NormalScaler(0.99)
        np.testing.assert_array_equal(
            im_from_second_moment(c * c * m, s), abs(c) * im_from_second_moment(m, s)
        )


class TestMomentDiagnostics:
    def test_gaussian_passes(self):
        x = np.random.default_rng(0).standard_normal(100_000)
        rep = moment_diagnostics(x, n_boot=200, seed=1)
        assert rep.verdict == "pass"
        assert rep.moments[4].estimate == pytest.approx(3.0, rel=0.1)
        assert rep.moments[2].estimate == pytest.approx(1.0, rel=0.02)
        assert abs(rep.moments[1].estimate) < 0.02

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_student_t3_flagged(self, seed):
        x = np.random.default_rng(seed).standard_t(3, 100_000)
        assert moment_diagnostics(x, n_boot=200, seed=seed).verdict == "flag"

    def test_constant_passes_with_zero_variance(self):
        rep = moment_diagnostics(np.full(500, 0.1), n_boot=100)
        assert rep.verdict == "pass"
        assert rep.moments[2].estimate == 0.0
        assert rep.moments[1].estimate == pytest.approx(0.1)

    def test_preconditions(self):
        with pytest.raises(ValidationError):
            moment_diagnostics(np.zeros(99))
        with pytest.raises(ValidationError):
            moment_diagnostics(np.zeros(200), n_boot=50)

    def test_reproducible_and_serialisable(self):
        x = np.random.default_rng(3).standard_normal(1000)
        a = moment_diagnostics(x, seed=5).to_dict()
        b = moment_diagnostics(x, seed=5).to_dict()
        assert a == b
        doc = json.loads(json.dumps(a))
        assert set(doc["moments"]) == {"1", "2", "4"}
        assert doc["verdict"] in ("pass", "flag")
