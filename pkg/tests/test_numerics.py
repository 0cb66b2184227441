"""Random streams, normal special functions, linear algebra, Jacobians."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bidiv import (
    JacobianEvaluationError,
    RngStream,
    SingularMatrix,
    numeric_jacobian,
    std_normal_cdf,
    std_normal_logcdf,
    std_normal_pdf,
    std_normal_quantile,
)
from bidiv.numerics import draw_bivariate_confounders, inv_spd, solve_spd

# Reference values computed with 50-digit arithmetic.
PHI_REFERENCE = [
    (-37.0, 5.725571222524576822683e-300),
    (-1.0, 0.1586552539314570514148),
    (0.0, 0.5),
    (1.0, 0.8413447460685429485852),
]
LOG_PHI_MINUS_37 = -689.0305855768905936009
PDF_REFERENCE = [(0.0, 0.3989422804014326779399), (1.0, 0.2419707245191433497978)]
QUANTILE_REFERENCE = [
    (0.975, 1.959963984540054235525),
    (0.9, 1.281551565544600466965),
    (0.5, 0.0),
]


class TestRngStream:
    def test_same_identity_same_draws(self):
        a = RngStream(42).standard_normal(16)
        b = RngStream(42).standard_normal(16)
        np.testing.assert_array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RngStream(42, 0).standard_normal(16)
        b = RngStream(42, 1).standard_normal(16)
        assert not np.array_equal(a, b)

    def test_derivation_is_path_based(self):
        direct = RngStream(7).derive(3, 5).standard_normal(8)
        chained = RngStream(7).derive(3).derive(5).standard_normal(8)
        np.testing.assert_array_equal(direct, chained)

    def test_derived_stream_independent_of_parent_consumption(self):
        parent = RngStream(9)
        before = parent.derive(1).standard_normal(4)
        parent.standard_normal(100)
        after = parent.derive(1).standard_normal(4)
        np.testing.assert_array_equal(before, after)

    def test_integers_bounds(self):
        draws = RngStream(3).integers(0, 10, 5000)
        assert draws.min() >= 0 and draws.max() < 10

    def test_uniform_bounds(self):
        draws = RngStream(3).uniform(-1.0, 1.0, 5000)
        assert draws.min() >= -1.0 and draws.max() <= 1.0


class TestSpecialFunctions:
    @pytest.mark.parametrize("x,expected", PHI_REFERENCE)
    def test_cdf_reference(self, x, expected):
        assert std_normal_cdf(x) == pytest.approx(expected, rel=1e-12)

    def test_logcdf_deep_tail(self):
        assert std_normal_logcdf(-37.0) == pytest.approx(LOG_PHI_MINUS_37, rel=1e-13)
        assert math.isfinite(std_normal_logcdf(-300.0))

    @pytest.mark.parametrize("x,expected", PDF_REFERENCE)
    def test_pdf_reference(self, x, expected):
        assert std_normal_pdf(x) == pytest.approx(expected, rel=1e-13)

    @pytest.mark.parametrize("p,expected", QUANTILE_REFERENCE)
    def test_quantile_reference(self, p, expected):
        assert std_normal_quantile(p) == pytest.approx(expected, abs=1e-12)

    @given(st.floats(min_value=-8.0, max_value=5.0))
    @settings(max_examples=80, deadline=None)
    def test_quantile_inverts_cdf(self, x):
        # above ~5.6 the cdf saturates against 1 and the double spacing
        # there (1.1e-16) caps the achievable round-trip accuracy
        assert std_normal_quantile(std_normal_cdf(x)) == pytest.approx(x, abs=1e-9)

    def test_quantile_round_trip_near_saturation(self):
        assert std_normal_quantile(std_normal_cdf(6.0)) == pytest.approx(6.0, abs=1e-7)

    @given(st.floats(min_value=-30.0, max_value=5.0))
    @settings(max_examples=80, deadline=None)
    def test_logcdf_consistent_with_cdf(self, x):
        assert std_normal_logcdf(x) == pytest.approx(
            math.log(std_normal_cdf(x)), rel=1e-10
        )

    def test_vectorized(self):
        xs = np.linspace(-5, 5, 11)
        np.testing.assert_allclose(
            std_normal_cdf(xs), [std_normal_cdf(float(x)) for x in xs], rtol=1e-14
        )


class TestLinearAlgebra:
    def _random_spd(self, rng, p):
        m = rng.standard_normal((p, p))
        return m @ m.T + p * np.eye(p)

    def test_solve_spd_matches_numpy(self):
        rng = np.random.default_rng(5)
        for p in (2, 4, 9):
            a = self._random_spd(rng, p)
            b = rng.standard_normal(p)
            np.testing.assert_allclose(solve_spd(a, b), np.linalg.solve(a, b), rtol=1e-10)

    def test_inv_spd(self):
        rng = np.random.default_rng(6)
        a = self._random_spd(rng, 5)
        np.testing.assert_allclose(inv_spd(a) @ a, np.eye(5), atol=1e-10)

    def test_singular_matrix_carries_pivot(self):
        a = np.array([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(SingularMatrix) as exc_info:
            solve_spd(a, np.ones(2))
        assert exc_info.value.pivot == 1


class TestNumericJacobian:
    def test_matches_analytic(self):
        def f(v):
            return np.array([v[0] ** 2, v[0] * v[1], math.sin(v[1])])

        point = np.array([1.3, -0.4])
        expected = np.array(
            [[2 * 1.3, 0.0], [-0.4, 1.3], [0.0, math.cos(-0.4)]]
        )
        np.testing.assert_allclose(numeric_jacobian(f, point), expected, atol=1e-7)

    def test_wraps_evaluation_failure_with_coordinate(self):
        def f(v):
            if v[1] != 0.0:
                raise ValueError("off the axis")
            return np.array([v[0]])

        with pytest.raises(JacobianEvaluationError) as exc_info:
            numeric_jacobian(f, np.array([1.0, 0.0]))
        assert exc_info.value.coordinate == 1


class TestConfounderDraws:
    def test_second_moments(self):
        rng = RngStream(12)
        n = 200_000
        gamma1, gamma2, sigma = 1.7, -0.6, 0.75
        u, v = draw_bivariate_confounders(rng, n, sigma, gamma1, gamma2)
        se = 3.0 / math.sqrt(n)
        assert np.var(v) == pytest.approx(sigma**2, rel=8 * se)
        assert np.var(u) == pytest.approx(gamma1 * sigma**2, rel=8 * se)
        assert np.mean(u * v) == pytest.approx(gamma2 * sigma**2, abs=8 * se)

    def test_perfectly_correlated_case(self):
        rng = RngStream(13)
        u, v = draw_bivariate_confounders(rng, 1000, 0.5, 1.0, 1.0)
        np.testing.assert_allclose(u, v, atol=1e-12)
