"""Special functions: incomplete gamma, exponential integral, ergodic rate and its inverse."""

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from ccl.special import (
    LOG2E,
    ErgodicRateSpec,
    _ergodic_I_closed,
    _ergodic_I_quadrature,
    ergodic_I,
    ergodic_I_array,
    exp_integral,
    incomplete_gamma,
    inverse_qlb,
    inverse_qlb_array,
    poisson_partial,
    qlb_rate,
)
from oracles import expected_log1p

MU_GRID = np.logspace(-3, 3, 49)


class TestPoissonPartial:
    def test_zero_argument(self):
        assert poisson_partial(4, 0.0) == 1.0

    @pytest.mark.parametrize("n", [1, 2, 5, 8])
    @pytest.mark.parametrize("x", [-50.0, -7.5, -1.0, 0.3, 2.0, 20.0, 50.0])
    def test_matches_extended_precision(self, n, x):
        with mp.workdps(50):
            ref = mp.e ** (-x) * mp.fsum(mp.mpf(x) ** i / mp.factorial(i) for i in range(n))
        np.testing.assert_allclose(poisson_partial(n, x), float(ref), rtol=1e-13)

    def test_vanishes_for_large_x(self):
        assert poisson_partial(3, 800.0) == 0.0

    def test_rejects_empty_sum(self):
        with pytest.raises(ValueError):
            poisson_partial(0, 1.0)


class TestExpIntegral:
    @pytest.mark.parametrize("n", [1, 2, 3, 7])
    @pytest.mark.parametrize("x", [1e-6, 0.1, 0.9, 1.0, 1.1, 5.0, 40.0, 600.0])
    def test_matches_mpmath(self, n, x):
        np.testing.assert_allclose(exp_integral(n, x), float(mp.expint(n, x)), rtol=1e-13)

    def test_zero_argument(self):
        assert exp_integral(3, 0.0) == 0.5
        with pytest.raises(ValueError):
            exp_integral(1, 0.0)

    def test_limits_and_domain(self):
        assert exp_integral(2, math.inf) == 0.0
        with pytest.raises(ValueError):
            exp_integral(1, -1.0)
        with pytest.raises(ValueError):
            exp_integral(0, 1.0)


class TestIncompleteGamma:
    def test_complete_limit(self):
        assert incomplete_gamma(4, math.inf, "lower") == pytest.approx(6.0, rel=1e-15)
        assert incomplete_gamma(4, 0.0, "upper") == pytest.approx(6.0, rel=1e-15)

    def test_half_order_against_quadrature(self):
        ref, _ = integrate.quad(lambda t: t**-0.5 * math.exp(-t), 1.0, math.inf, epsabs=0, epsrel=1e-13)
        np.testing.assert_allclose(incomplete_gamma(0.5, 1.0), ref, rtol=1e-12)
        np.testing.assert_allclose(incomplete_gamma(0.5, 1.0), 0.2788056, atol=5e-8)

    @pytest.mark.parametrize("s", [-2.5, -1.0, -0.4667, 0.0, 0.3, 1.0, 2.9333, 3.5])
    @pytest.mark.parametrize("x", [1e-3, 0.5, 1.0, 3.0, 12.0, 80.0])
    def test_upper_matches_mpmath(self, s, x):
        np.testing.assert_allclose(incomplete_gamma(s, x), float(mp.gammainc(s, x, mp.inf)), rtol=1e-12)

    @pytest.mark.parametrize("s", [0.3, 1.0, 2.5, 4.0, 7.2])
    @pytest.mark.parametrize("x", [1e-3, 0.5, 3.0, 12.0, 80.0])
    def test_lower_matches_mpmath(self, s, x):
        np.testing.assert_allclose(incomplete_gamma(s, x, "lower"), float(mp.gammainc(s, 0, x)), rtol=1e-12)

    @given(s=st.floats(0.05, 12.0), x=st.floats(0.0, 60.0))
    @settings(max_examples=200, deadline=None)
    def test_upper_plus_lower_is_complete(self, s, x):
        total = incomplete_gamma(s, x) + incomplete_gamma(s, x, "lower")
        assert total == pytest.approx(math.gamma(s), rel=1e-12)

    @given(s=st.floats(-2.0, 6.0), x=st.floats(1e-3, 50.0))
    @settings(max_examples=200, deadline=None)
    def test_recurrence(self, s, x):
        lhs = incomplete_gamma(s + 1, x)
        rhs = s * incomplete_gamma(s, x) + x**s * math.exp(-x)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-300)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            incomplete_gamma(1.0, -1.0)
        with pytest.raises(ValueError):
            incomplete_gamma(-1.0, 1.0, "lower")
        with pytest.raises(ValueError):
            incomplete_gamma(0.0, 0.0)
        with pytest.raises(ValueError):
            incomplete_gamma(1.0, 1.0, "middle")


class TestErgodicI:
    def test_exponential_case(self):
        # M = 1: E[ln(1 + G)] = e E_1(1)
        np.testing.assert_allclose(ergodic_I(1, 1.0), 0.5963474, atol=5e-8)
        np.testing.assert_allclose(ergodic_I(1, 1.0), math.e * float(mp.e1(1)), rtol=1e-14)

    def test_seven_dof_against_quadrature(self):
        ref, _ = integrate.quad(
            lambda g: math.log1p(0.5 * g) * g**6 * math.exp(-g) / math.factorial(6), 0, math.inf, epsrel=1e-13
        )
        np.testing.assert_allclose(ergodic_I(7, 0.5), ref, rtol=1e-8)

    def test_vanishes_at_zero_snr(self):
        assert ergodic_I(1, 1e-12) == pytest.approx(1e-12, rel=1e-6)

    @pytest.mark.parametrize("M", range(1, 9))
    def test_full_grid_against_oracle(self, M):
        got = np.array([ergodic_I(M, mu) for mu in MU_GRID])
        ref = np.array([expected_log1p(M, mu) for mu in MU_GRID])
        np.testing.assert_allclose(got, ref, rtol=1e-8)

    @pytest.mark.parametrize("M", range(1, 9))
    def test_branches_agree_on_overlap(self, M):
        for mu in np.linspace(0.05, 2.0, 40):
            np.testing.assert_allclose(_ergodic_I_closed(M, mu), _ergodic_I_quadrature(M, mu), rtol=1e-8)

    def test_strictly_increasing(self):
        values = np.array([[ergodic_I(M, mu) for mu in MU_GRID] for M in range(1, 9)])
        assert np.all(np.diff(values, axis=1) > 0)
        assert np.all(np.diff(values, axis=0) > 0)

    @pytest.mark.parametrize("M", [1, 5, 8])
    def test_vectorized_matches_scalar(self, M):
        mu = np.logspace(-4, 4, 200)
        np.testing.assert_allclose(ergodic_I_array(M, mu), [ergodic_I(M, m) for m in mu], rtol=1e-8)

    def test_domain(self):
        with pytest.raises(ValueError):
            ergodic_I(2, 0.0)
        with pytest.raises(ValueError):
            ergodic_I(0, 1.0)
        with pytest.raises(ValueError):
            ergodic_I_array(2, [1.0, -1.0])


class TestQlbRate:
    def test_bits_conversion(self):
        np.testing.assert_allclose(qlb_rate(1, 1.0), 0.5963474 * LOG2E, atol=1e-7)
        assert qlb_rate(1, 1.0) == pytest.approx(0.8603, abs=1e-4)

    def test_monotone(self):
        assert qlb_rate(7, 2.0) > qlb_rate(7, 1.0)

    def test_domain(self):
        with pytest.raises(ValueError):
            qlb_rate(3, 0.0)

    @pytest.mark.parametrize("M", range(1, 9))
    @pytest.mark.parametrize("R", [0.5, 1.0, 2.0, 4.0])
    def test_inverse_roundtrip(self, M, R):
        assert qlb_rate(M, inverse_qlb(M, R)) == pytest.approx(R, rel=1e-10)

    def test_inverse_at_unit_snr(self):
        assert inverse_qlb(7, qlb_rate(7, 1.0)) == pytest.approx(1.0, abs=1e-10)

    def test_inverse_edges(self):
        assert inverse_qlb(3, 0.0) == 0.0
        assert inverse_qlb(3, math.inf) == math.inf
        with pytest.raises(ValueError):
            inverse_qlb(3, -0.1)
        rates = [1e-3, 0.1, 1.0, 5.0, 12.0]
        rho = [inverse_qlb(5, r) for r in rates]
        assert np.all(np.diff(rho) > 0)

    @pytest.mark.parametrize("M", [1, 5, 8])
    def test_vectorized_inverse(self, M):
        R = np.array([0.0, 1e-3, 0.05, 0.5, 1.0, 3.0, 8.0, 12.0, np.inf])
        got = inverse_qlb_array(M, R)
        ref = [inverse_qlb(M, r) for r in R]
        np.testing.assert_allclose(got, ref, rtol=1e-9)

    def test_rate_spec(self):
        spec = ErgodicRateSpec.from_antennas(8, 4)
        assert spec.dof_M == 5
        assert spec.rate(spec.inverse(1.3)) == pytest.approx(1.3, rel=1e-10)
        with pytest.raises(ValueError):
            ErgodicRateSpec(0)
