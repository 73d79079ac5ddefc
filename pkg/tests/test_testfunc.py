"""Test functions, quadrature and moments.

Derived expectations are frozen from independent oracles (numpy trapezoid
on its own grids), never from the code paths under test.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gfn_lab.testfunc import (MollifierError, MomentSpec, QuadratureGrid,
                              build_mollifier, derivative_moment, moment,
                              moments_upto, satisfies_moment_spec, scale,
                              tf_lincomb, translate)

from conftest import oracle_trapezoid

RNG = np.random.default_rng(0)


class TestBuildMollifier:
    def test_q0_unit_mass(self, moll0):
        """Normalized standard bump: mass 1 within 1e-12."""
        assert abs(moll0.mass() - 1.0) <= 1e-12
        oracle = oracle_trapezoid(moll0.fn, -1.0, 1.0, 8192)
        assert abs(oracle - 1.0) <= 1e-12

    def test_q2_vanishing_moments_vs_oracle(self, moll2):
        """m1, m2 vanish to 1e-10, confirmed by an oracle at doubled nodes."""
        for k in (1, 2):
            mk = moment(moll2, k)
            assert abs(mk) <= 1e-10
            oracle = oracle_trapezoid(lambda x, k=k: x**k * moll2.fn(x),
                                      -1.0, 1.0, 8192)
            assert abs(oracle - mk) <= 1e-11

    def test_q2_changes_sign(self, moll2):
        """Unit mass with vanishing second moment forces negativity."""
        xs = np.linspace(-1.0, 1.0, 2001)
        vals = moll2.fn(xs)
        assert vals.min() < -1e-3 and vals.max() > 0.0

    @pytest.mark.parametrize("q", [1, 2, 3, 4, 5, 6])
    def test_moment_spec_up_to_q6(self, q):
        phi = build_mollifier(q)
        ok, report = satisfies_moment_spec(phi, MomentSpec(q, 1e-10))
        assert ok, report

    def test_ill_conditioned_rejected(self):
        with pytest.raises(MollifierError, match="q=24"):
            build_mollifier(24)

    def test_two_dimensional(self):
        phi = build_mollifier(1, s=2, radius=1.0, n=256)
        assert abs(phi.mass(n=256) - 1.0) <= 1e-10
        assert abs(moment(phi, (1, 0), n=256)) <= 1e-10
        assert abs(moment(phi, (0, 1), n=256)) <= 1e-10

    def test_quadrature_grid_validation(self):
        with pytest.raises(ValueError):
            QuadratureGrid(100)
        with pytest.raises(ValueError):
            QuadratureGrid(32)
        QuadratureGrid(64)

    def test_quadrature_grid_usable_in_moment(self, moll2):
        direct = moment(moll2, 2, n=1024)
        via_grid = moment(moll2, 2, n=QuadratureGrid(1024))
        assert direct == via_grid

    def test_moment_order_cap(self, moll2):
        with pytest.raises(ValueError):
            moment(moll2, 17)
        moment(moll2, 16)


class TestMoment:
    def test_first_moment_of_even_function_vanishes(self, moll2):
        assert abs(moment(moll2, 1)) <= 1e-12

    def test_third_moment_symmetric_q2_is_zero(self, moll2):
        # even symmetry kills every odd moment of the centered construction
        assert abs(moment(moll2, 3)) <= 1e-12

    def test_third_moment_offset_q2_nonzero(self, moll2_offset):
        """The center-offset A_2 member has |m3| > 1e-3; this constant
        drives the order-(q+1) embedding error."""
        m3 = moment(moll2_offset, 3)
        assert abs(m3) > 1e-3
        lo, hi = moll2_offset.box
        oracle = oracle_trapezoid(lambda x: x**3 * moll2_offset.fn(x),
                                  lo[0], hi[0], 8192)
        assert m3 == pytest.approx(oracle, abs=1e-11)
        assert m3 == pytest.approx(-0.046888, abs=1e-4)

    @pytest.mark.parametrize("alpha", range(0, 9))
    def test_doubling_convergence(self, moll2, alpha):
        """Boundary flatness makes the trapezoid rule super-algebraic."""
        val, err = moment(moll2, alpha, return_error=True)
        assert err <= 1e-11

    def test_moments_upto_matches_single_calls(self, moll2_offset):
        ms = moments_upto(moll2_offset, 5)
        for a in range(6):
            assert ms[a] == pytest.approx(moment(moll2_offset, a), abs=1e-14)

    def test_translated_first_moment(self, moll2_offset):
        """m1(phi(.-x)) = m1 + x*m0."""
        for x in (-0.4, 0.3, 1.1):
            shifted = translate(moll2_offset, x)
            expect = moment(moll2_offset, 1) + x * moment(moll2_offset, 0)
            assert moment(shifted, 1) == pytest.approx(expect, abs=1e-10)


class TestDerivativeMoment:
    def test_by_parts_identity(self, moll2_offset):
        got = derivative_moment(moll2_offset, 2, 1)
        assert got == pytest.approx(-2.0 * moment(moll2_offset, 1), abs=1e-14)

    def test_degree_exhausted_is_exact_zero(self, moll2):
        assert derivative_moment(moll2, 1, 2) == 0.0

    def test_on_strict_mollifier(self, moll2):
        # beta=2, gamma=1 reduces to -2 m1, which the construction kills
        assert abs(derivative_moment(moll2, 2, 1)) <= 2e-10

    def test_against_numerical_differentiation(self, moll2_offset):
        """Cross-check the exact reduction against quadrature of a centrally
        differenced evaluator (step 1e-5)."""
        h = 1e-5
        lo, hi = moll2_offset.box
        for beta, gamma in ((1, 1), (2, 1), (3, 2)):
            def integrand(x):
                d = moll2_offset.fn(x + h) - moll2_offset.fn(x - h)
                if gamma == 2:
                    d = (moll2_offset.fn(x + h) - 2 * moll2_offset.fn(x)
                         + moll2_offset.fn(x - h)) / h**2
                else:
                    d = d / (2 * h)
                return x**beta * d
            oracle = oracle_trapezoid(integrand, lo[0] - 2 * h, hi[0] + 2 * h,
                                      65536)
            got = derivative_moment(moll2_offset, beta, gamma)
            assert got == pytest.approx(oracle, abs=1e-6)


class TestScale:
    def test_identity_at_one(self, moll2):
        assert scale(moll2, 1.0) is moll2

    def test_pointwise_definition(self, moll2):
        sp = scale(moll2, 0.5)
        assert sp(0.3) == 2.0 * moll2(0.6)

    def test_out_of_range_rejected(self, moll2):
        with pytest.raises(ValueError):
            scale(moll2, 1.5)
        with pytest.raises(ValueError):
            scale(moll2, 0.0)

    @settings(max_examples=20, deadline=None)
    @given(eps=st.floats(min_value=0.05, max_value=1.0))
    def test_mass_invariant_under_scaling(self, moll2, eps):
        assert moment(scale(moll2, eps), 0) == pytest.approx(1.0, abs=1e-10)

    @settings(max_examples=15, deadline=None)
    @given(eps=st.floats(min_value=0.1, max_value=1.0),
           alpha=st.integers(min_value=0, max_value=4))
    def test_moment_scaling_law(self, moll2_offset, eps, alpha):
        """m_alpha(S_eps phi) = eps^alpha m_alpha(phi)."""
        lhs = moment(scale(moll2_offset, eps), alpha)
        rhs = eps**alpha * moment(moll2_offset, alpha)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-13)

    def test_radius_and_center_scale(self, moll2_offset):
        sp = scale(moll2_offset, 0.25)
        assert sp.radius == moll2_offset.radius * 0.25
        assert sp.center[0] == moll2_offset.center[0] * 0.25


class TestTranslate:
    def test_zero_shift_is_identity(self, moll2):
        assert translate(moll2, 0.0) is moll2

    def test_round_trip_returns_original_object(self, moll2):
        assert translate(translate(moll2, 0.7), -0.7) is moll2

    def test_pointwise_definition(self, moll2):
        t = translate(moll2, 0.4)
        xs = RNG.uniform(-1.5, 1.5, 64)
        np.testing.assert_array_equal(t.fn(xs), moll2.fn(xs - 0.4))


class TestSupport:
    def test_exterior_points_exactly_zero(self, moll2, moll2_offset):
        """1000 random points outside the support ball evaluate to 0."""
        battery = [moll2, moll2_offset, scale(moll2, 0.3),
                   translate(moll2_offset, 1.2),
                   tf_lincomb([1.0, -0.5], [moll2, moll2_offset])]
        for tf in battery:
            c, r = tf.center[0], tf.radius
            signs = RNG.choice([-1.0, 1.0], 1000)
            pts = c + signs * (r + RNG.uniform(0.0, 3.0, 1000))
            assert np.all(tf.fn(pts) == 0.0)

    def test_derivative_keeps_support(self, moll2):
        d = moll2.derivative()
        assert d(1.5) == 0.0 and d(-2.0) == 0.0

    def test_exact_derivative_matches_finite_differences(self, moll2_offset):
        d = moll2_offset.derivative()
        xs = RNG.uniform(-0.8, 1.1, 32)
        h = 1e-6
        fd = (moll2_offset.fn(xs + h) - moll2_offset.fn(xs - h)) / (2 * h)
        np.testing.assert_allclose(d.fn(xs), fd, atol=5e-7)
