"""Sweep engine: order fitting, verdicts, CSV emission."""

import csv
import math

import numpy as np
import pytest

from gfn_lab import asymptotics as asy
from gfn_lab.asymptotics import (SweepSeries, SweepSpec,
                                 counterexample_scenario, d1_form_test,
                                 emit_plotdata, fit_order, sweep,
                                 squared_mass_inner, write_sweep_csv)
from gfn_lab.basic_space import (Representative, embed_C, embed_sigma,
                                 sub)
from gfn_lab.diffeo import get_diffeo, identity_map, pullback_rep
from gfn_lab.distributions import DiracDerivative, smooth_density
from gfn_lab.test_objects import make_battery, perturbation_directions
from gfn_lab.testfunc import Box, DomainError, scale

OMEGA = Box.interval(-2.5, 2.5)
EPS = 2.0 ** -np.arange(2, 13, dtype=float)


def series_from(values, is_log=False, eps=None):
    e = EPS if eps is None else eps
    return SweepSeries("synthetic", 0, e[:len(values)], np.asarray(values),
                       is_log=is_log)


class TestFitOrder:
    def test_exact_quadratic_power_law(self):
        v = fit_order(series_from(EPS**2), fit_window=6)
        assert abs(v.slope - 2.0) <= 0.01
        assert v.kind == "power"

    def test_exact_inverse_power_law(self):
        v = fit_order(series_from(EPS**-1), fit_window=6)
        assert abs(v.slope + 1.0) <= 0.01
        assert v.moderate_N() == 1

    def test_zero_rows_are_infinite_order(self):
        v = fit_order(series_from(np.zeros_like(EPS)), fit_window=6)
        assert v.kind == "zero" and v.slope == math.inf
        assert v.negligible_for(10)

    def test_superpolynomial_growth(self):
        """exp(1/eps) in the log channel: local slope magnitude doubles per
        halving, an unbounded strictly increasing sequence."""
        log2_vals = (1.0 / EPS) / math.log(2)
        v = fit_order(series_from(log2_vals, is_log=True), fit_window=8)
        assert v.kind == "superpoly"
        mags = np.abs(v.local_slopes)
        assert np.all(np.diff(mags) > 0)
        assert not v.is_moderate

    def test_oscillating_prefactor_still_power(self):
        vals = EPS**2 * (1.5 + np.cos(np.arange(len(EPS))))
        v = fit_order(series_from(vals), fit_window=8)
        assert v.kind == "power"
        assert abs(v.slope - 2.0) <= 0.3

    def test_moderate_N_rounding(self):
        assert fit_order(series_from(EPS**-1), 6).moderate_N() == 1
        assert fit_order(series_from(EPS**0.1), 6).moderate_N() == 0
        assert fit_order(series_from(EPS**-2.5), 6).moderate_N() == 3


class TestSweep:
    def test_delta_table_rows(self, moll2_offset):
        """For small eps only the grid point x = 0 is inside the scaled
        support, so the row equals 2^i |phi(eps,0)(0)|."""
        bat = make_battery("full_path", 0, 1, seed=21, flavor="strict")
        spec = SweepSpec(i_min=2, i_max=12, K=np.linspace(-1, 1, 41),
                         alphas=(0,), fit_window=6)
        rep = embed_C(DiracDerivative(0), omega=OMEGA)
        ser = sweep(rep, bat[0], spec)[0]
        for j, e in enumerate(ser.eps):
            i = -math.log2(e)
            if i >= 6:
                expect = abs(bat[0](e, 0.0)(0.0)) / e
                assert ser.values[j] == pytest.approx(expect, rel=1e-12)

    def test_sigma_table_constant(self, moll0):
        bat = make_battery("full_path", 0, 1, seed=21)
        spec = SweepSpec(i_min=2, i_max=8, K=np.linspace(-1, 1, 21),
                         alphas=(0,), fit_window=4)
        ser = sweep(embed_sigma(np.sin, omega=OMEGA), bat[0], spec)[0]
        assert np.all(ser.values == ser.values[0])
        assert ser.values[0] == pytest.approx(np.sin(1.0), abs=1e-12)

    def test_domain_violation_names_point(self):
        from gfn_lab.diffeo import transform_test_object
        mu = get_diffeo("affine-2x", OMEGA)
        src = make_battery("full_path", 0, 1, seed=9, flavor="strict")[0]
        out, dom = transform_test_object(mu, src)
        spec = SweepSpec(i_min=2, i_max=8, K=np.linspace(-2.3, 2.3, 5),
                         alphas=(0,), fit_window=4)
        rep = embed_C(DiracDerivative(0), omega=OMEGA)
        with pytest.raises(DomainError, match="eps"):
            sweep(rep, out, spec)

    def test_workers_do_not_change_results(self):
        bat = make_battery("full_path", 0, 1, seed=21)
        rep = embed_C(DiracDerivative(0), omega=OMEGA)
        s1 = SweepSpec(i_min=2, i_max=8, K=np.linspace(-1, 1, 11),
                       alphas=(0,), fit_window=4, workers=1)
        s4 = SweepSpec(i_min=2, i_max=8, K=np.linspace(-1, 1, 11),
                       alphas=(0,), fit_window=4, workers=4)
        np.testing.assert_array_equal(sweep(rep, bat[0], s1)[0].values,
                                      sweep(rep, bat[0], s4)[0].values)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SweepSpec(i_min=1, i_max=10)
        with pytest.raises(ValueError):
            SweepSpec(i_min=2, i_max=22)
        with pytest.raises(ValueError):
            SweepSpec(i_min=2, i_max=10, fit_window=3)
        with pytest.raises(ValueError):
            SweepSpec(i_min=2, i_max=5, fit_window=6)


class TestModerateness:
    def test_delta_embedding_is_order_minus_one(self):
        bat = make_battery("full_path", 0, 2, seed=21)
        spec = SweepSpec(i_min=2, i_max=12, K=np.linspace(-1, 1, 21),
                         alphas=(0,), fit_window=6)
        rep = asy.test_moderate(embed_C(DiracDerivative(0), omega=OMEGA), bat, spec)
        assert rep.passed and rep.N == 1
        for v in rep.verdicts:
            assert abs(v.slope + 1.0) <= 0.05

    def test_sigma_is_order_zero(self):
        bat = make_battery("full_path", 0, 2, seed=21)
        spec = SweepSpec(i_min=2, i_max=12, K=np.linspace(-1, 1, 21),
                         alphas=(0,), fit_window=6)
        rep = asy.test_moderate(embed_sigma(np.sin, omega=OMEGA), bat, spec)
        assert rep.passed and rep.N == 0

    def test_identity_pullback_table_bit_identical(self):
        bat = make_battery("full_path", 0, 2, seed=21)
        spec = SweepSpec(i_min=2, i_max=10, K=np.linspace(-1, 1, 11),
                         alphas=(0,), fit_window=5)
        base = embed_C(DiracDerivative(0), omega=OMEGA)
        r1 = asy.test_moderate(base, bat, spec)
        r2 = asy.test_moderate(pullback_rep(identity_map(OMEGA), base), bat, spec)
        for s1, s2 in zip(r1.series, r2.series):
            np.testing.assert_array_equal(s1.values, s2.values)


class TestNegligibility:
    def test_zero_representative_witness_is_n(self):
        rep = Representative(lambda phi, x: 0.0, linear=True, omega=OMEGA)
        spec = SweepSpec(i_min=2, i_max=8, K=np.linspace(-1, 1, 5),
                         alphas=(0,), fit_window=4)

        def factory(kind, q):
            flavor = "strict" if kind == "strict" else "cm"
            return make_battery("full_path", q, 1, seed=3, flavor=flavor)

        out = asy.test_negligible(rep, [0, 1, 2], spec, factory)
        assert out.passed
        for n, entry in out.entries.items():
            assert entry.witness_q == n

    def test_embedding_defect_witnesses(self):
        """iota(f) - sigma(f) decays one order beyond the moment class."""
        diff = sub(embed_C(smooth_density("sin"), omega=OMEGA),
                   embed_sigma(np.sin, omega=OMEGA))
        spec = SweepSpec(i_min=2, i_max=9, K=np.linspace(-1, 1, 7),
                         alphas=(0,), fit_window=6)

        def factory(kind, q):
            flavor = "strict" if kind == "strict" else "cm"
            return make_battery("full_path", q, 2, seed=31 + q, flavor=flavor)

        out = asy.test_negligible(diff, [1, 2], spec, factory)
        assert out.passed
        assert out.entries[1].witness_q <= 1
        assert out.entries[2].witness_q <= 2


class TestD1Form:
    def test_linear_first_order_term(self):
        """For iota(delta), the k=1 term is the delta evaluation at the
        scaled direction: order -1."""
        bat = make_battery("static", 0, 2, seed=6)
        dirs = perturbation_directions(2, seed=5)
        spec = SweepSpec(i_min=2, i_max=10, K=np.linspace(-1, 1, 11),
                         alphas=(0,), fit_window=5)
        rep = d1_form_test(embed_C(DiracDerivative(0), omega=OMEGA), bat,
                           dirs, 1, spec)
        assert rep.passed and rep.N == 1
        k1 = [v for v in rep.verdicts if "|k1" in v.member_id]
        assert k1 and all(abs(v.slope + 1.0) <= 0.05 for v in k1)

    def test_k0_matches_static_sweep(self):
        bat = make_battery("static", 0, 1, seed=6)
        dirs = perturbation_directions(1, seed=5)
        spec = SweepSpec(i_min=2, i_max=10, K=np.linspace(-1, 1, 11),
                         alphas=(0,), fit_window=5)
        base = embed_C(DiracDerivative(0), omega=OMEGA)
        d1rep = d1_form_test(base, bat, dirs, 0, spec)
        direct = sweep(base, bat[0], spec)[0]
        k0 = [v for v in d1rep.verdicts if "|k0" in v.member_id][0]
        assert abs(k0.slope - fit_order(direct, 5).slope) <= 1e-12

    def test_sigma_higher_terms_vanish(self):
        bat = make_battery("static", 0, 1, seed=6)
        dirs = perturbation_directions(2, seed=5)
        spec = SweepSpec(i_min=2, i_max=10, K=np.linspace(-1, 1, 11),
                         alphas=(0,), fit_window=5)
        rep = d1_form_test(embed_sigma(np.sin, omega=OMEGA), bat, dirs, 2, spec)
        assert rep.passed and rep.N == 0
        for v in rep.verdicts:
            if "|k1" in v.member_id or "|k2" in v.member_id:
                assert v.kind == "zero"


class TestVerdictInvariance:
    """Moderateness verdicts survive the diffeomorphism action: the pulled
    back representative tests with the same N, and sweeping the original
    against the transformed battery reproduces it too."""

    @pytest.mark.parametrize("name", ["affine-2x", "sin-bend"])
    @pytest.mark.parametrize("dist,expected_N",
                             [("delta", 1), ("H", 0), ("sin", 0)])
    def test_same_N_after_pullback(self, name, dist, expected_N):
        from gfn_lab.diffeo import transform_test_object
        from gfn_lab.distributions import Heaviside
        w = {"delta": DiracDerivative(0), "H": Heaviside(),
             "sin": smooth_density("sin")}[dist]
        mu = get_diffeo(name, OMEGA)
        rep = embed_C(w, omega=OMEGA)
        bat = make_battery("full_path", 0, 2, seed=41, flavor="strict")
        K = np.linspace(-0.7, 0.7, 7)
        spec = SweepSpec(i_min=3, i_max=10, K=K, alphas=(0,), fit_window=5)

        base = asy.test_moderate(rep, bat, spec)
        assert base.passed and base.N == expected_N

        pulled = asy.test_moderate(pullback_rep(mu, rep), bat, spec)
        assert pulled.passed and pulled.N == expected_N

        trans_bat = []
        for path in bat:
            out, dom = transform_test_object(mu, path, compacts=[K])
            trans_bat.append(out)
        via_battery = asy.test_moderate(rep, trans_bat, spec)
        assert via_battery.passed and via_battery.N == expected_N


class TestCounterexample:
    def test_inner_scale_at_identity(self, moll0):
        """int |S_eps phi|^2 = eps^{-1} int |phi|^2."""
        inner = squared_mass_inner(4096)
        base = inner(moll0, 0.0)
        for eps in (0.5, 0.125, 2.0**-8):
            got = inner(scale(moll0, eps), 0.0)
            assert got == pytest.approx(base / eps, rel=1e-9)

    def test_full_scenario(self):
        mu = get_diffeo("sin-bend", OMEGA)
        src = make_battery("eps_path", 0, 1, seed=13)[0]
        eps_bat = make_battery("eps_path", 0, 2, seed=14)
        spec = SweepSpec(i_min=4, i_max=12, K=np.linspace(-1, 1, 7),
                         alphas=(1,), fit_window=9)
        rep = counterexample_scenario(mu, src, spec, eps_bat, quad_n=1024)
        assert rep.value_deviation == 0.0
        assert rep.untransformed.passed and rep.untransformed.N == 0
        assert rep.verdict.kind == "superpoly"
        assert rep.strictly_increasing
        assert rep.slope_ratio >= 10

    def test_affine_map_does_not_trigger(self):
        """An affine map keeps the transformed inner functional
        x-independent: the log-derivative table is identically empty of
        growth (zero kind), matching the class invariance of linear maps."""
        mu = get_diffeo("affine-2x", OMEGA)
        src = make_battery("eps_path", 0, 1, seed=13)[0]
        eps_bat = make_battery("eps_path", 0, 1, seed=14)
        spec = SweepSpec(i_min=4, i_max=12, K=np.linspace(-1, 1, 7),
                         alphas=(1,), fit_window=9)
        rep = counterexample_scenario(mu, src, spec, eps_bat, quad_n=1024)
        assert rep.verdict.kind == "zero"


class TestCSV:
    HEADER = ["epsilon", "alpha", "member_id", "sup_value_or_log",
              "local_slope"]

    def test_sweep_csv_schema_and_slopes(self, tmp_path):
        ser = series_from(EPS**2)
        p = tmp_path / "t.csv"
        write_sweep_csv(p, [ser])
        rows = list(csv.reader(open(p)))
        assert rows[0] == self.HEADER
        assert len(rows) == 1 + len(EPS)
        assert rows[1][4] == ""  # no slope for the first row
        assert float(rows[2][4]) == pytest.approx(2.0, abs=1e-12)

    def test_plotdata_reproduces_fit(self, tmp_path):
        ser = series_from(EPS**2)
        verdict = fit_order(ser, 6)
        p = tmp_path / "p.csv"
        emit_plotdata(p, [ser], [verdict])
        rows = list(csv.reader(open(p)))
        assert rows[0] == ["member_id", "alpha", "log2_eps", "log2_value",
                           "fit_slope", "fit_intercept"]
        assert float(rows[1][4]) == verdict.slope

    def test_empty_table_header_only(self, tmp_path):
        p = tmp_path / "e.csv"
        write_sweep_csv(p, [])
        rows = list(csv.reader(open(p)))
        assert rows == [self.HEADER]

    def test_byte_identical_rewrite(self, tmp_path):
        bat = make_battery("full_path", 0, 1, seed=21)
        spec = SweepSpec(i_min=2, i_max=9, K=np.linspace(-1, 1, 11),
                         alphas=(0,), fit_window=5)
        rep = embed_C(DiracDerivative(0), omega=OMEGA)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_sweep_csv(p1, sweep(rep, bat[0], spec))
        write_sweep_csv(p2, sweep(rep, bat[0], spec))
        assert open(p1, "rb").read() == open(p2, "rb").read()
