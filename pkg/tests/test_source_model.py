import json
import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import gammaincc

import decoysafe as ds
from decoysafe import ParameterError, PreconditionError


class TestPoissonDistribution:
    def test_reference_coefficients_weak(self):
        d = ds.poisson_distribution(0.2)
        assert d.coeffs[0] == pytest.approx(0.818730753078, rel=1e-11)
        assert d.coeffs[1] == pytest.approx(0.163746150616, rel=1e-11)
        assert d.coeffs[2] == pytest.approx(0.0163746150616, rel=1e-11)

    def test_reference_coefficients_strong(self):
        d = ds.poisson_distribution(0.6)
        assert d.coeffs[0] == pytest.approx(0.548811636094, rel=1e-11)
        assert d.coeffs[1] == pytest.approx(0.329286981656, rel=1e-11)
        assert d.coeffs[2] == pytest.approx(0.0987860944969, rel=1e-11)

    @pytest.mark.parametrize("mu", [0.05, 0.2, 0.6, 1.7, 4.0])
    def test_matches_scipy_pmf(self, mu):
        d = ds.poisson_distribution(mu)
        ks = np.arange(d.cutoff + 1)
        np.testing.assert_allclose(d.coeffs, stats.poisson.pmf(ks, mu),
                                   rtol=1e-12, atol=0.0)

    @pytest.mark.parametrize("mu", [0.2, 0.6, 3.0])
    def test_tail_mass_matches_regularized_gamma(self, mu):
        d = ds.poisson_distribution(mu)
        # P(N > cutoff) for Poisson is the regularized lower gamma tail
        expected = 1.0 - gammaincc(d.cutoff + 1, mu)
        assert d.tail_mass == pytest.approx(expected, rel=1e-6, abs=1e-15)

    def test_mass_conservation(self):
        d = ds.poisson_distribution(0.6)
        assert math.fsum(d.coeffs) + d.tail_mass == pytest.approx(1.0, abs=1e-12)

    def test_custom_cutoff(self):
        d = ds.poisson_distribution(0.6, cutoff=5)
        assert d.cutoff == 5
        assert d.tail_mass > 0

    def test_rejects_bad_inputs(self):
        with pytest.raises(ParameterError):
            ds.poisson_distribution(0.0)
        with pytest.raises(ParameterError):
            ds.poisson_distribution(-0.2)
        with pytest.raises(ParameterError):
            ds.poisson_distribution(0.6, cutoff=1)

    def test_distribution_must_sum_to_one(self):
        with pytest.raises(ParameterError):
            ds.PhotonDistribution(coeffs=(0.5, 0.3))
        ds.PhotonDistribution(coeffs=(0.5, 0.3), tail_mass=0.2)


class TestCoherentBounds:
    def test_reference_extremes_one_percent(self):
        bd, bs = ds.coherent_bounds(ds.CoherentWindow.from_nominal(0.2, 0.01),
                                    ds.CoherentWindow.from_nominal(0.6, 0.05))
        assert bd.upper[1] == pytest.approx(0.165053175444, rel=1e-11)
        assert bs.lower[0] == pytest.approx(0.532591801007, rel=1e-11)

    def test_reference_extremes_uncertain_pair(self):
        bd, bs = ds.coherent_bounds(ds.CoherentWindow.from_nominal(0.2, 0.01),
                                    ds.CoherentWindow.from_nominal(0.6, 0.05))
        assert bd.upper[0] == pytest.approx(0.820369853138, rel=1e-11)
        assert bs.lower[1] == pytest.approx(0.322349500059, rel=1e-11)
        assert bs.lower[2] == pytest.approx(0.0918696075167, rel=1e-11)

    def test_zero_width_window_reduces_to_exact(self):
        bd, bs = ds.coherent_bounds(ds.CoherentWindow(0.2, 0.2),
                                    ds.CoherentWindow(0.6, 0.6))
        exact_d = ds.poisson_distribution(0.2, cutoff=bd.cutoff)
        exact_s = ds.poisson_distribution(0.6, cutoff=bs.cutoff)
        np.testing.assert_allclose(bd.lower, exact_d.coeffs, rtol=1e-14)
        np.testing.assert_allclose(bd.upper, exact_d.coeffs, rtol=1e-14)
        np.testing.assert_allclose(bs.lower, exact_s.coeffs, rtol=1e-14)
        np.testing.assert_allclose(bs.upper, exact_s.coeffs, rtol=1e-14)

    def test_interior_peak_beats_endpoints(self):
        # window straddles the maximizer x = 1 of x e^{-x}
        bd, _ = ds.coherent_bounds(ds.CoherentWindow(0.9, 1.1),
                                   ds.CoherentWindow(2.0, 2.0))
        assert bd.upper[1] == pytest.approx(math.exp(-1.0), rel=1e-14)
        assert bd.upper[1] > max(0.9 * math.exp(-0.9), 1.1 * math.exp(-1.1))

    def test_bounds_bracket_interior_intensities(self):
        window = ds.CoherentWindow(0.5, 0.7)
        bd, _ = ds.coherent_bounds(window, ds.CoherentWindow(1.0, 1.0))
        for mu in np.linspace(0.5, 0.7, 21):
            d = ds.poisson_distribution(float(mu), cutoff=bd.cutoff)
            for k in range(bd.cutoff + 1):
                assert bd.lower[k] <= d.coeffs[k] + 1e-15
                assert d.coeffs[k] <= bd.upper[k] + 1e-15

    def test_bounded_distribution_validation(self):
        with pytest.raises(ParameterError):
            ds.BoundedDistribution(lower=(0.1, 0.2), upper=(0.2, 0.3))
        with pytest.raises(ParameterError):
            ds.BoundedDistribution(lower=(0.3, 0.2, 0.1), upper=(0.2, 0.3, 0.2))

    def test_window_validation(self):
        with pytest.raises(ParameterError):
            ds.CoherentWindow(0.0, 0.5)
        with pytest.raises(ParameterError):
            ds.CoherentWindow(0.5, 0.4)
        with pytest.raises(ParameterError):
            ds.CoherentWindow.from_nominal(0.2, 1.0)


class TestOrderingConditions:
    def test_poisson_pair_holds(self, poisson_pair):
        dec, sig = poisson_pair
        rep = ds.check_condition_14(dec, sig)
        assert rep.holds and rep.first_violating_k is None

    def test_swapped_pair_fails_at_two(self):
        dec = ds.poisson_distribution(0.6)
        sig = ds.poisson_distribution(0.2)
        rep = ds.check_condition_14(dec, sig)
        assert rep == (False, 2)

    def test_interval_version_swapped_fails_at_two(self):
        bd, bs = ds.coherent_bounds(ds.CoherentWindow(0.6, 0.6),
                                    ds.CoherentWindow(0.2, 0.2))
        rep = ds.check_condition_53(bd, bs)
        assert rep == (False, 2)

    def test_narrow_windows_hold(self):
        bd, bs = ds.coherent_bounds(ds.CoherentWindow.from_nominal(0.2, 0.01),
                                    ds.CoherentWindow.from_nominal(0.6, 0.01))
        assert ds.check_condition_53(bd, bs).holds

    def test_very_wide_windows_fail(self):
        bd, bs = ds.coherent_bounds(ds.CoherentWindow.from_nominal(0.2, 0.9),
                                    ds.CoherentWindow.from_nominal(0.6, 0.9))
        assert not ds.check_condition_53(bd, bs).holds

    def test_zero_width_agrees_with_exact_condition(self, poisson_pair):
        dec, sig = poisson_pair
        rep53 = ds.check_condition_53(ds.BoundedDistribution.from_exact(dec),
                                      ds.BoundedDistribution.from_exact(sig))
        rep14 = ds.check_condition_14(dec, sig)
        assert rep53 == rep14

    def test_k_max_validation(self, poisson_pair):
        dec, sig = poisson_pair
        with pytest.raises(ParameterError):
            ds.check_condition_14(dec, sig, k_max=1)
        with pytest.raises(ParameterError):
            ds.check_condition_14(dec, sig, k_max=10**6)


class TestErrorPatterns:
    def test_exact_pattern_constant(self):
        p = ds.exact_pattern(0.2, 0.6)
        assert ds.pattern_intensity(p, 0) == (0.2, 0.6)
        assert ds.pattern_intensity(p, 10**9) == (0.2, 0.6)

    def test_two_block_alternation(self):
        p = ds.two_block_pattern(0.2, 0.6, 0.1, 3)
        mus = [ds.pattern_intensity(p, i)[0] for i in range(9)]
        expect = [0.22, 0.22, 0.22, 0.18, 0.18, 0.18, 0.22, 0.22, 0.22]
        assert mus == pytest.approx(expect)

    def test_two_block_same_sign_both_sources(self):
        p = ds.two_block_pattern(0.2, 0.6, 0.1, 4)
        mu_arr, mup_arr = p.intensity_arrays(0, 16)
        strengthened = mu_arr > 0.2
        np.testing.assert_array_equal(strengthened, mup_arr > 0.6)

    def test_two_block_extremes_single_block(self):
        p = ds.two_block_pattern(0.2, 0.6, 0.1, 1000)
        # run shorter than one block never visits the weakened half
        assert ds.pattern_extremes(p, 800) == pytest.approx((0.22, 0.22, 0.66, 0.66))
        assert ds.pattern_extremes(p, 5000) == pytest.approx((0.18, 0.22, 0.54, 0.66))

    def test_per_pulse_pattern(self):
        p = ds.per_pulse_pattern([(0.2, 0.6), (0.21, 0.63)])
        assert p.length == 2
        assert ds.pattern_intensity(p, 1) == (0.21, 0.63)
        with pytest.raises(ParameterError):
            ds.pattern_intensity(p, 2)

    def test_custom_pattern_roundtrip(self):
        def cb(i):
            phase = 1.0 + 0.05 * np.sin(i.astype(float))
            return 0.2 * phase, 0.6 * phase
        p = ds.custom_pattern(cb)
        mu_arr, mup_arr = p.intensity_arrays(5, 8)
        assert mu_arr[0] == pytest.approx(0.2 * (1 + 0.05 * math.sin(5.0)))
        assert mup_arr.shape == (3,)

    def test_constructor_validation(self):
        with pytest.raises(ParameterError):
            ds.two_block_pattern(0.2, 0.6, 0.0, 10)
        with pytest.raises(ParameterError):
            ds.two_block_pattern(0.2, 0.6, 1.0, 10)
        with pytest.raises(ParameterError):
            ds.two_block_pattern(0.2, 0.6, 0.1, 0)
        with pytest.raises(ParameterError):
            ds.per_pulse_pattern([])

    def test_containment_check(self):
        p = ds.two_block_pattern(0.2, 0.6, 0.1, 10)
        ok_d = ds.CoherentWindow.from_nominal(0.2, 0.1)
        ok_s = ds.CoherentWindow.from_nominal(0.6, 0.1)
        ds.require_pattern_in_windows(p, ok_d, ok_s, 100)
        narrow_d = ds.CoherentWindow.from_nominal(0.2, 0.05)
        with pytest.raises(PreconditionError):
            ds.require_pattern_in_windows(p, narrow_d, ok_s, 100)


class TestSourceJson:
    def test_window_document_roundtrip(self):
        dw = ds.CoherentWindow.from_nominal(0.2, 0.02)
        sw = ds.CoherentWindow.from_nominal(0.6, 0.02)
        doc = json.loads(json.dumps(ds.source_model.windows_to_json(dw, sw, cutoff=12)))
        bd, bs = ds.source_model.bounded_pair_from_json(doc)
        bd2, bs2 = ds.coherent_bounds(dw, sw, cutoff=12)
        assert bd == bd2 and bs == bs2

    def test_explicit_interval_document(self):
        dec = ds.poisson_distribution(0.2, cutoff=6)
        sig = ds.poisson_distribution(0.6, cutoff=6)
        doc = {"decoy": {"lower": list(dec.coeffs), "upper": list(dec.coeffs)},
               "signal": {"lower": list(sig.coeffs), "upper": list(sig.coeffs)}}
        bd, bs = ds.source_model.bounded_pair_from_json(doc)
        assert bd == ds.BoundedDistribution.from_exact(dec)
        assert bs == ds.BoundedDistribution.from_exact(sig)

    def test_malformed_document(self):
        with pytest.raises(ParameterError):
            ds.source_model.bounded_pair_from_json({"decoy": {}})
