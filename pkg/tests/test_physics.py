import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from intracavity.fitting import FitError, least_squares_fit
from intracavity.physics import (RB87, CavityParams, LightShiftModel, SpeciesConstants, TrapSpectrum,
                                 TweezerBeam, cooperativity, coupling_at, fit_waist_from_frequencies,
                                 gaussian_intensity, oscillator_length, potential_depth,
                                 tensor_light_shift, transmission, trap_frequencies)

CAV = CavityParams()
TWO_PI = 2 * np.pi
HEAT_BEAM = TweezerBeam.circular(800.12e-9, 1.414e-6, 7.8e-6)

mp.mp.dps = 40


def mp_transmission(g_mhz, kappa=2.5, kappa_out=2.3, gamma=3.0):
    # rates in units of 2 pi MHz; the 2 pi factors cancel in the ratio
    k, ko, gm, g = (mp.mpf(v) for v in (kappa, kappa_out, gamma, g_mhz))
    return 4 * (k - ko) * ko * gm**2 / (gm * k + g**2) ** 2


def mp_depth(power, wavelength, waist):
    """Dipole potential evaluated constant by constant in 40-digit arithmetic."""
    c = mp.mpf("299792458")
    lam = mp.mpf(wavelength)
    w1 = 2 * mp.pi * c / mp.mpf("794.978851156e-9")
    w2 = 2 * mp.pi * c / mp.mpf("780.241209686e-9")
    w = 2 * mp.pi * c / lam
    gam = 2 * mp.pi * mp.mpf("6.0666e6")
    pref = lam**3 * gam / (16 * mp.pi**2 * c) * (1 / (w - w1) + 2 / (w - w2))
    inten = 2 * mp.mpf(power) / (mp.pi * mp.mpf(waist) ** 2)
    return abs(pref * inten)


class TestCavity:
    def test_defaults(self):
        assert CAV.g0 == pytest.approx(TWO_PI * 7.8e6)
        assert CAV.kappa_out < CAV.kappa
        assert CAV.lambda_c == 780e-9

    @pytest.mark.parametrize("kw", [dict(kappa_out=3e7), dict(kappa=-1.0), dict(gamma=0.0),
                                    dict(lambda_c=0.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            CavityParams(**kw)

    def test_transmission_matches_high_precision(self):
        assert transmission(0.0) == pytest.approx(float(mp_transmission(0)), rel=1e-12)
        assert transmission(CAV.g0) == pytest.approx(float(mp_transmission(7.8)), rel=1e-12)
        # values frozen from the 40-digit oracle
        assert float(mp_transmission(0)) == pytest.approx(0.2944, rel=1e-3)
        assert float(mp_transmission(7.8)) == pytest.approx(3.546e-3, rel=1e-3)

    def test_transmission_vanishes_for_single_sided_output(self):
        c = CavityParams(kappa_out=CAV.kappa)
        assert transmission(0.0, c) == 0.0

    def test_contrast(self):
        assert transmission(0.0) / transmission(CAV.g0) == pytest.approx(83.03, rel=1e-3)
        assert transmission(0.0) - transmission(CAV.g0) > 0.29

    def test_cooperativity(self):
        assert cooperativity(CAV) == pytest.approx(7.8**2 / (2.5 * 3), rel=1e-12)
        assert cooperativity(CavityParams(g0=0.0)) == 0.0
        assert cooperativity(CavityParams(g0=2 * CAV.g0)) == pytest.approx(4 * cooperativity(CAV))

    def test_coupling_examples(self):
        lam = CAV.lambda_c
        assert coupling_at(0.0) == 0.0
        assert coupling_at(lam / 4) == pytest.approx(CAV.g0, rel=1e-15)
        assert coupling_at(lam / 12) == pytest.approx(CAV.g0 / 2, rel=1e-12)

    @given(st.floats(-5e-6, 5e-6))
    def test_coupling_half_period_antisymmetry(self, y):
        a = coupling_at(y + CAV.lambda_c / 2)
        b = -coupling_at(y)
        assert a == pytest.approx(b, abs=1e-9 * CAV.g0)
        assert abs(coupling_at(y)) <= CAV.g0
        assert transmission(a) == pytest.approx(transmission(coupling_at(y)), rel=1e-7)

    @given(st.floats(0, 5e8), st.floats(0, 5e8))
    def test_transmission_decreasing_in_abs_g(self, g1, g2):
        lo, hi = sorted((g1, g2))
        assert transmission(hi) <= transmission(lo)
        assert transmission(-hi) == transmission(hi)
        assert 0 <= transmission(lo) < 1

    def test_transmission_strict_on_grid(self):
        g = np.linspace(0, 3 * CAV.g0, 1000)
        assert np.all(np.diff(transmission(g)) < 0)


class TestTrap:
    def test_species_defaults(self):
        assert RB87.lambda_d1 > RB87.lambda_d2
        with pytest.raises(ValueError):
            SpeciesConstants(mass=-1.0)

    def test_beam_validation(self):
        with pytest.raises(ValueError):
            TweezerBeam(waist_x=0.0)
        with pytest.raises(ValueError):
            potential_depth(1e-3, TweezerBeam(wavelength=785e-9))  # between the D lines
        assert TweezerBeam().effective_waist == pytest.approx(math.sqrt(1.28e-6 * 1.49e-6))

    def test_depth_zero_power(self):
        assert potential_depth(0.0, TweezerBeam()) == 0.0
        with pytest.raises(ValueError):
            potential_depth(-1e-3, TweezerBeam())

    def test_depth_matches_constant_by_constant_oracle(self):
        u = potential_depth(4.2e-3, HEAT_BEAM)
        ref = float(mp_depth("4.2e-3", "800.12e-9", "1.414e-6"))
        assert u == pytest.approx(ref, rel=1e-9)
        assert u / RB87.k_B == pytest.approx(3.956e-3, rel=1e-3)

    def test_depth_at_797nm_both_waists(self):
        # both waist readings land within 20 % of 1.76 mK per mW
        geo = potential_depth(1e-3, TweezerBeam()) / RB87.k_B
        fitted = potential_depth(1e-3, TweezerBeam.circular(797e-9, 1.414e-6, 7.8e-6)) / RB87.k_B
        assert geo == pytest.approx(2.028e-3, rel=1e-3)
        assert fitted == pytest.approx(1.935e-3, rel=1e-3)
        for v in (geo, fitted):
            assert abs(v / 1.76e-3 - 1) < 0.2
        # the 1.08 um design waist is far off
        design = potential_depth(1e-3, TweezerBeam.circular(797e-9, 1.08e-6, 7.8e-6)) / RB87.k_B
        assert abs(design / 1.76e-3 - 1) > 0.2

    def test_resonant_wavelength_rejected(self):
        # a D1-resonant species entry exercises the on-resonance guard
        sp = SpeciesConstants(lambda_d1=797e-9, lambda_d2=780e-9)
        with pytest.raises(ValueError):
            potential_depth(1e-3, TweezerBeam.circular(797e-9, 1.4e-6, 7.8e-6), sp)

    @pytest.mark.parametrize("p", [0.5e-3, 2e-3, 7e-3])
    def test_linear_in_power(self, p):
        base = trap_frequencies(1e-3, HEAT_BEAM)
        spec = trap_frequencies(p, HEAT_BEAM)
        ratio = p / 1e-3
        assert potential_depth(p, HEAT_BEAM) == pytest.approx(ratio * potential_depth(1e-3, HEAT_BEAM),
                                                              rel=1e-12)
        assert spec.nu_perp**2 == pytest.approx(ratio * base.nu_perp**2, rel=1e-12)
        assert spec.nu_par**2 == pytest.approx(ratio * base.nu_par**2, rel=1e-12)

    def test_trap_frequencies_reference_values(self):
        spec = trap_frequencies(4.2e-3, HEAT_BEAM)
        assert abs(spec.nu_perp / 137.5e3 - 1) < 0.01
        assert abs(spec.nu_par / 17.91e3 - 1) < 0.015
        # closed form from the oracle depth
        u = float(mp_depth("4.2e-3", "800.12e-9", "1.414e-6"))
        assert spec.nu_perp == pytest.approx(math.sqrt(4 * u / (RB87.mass * 1.414e-6**2)) / TWO_PI, rel=1e-9)

    def test_scaling_laws(self):
        a = trap_frequencies(1e-3, HEAT_BEAM)
        b = trap_frequencies(4e-3, HEAT_BEAM)
        assert b.nu_perp == pytest.approx(2 * a.nu_perp, rel=1e-12)
        assert b.nu_par == pytest.approx(2 * a.nu_par, rel=1e-12)
        # doubling the waist at fixed depth: the depth drops 4x, restore it with 4x power
        wide = TweezerBeam.circular(800.12e-9, 2 * 1.414e-6, 7.8e-6)
        c = trap_frequencies(4e-3, wide)
        assert potential_depth(4e-3, wide) == pytest.approx(potential_depth(1e-3, HEAT_BEAM), rel=1e-12)
        assert c.nu_perp == pytest.approx(a.nu_perp / 2, rel=1e-12)

    def test_spectrum_ordering(self):
        spec = trap_frequencies(1e-3, TweezerBeam())
        assert spec.nu_perp > spec.nu_par > 0
        with pytest.raises(ValueError):
            TrapSpectrum(-1.0, 1.0)
        with pytest.raises(ValueError):
            trap_frequencies(0.0, TweezerBeam())


class TestWaistFit:
    powers = np.linspace(0.6e-3, 4.2e-3, 8)

    def synthetic(self, w0=1.414e-6, zr=7.8e-6, rel_perp=0.0, rel_par=0.0, seed=0):
        rng = np.random.default_rng(seed)
        beam = TweezerBeam.circular(800.12e-9, w0, zr)
        rows = []
        for p in self.powers:
            s = trap_frequencies(p, beam)
            rows.append((p, s.nu_perp * (1 + rel_perp * rng.normal()),
                         s.nu_par * (1 + rel_par * rng.normal())))
        return rows

    def test_noiseless_round_trip(self):
        fit = fit_waist_from_frequencies(self.synthetic(), 800.12e-9)
        assert fit.waist == pytest.approx(1.414e-6, rel=1e-6)
        assert fit.rayleigh_range == pytest.approx(7.8e-6, rel=1e-6)
        assert fit.converged

    @given(st.floats(0.8e-6, 3e-6), st.floats(3e-6, 30e-6))
    def test_round_trip_identity(self, w0, zr):
        fit = fit_waist_from_frequencies(self.synthetic(w0, zr), 800.12e-9)
        assert fit.waist == pytest.approx(w0, rel=1e-6)
        assert fit.rayleigh_range == pytest.approx(zr, rel=1e-6)
        back = trap_frequencies(4.2e-3, TweezerBeam.circular(800.12e-9, fit.waist, fit.rayleigh_range))
        ref = trap_frequencies(4.2e-3, TweezerBeam.circular(800.12e-9, w0, zr))
        assert back.nu_perp == pytest.approx(ref.nu_perp, rel=1e-6)
        assert back.nu_par == pytest.approx(ref.nu_par, rel=1e-6)

    def test_realistic_noise(self):
        # 0.5 % / 1 % frequency read-out noise on eight powers
        rows = self.synthetic(rel_perp=0.005, rel_par=0.01, seed=11)
        sp = [0.005 * r[1] for r in rows]
        sl = [0.01 * r[2] for r in rows]
        fit = fit_waist_from_frequencies(rows, 800.12e-9, sigma_perp=sp, sigma_par=sl)
        assert abs(fit.waist - 1.414e-6) < 0.004e-6
        assert abs(fit.rayleigh_range - 7.8e-6) < 0.1e-6
        assert 0 < fit.waist_err < 0.004e-6
        assert 0 < fit.rayleigh_range_err < 0.1e-6

    def test_underdetermined(self):
        rows = self.synthetic()[:2]
        with pytest.raises(ValueError):
            fit_waist_from_frequencies(rows, 800.12e-9)
        with pytest.raises(ValueError):
            fit_waist_from_frequencies([rows[0]] * 4, 800.12e-9)

    def test_fit_error_reports_diagnostics(self):
        err = FitError("stalled", 1.5, 7)
        assert "1.5" in str(err) and "7 evaluations" in str(err)

    def test_engine_finite_difference_fallback(self):
        x = np.linspace(0, 1, 20)
        y = 3.0 * np.exp(-2.0 * x)
        out = least_squares_fit(lambda p: p[0] * np.exp(-p[1] * x) - y, [1.0, 1.0])
        assert out.converged
        assert out.params == pytest.approx([3.0, 2.0], rel=1e-6)


class TestLightShiftAndLengths:
    def test_tensor_shift(self):
        i = 10.0  # 1 mW/cm^2 in W/m^2
        assert tensor_light_shift(0, i) == 0.0
        assert tensor_light_shift(3, i) == tensor_light_shift(-3, i)
        assert tensor_light_shift(3, i) == pytest.approx(-284.4e3, rel=1e-12)
        assert LightShiftModel().tensor_coefficient < 0
        with pytest.raises(ValueError):
            tensor_light_shift(4, i)

    def test_oscillator_lengths(self):
        assert float(oscillator_length(17.91e3)) == pytest.approx(80.6e-9, rel=5e-3)
        assert float(oscillator_length(137.5e3)) == pytest.approx(29.08e-9, rel=5e-3)
        assert float(oscillator_length(4 * 17.91e3)) == pytest.approx(float(oscillator_length(17.91e3)) / 2,
                                                                      rel=1e-14)
        with pytest.raises(ValueError):
            oscillator_length(0.0)

    @given(st.floats(1.0, 1e7))
    def test_oscillator_identity(self, nu):
        ell = float(oscillator_length(nu))
        assert ell**2 * RB87.mass * TWO_PI * nu == pytest.approx(RB87.hbar, rel=1e-14)


class TestGaussianIntensity:
    beam = TweezerBeam()

    def test_peak_and_waist(self):
        p = 1e-3
        peak = 2 * p / (np.pi * self.beam.waist_x * self.beam.waist_y)
        assert gaussian_intensity(0, 0, 0, p, self.beam) == pytest.approx(peak, rel=1e-14)
        assert gaussian_intensity(self.beam.waist_x, 0, 0, p, self.beam) == pytest.approx(peak * np.exp(-2),
                                                                                          rel=1e-14)

    @pytest.mark.parametrize("z", [0.0, 7.8e-6])
    def test_power_integral(self, z):
        p = 2e-3
        lim = 12e-6
        val, _ = integrate.dblquad(lambda y, x: gaussian_intensity(x, y, z, p, self.beam),
                                   -lim, lim, -lim, lim, epsabs=1e-14, epsrel=1e-10)
        assert val == pytest.approx(p, rel=1e-7)

    def test_rayleigh_range_halves_peak(self):
        i0 = gaussian_intensity(0, 0, 0, 1e-3, self.beam)
        assert gaussian_intensity(0, 0, self.beam.rayleigh_range, 1e-3, self.beam) == pytest.approx(i0 / 2)
