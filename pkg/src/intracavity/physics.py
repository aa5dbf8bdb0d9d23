"""Closed-form cavity-QED and dipole-trap formulas.

All stored rates are angular frequencies (rad/s); lengths are in metres and
powers in watts.  Trap frequencies in :class:`TrapSpectrum` are ordinary
frequencies (Hz), as they are measured.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import constants as csts

from .fitting import FitError, least_squares_fit

TWO_PI = 2.0 * np.pi

# 87Rb D-line data, D.A. Steck, "Rubidium 87 D Line Data" (rev. 2.2.2).
RB87_MASS = 1.443160648e-25  # kg
RB87_LAMBDA_D1 = 794.978851156e-9  # m
RB87_LAMBDA_D2 = 780.241209686e-9  # m
RB87_GAMMA_D2 = TWO_PI * 6.0666e6  # rad/s, natural linewidth of D2

MW_PER_CM2 = 10.0  # W/m^2


@dataclass(frozen=True)
class CavityParams:
    g0: float = TWO_PI * 7.8e6
    kappa: float = TWO_PI * 2.5e6
    kappa_out: float = TWO_PI * 2.3e6
    gamma: float = TWO_PI * 3.0e6
    lambda_c: float = 780e-9
    mode_waist: float = 29e-6
    finesse: float = 61000.0

    def __post_init__(self):
        for name in ("kappa", "kappa_out", "gamma", "lambda_c", "mode_waist", "finesse"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.g0 < 0:
            raise ValueError(f"g0 must be nonnegative, got {self.g0!r}")
        if self.kappa_out > self.kappa:
            raise ValueError("kappa_out cannot exceed kappa")


@dataclass(frozen=True)
class SpeciesConstants:
    mass: float = RB87_MASS
    gamma_d2: float = RB87_GAMMA_D2
    lambda_d1: float = RB87_LAMBDA_D1
    lambda_d2: float = RB87_LAMBDA_D2
    k_B: float = csts.k
    hbar: float = csts.hbar
    c_light: float = csts.c

    def __post_init__(self):
        for name in ("mass", "gamma_d2", "lambda_d1", "lambda_d2", "k_B", "hbar", "c_light"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.lambda_d1 > self.lambda_d2:
            raise ValueError("expected lambda_d1 > lambda_d2")


RB87 = SpeciesConstants()


@dataclass(frozen=True)
class TweezerBeam:
    """Elliptical Gaussian tweezer focus.  Defaults are the measured waists."""

    wavelength: float = 797e-9
    waist_x: float = 1.28e-6
    waist_y: float = 1.49e-6
    rayleigh_range: float = 7.8e-6

    def __post_init__(self):
        for name in ("wavelength", "waist_x", "waist_y", "rayleigh_range"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def circular(cls, wavelength: float, waist: float, rayleigh_range: float) -> "TweezerBeam":
        return cls(wavelength, waist, waist, rayleigh_range)

    @property
    def effective_waist(self) -> float:
        """Geometric mean of the two waists, used wherever a round beam is assumed."""
        return float(np.sqrt(self.waist_x * self.waist_y))


@dataclass(frozen=True)
class TrapSpectrum:
    nu_perp: float
    nu_par: float

    def __post_init__(self):
        if not (self.nu_perp > 0 and self.nu_par > 0):
            raise ValueError("trap frequencies must be positive")


@dataclass(frozen=True)
class LightShiftModel:
    # -31.6 kHz * mF^2 per mW/cm^2 of tweezer intensity
    tensor_coefficient: float = -31.6e3 / MW_PER_CM2  # Hz per (W/m^2)


def coupling_at(y, cavity: CavityParams = CavityParams()):
    """Atom-cavity coupling g0*sin(2*pi*y/lambda_c) at axial position ``y``."""
    return cavity.g0 * np.sin(TWO_PI * np.asarray(y, dtype=float) / cavity.lambda_c)


def transmission(g, cavity: CavityParams = CavityParams()):
    """Resonant steady-state cavity transmission with an atom coupled at ``g``."""
    k, ko, gm = cavity.kappa, cavity.kappa_out, cavity.gamma
    g2 = np.square(np.asarray(g, dtype=float))
    return 4.0 * (k - ko) * ko * gm**2 / (gm * k + g2) ** 2


def cooperativity(cavity: CavityParams = CavityParams()) -> float:
    return cavity.g0**2 / (cavity.kappa * cavity.gamma)


def _detunings(wavelength: float, species: SpeciesConstants):
    c = species.c_light
    omega = TWO_PI * c / wavelength
    d1 = omega - TWO_PI * c / species.lambda_d1
    d2 = omega - TWO_PI * c / species.lambda_d2
    if d1 == 0 or d2 == 0:
        raise ValueError(f"tweezer wavelength {wavelength!r} m sits on a resonance line")
    return d1, d2


def _depth_prefactor(wavelength: float, species: SpeciesConstants) -> float:
    """|U| per unit peak intensity (J per W/m^2)."""
    d1, d2 = _detunings(wavelength, species)
    return abs(wavelength**3 * species.gamma_d2 / (16 * np.pi**2 * species.c_light) * (1 / d1 + 2 / d2))


def peak_intensity(power: float, waist: float) -> float:
    return 2.0 * power / (np.pi * waist**2)


def potential_depth(power: float, beam: TweezerBeam, species: SpeciesConstants = RB87) -> float:
    """Trap depth |U| in joules for a tweezer of ``power`` watts.

    The beam is treated as round with the geometric-mean waist.
    """
    if power < 0:
        raise ValueError("power must be nonnegative")
    pref = _depth_prefactor(beam.wavelength, species)
    if not beam.wavelength > species.lambda_d1:
        raise ValueError(f"tweezer wavelength {beam.wavelength!r} m is not red of the D1 line")
    return pref * peak_intensity(power, beam.effective_waist)


def trap_frequencies(power: float, beam: TweezerBeam, species: SpeciesConstants = RB87) -> TrapSpectrum:
    if not power > 0:
        raise ValueError("power must be positive")
    u = potential_depth(power, beam, species)
    w0 = beam.effective_waist
    nu_perp = np.sqrt(4 * u / (species.mass * w0**2)) / TWO_PI
    nu_par = np.sqrt(2 * u / (species.mass * beam.rayleigh_range**2)) / TWO_PI
    return TrapSpectrum(float(nu_perp), float(nu_par))


@dataclass(frozen=True)
class WaistFit:
    waist: float
    rayleigh_range: float
    waist_err: float
    rayleigh_range_err: float
    residual_norm: float
    converged: bool


def fit_waist_from_frequencies(
    samples: Sequence[Sequence[float]],
    wavelength: float,
    species: SpeciesConstants = RB87,
    sigma_perp: float | Sequence[float] | None = None,
    sigma_par: float | Sequence[float] | None = None,
) -> WaistFit:
    """Invert the trap-frequency relations for waist and Rayleigh range.

    ``samples`` holds ``(power_W, nu_perp_Hz, nu_par_Hz)`` triples.  When
    frequency errors are given they weight the residuals and the reported
    uncertainties are absolute; otherwise the errors are scaled by the fit
    residual.
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] != 3:
        raise ValueError("samples must be (power, nu_perp, nu_par) triples")
    powers = data[:, 0]
    if np.unique(powers).size < 3:
        raise ValueError("need at least 3 samples at distinct powers")
    if np.any(powers <= 0):
        raise ValueError("powers must be positive")
    nu_perp, nu_par = data[:, 1], data[:, 2]
    absolute = sigma_perp is not None and sigma_par is not None
    s_perp = np.broadcast_to(np.asarray(sigma_perp if absolute else 1.0, dtype=float), powers.shape)
    s_par = np.broadcast_to(np.asarray(sigma_par if absolute else 1.0, dtype=float), powers.shape)
    if not absolute:
        # comparable weights for the two branches
        s_perp = s_perp * np.mean(nu_perp)
        s_par = s_par * np.mean(nu_par)

    k = _depth_prefactor(wavelength, species)
    # nu_perp = a*sqrt(P)/w0^2 and nu_par = b*sqrt(P)/(w0*zR)
    a = np.sqrt(8 * k / (np.pi * species.mass)) / TWO_PI
    b = np.sqrt(4 * k / (np.pi * species.mass)) / TWO_PI
    sq = np.sqrt(powers)
    um = 1e-6

    def model(p):
        w0, zr = p[0] * um, p[1] * um
        return a * sq / w0**2, b * sq / (w0 * zr)

    def residual(p):
        mp, ml = model(p)
        return np.concatenate([(mp - nu_perp) / s_perp, (ml - nu_par) / s_par])

    def jac(p):
        mp, ml = model(p)
        w0, zr = p
        j = np.zeros((2 * powers.size, 2))
        j[: powers.size, 0] = -2 * mp / w0 / s_perp
        j[powers.size :, 0] = -ml / w0 / s_par
        j[powers.size :, 1] = -ml / zr / s_par
        return j

    w_guess = float(np.mean(np.sqrt(a * sq / nu_perp))) / um
    z_guess = float(np.mean(b * sq / (w_guess * um * nu_par))) / um
    out = least_squares_fit(residual, [w_guess, z_guess], jac=jac, absolute_sigma=absolute)
    if not out.converged:
        raise FitError("waist fit did not converge: " + out.message, out.residual_norm, out.nfev)
    return WaistFit(
        waist=out.params[0] * um,
        rayleigh_range=out.params[1] * um,
        waist_err=out.uncertainties[0] * um,
        rayleigh_range_err=out.uncertainties[1] * um,
        residual_norm=out.residual_norm,
        converged=out.converged,
    )


def tensor_light_shift(m_F: int, intensity: float, model: LightShiftModel = LightShiftModel()) -> float:
    """Excited-state (F'=3) tensor light shift in Hz."""
    if abs(m_F) > 3:
        raise ValueError("|m_F| must be <= 3 for the F'=3 manifold")
    return model.tensor_coefficient * m_F**2 * intensity


def oscillator_length(nu, species: SpeciesConstants = RB87):
    nu = np.asarray(nu, dtype=float)
    if np.any(nu <= 0):
        raise ValueError("frequency must be positive")
    return np.sqrt(species.hbar / (species.mass * TWO_PI * nu))


def gaussian_intensity(x, y, z, power: float, beam: TweezerBeam):
    """Intensity (W/m^2) of an elliptical Gaussian beam focused at the origin."""
    if power < 0:
        raise ValueError("power must be nonnegative")
    x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
    grow = np.sqrt(1.0 + (z / beam.rayleigh_range) ** 2)
    wx = beam.waist_x * grow
    wy = beam.waist_y * grow
    return 2 * power / (np.pi * wx * wy) * np.exp(-2 * x**2 / wx**2 - 2 * y**2 / wy**2)
