"""Single-atom imaging: tweezer mode mapping with the atom as a point probe,
and fluorescence-spot localization on the camera."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import uniform_filter
from scipy.special import erf

from ..aod import ALPHA_PROBE_780, PositionJitter
from ..fitting import least_squares_fit
from ..physics import CavityParams, TweezerBeam, cooperativity, gaussian_intensity
from .results import FitResult, ScanResult

# Camera model: object-plane pixel size and PSF width (0.21 lambda/NA at 780 nm, NA 0.42).
PIXEL_SCALE = 0.25e-6
PSF_SIGMA = 0.39e-6
BACKGROUND = 0.05  # photons per pixel
# Detected photons per spot, calibrated once with calibrate_photon_budget() so
# that the localization scatter reproduces the measured ~47 nm.
CALIBRATED_PHOTONS = 138.0


class NoSpotError(ValueError):
    """Image contains no spot above the background."""


def simulate_beam_image(beam: TweezerBeam, probe_power: float, positions: Sequence[float],
                        cavity: CavityParams, rng: np.random.Generator, *, axis: str = "x",
                        atom: tuple[float, float] = (0.0, 0.0),
                        jitter: PositionJitter = PositionJitter(),
                        counts_per_intensity: float = 2.0, alpha: float = ALPHA_PROBE_780,
                        noise: bool = True) -> ScanResult:
    """Fluorescence counts while the probe focus is scanned along one AOD axis.

    ``positions`` are probe displacements along ``axis`` ("x" or "y", AOD
    frame); the beam's waists are aligned with the AOD axes.  The atom
    scatters into the cavity with efficiency 2C/(1+2C) and the expected count
    is ``counts_per_intensity`` times that fraction times the local probe
    intensity in W/m^2, so counts scale linearly with ``probe_power``.
    """
    if axis not in ("x", "y"):
        raise ValueError("axis must be 'x' or 'y'")
    u = np.asarray(positions, dtype=float)
    # atom position in the AOD frame
    c, s = np.cos(alpha), np.sin(alpha)
    ax, ay = c * atom[0] - s * atom[1], s * atom[0] + c * atom[1]
    px = np.where(axis == "x", u, 0.0)
    py = np.where(axis == "y", u, 0.0)
    # placement jitter is quoted in the cavity frame; rotate into the AOD frame
    jx = rng.normal(0.0, jitter.sigma_x, u.shape)
    jy = rng.normal(0.0, jitter.sigma_y, u.shape)
    px = px + c * jx - s * jy
    py = py + s * jx + c * jy
    coop = cooperativity(cavity)
    inten = gaussian_intensity(ax - px, ay - py, 0.0, probe_power, beam)
    expected = counts_per_intensity * (2 * coop / (1 + 2 * coop)) * inten
    if noise:
        counts = rng.poisson(expected).astype(float)
        errors = np.sqrt(np.maximum(counts, 1.0))
    else:
        counts, errors = expected, np.zeros_like(expected)
    meta = {"alpha_rad": float(alpha), "probe_power_w": probe_power, "axis": axis}
    return ScanResult(u, counts, errors, f"{axis}_aod", meta)


def gaussian_profile(u, amplitude, center, waist, offset):
    return amplitude * np.exp(-2 * (np.asarray(u) - center) ** 2 / waist**2) + offset


def fit_beam_profile(scan: ScanResult, waist_guess: Optional[float] = None) -> FitResult:
    """Fit ``a*exp(-2 (u-u0)^2 / w^2) + b`` (1/e^2 waist ``w``)."""
    u, v, e = scan.abscissa, scan.values, scan.errors
    weighted = bool(np.all(e > 0))
    sig = e if weighted else np.ones_like(v)
    um = 1e-6
    b0 = float(np.min(v))
    a0 = float(np.max(v) - b0)
    u0 = float(u[np.argmax(v)])
    if waist_guess is None:
        # second moment of the background-subtracted profile: sigma = w/2
        wts = np.clip(v - b0, 0, None)
        var = np.sum(wts * (u - u0) ** 2) / max(np.sum(wts), 1e-300)
        waist_guess = 2 * np.sqrt(var) if var > 0 else np.ptp(u) / 4

    def residual(p):
        return (gaussian_profile(u, p[0], p[1] * um, p[2] * um, p[3]) - v) / sig

    def jac(p):
        a, x0, w = p[0], p[1] * um, p[2] * um
        g = np.exp(-2 * (u - x0) ** 2 / w**2)
        return np.stack([g,
                         a * g * 4 * (u - x0) / w**2 * um,
                         a * g * 4 * (u - x0) ** 2 / w**3 * um,
                         np.ones_like(u)], axis=1) / sig[:, None]

    out = least_squares_fit(residual, [a0, u0 / um, waist_guess / um, b0], jac=jac)
    scale = np.array([1, um, um, 1])
    val = out.params * scale
    err = out.uncertainties * scale
    names = ("amplitude", "center", "waist", "offset")
    val[2] = abs(val[2])
    return FitResult(dict(zip(names, map(float, val))), dict(zip(names, map(float, err))),
                     out.residual_norm, out.converged, False, {"reduced_chi2": out.reduced_chi2},
                     out.message)


# -- camera localization ---------------------------------------------------


def simulate_spot_image(position: tuple[float, float], photons: float, rng: Optional[np.random.Generator],
                        *, size: int = 15, pixel_scale: float = PIXEL_SCALE,
                        psf_sigma: float = PSF_SIGMA, background: float = BACKGROUND) -> np.ndarray:
    """Pixelated fluorescence spot.  ``position`` is measured from the centre of
    pixel (0, 0); with ``rng=None`` the expected image is returned."""
    edges = (np.arange(size + 1) - 0.5) * pixel_scale
    s2 = np.sqrt(2) * psf_sigma
    fx = np.diff(0.5 * erf((edges - position[0]) / s2))
    fy = np.diff(0.5 * erf((edges - position[1]) / s2))
    expected = photons * np.outer(fy, fx) + background
    if rng is None:
        return expected
    return rng.poisson(expected).astype(float)


@dataclass(frozen=True)
class Localization:
    x: float
    y: float
    sigma_x: float
    sigma_y: float
    x_err: float
    y_err: float
    amplitude: float
    offset: float


def localize_atom(image, pixel_scale: float, min_snr: float = 5.0) -> Localization:
    """2D Gaussian fit of a single spot; coordinates from pixel (0, 0)'s centre."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ValueError("image must be 2D")
    border = np.concatenate([img[0], img[-1], img[1:-1, 0], img[1:-1, -1]])
    bg = float(np.mean(border))
    # detect on 3x3 box sums, whose background noise is Poisson sqrt(9 bg)
    box = uniform_filter(img, size=3, mode="nearest") * 9
    excess = float(box.max() - 9 * bg)
    noise = np.sqrt(9 * max(bg, 1.0 / 9))
    if excess < min_snr * noise:
        raise NoSpotError(f"3x3 excess {excess:.3g} counts, below {min_snr} x noise {noise:.3g}")
    peak = float(img.max() - bg)
    ny, nx = img.shape
    yy, xx = np.mgrid[0:ny, 0:nx].astype(float)
    w = np.clip(img - bg, 0, None)
    x0 = float(np.sum(w * xx) / w.sum())
    y0 = float(np.sum(w * yy) / w.sum())
    s0 = float(np.sqrt(np.sum(w * ((xx - x0) ** 2 + (yy - y0) ** 2)) / (2 * w.sum())))
    s0 = max(s0, 0.5)
    xf, yf, z = xx.ravel(), yy.ravel(), img.ravel()
    # unweighted: count-derived weights bias faint spots
    sig = np.ones_like(z)

    def model(p):
        a, cx, cy, sx, sy, b = p
        return a * np.exp(-0.5 * ((xf - cx) / sx) ** 2 - 0.5 * ((yf - cy) / sy) ** 2) + b

    def residual(p):
        return (model(p) - z) / sig

    def jac(p):
        a, cx, cy, sx, sy, b = p
        g = np.exp(-0.5 * ((xf - cx) / sx) ** 2 - 0.5 * ((yf - cy) / sy) ** 2)
        return np.stack([g,
                         a * g * (xf - cx) / sx**2,
                         a * g * (yf - cy) / sy**2,
                         a * g * (xf - cx) ** 2 / sx**3,
                         a * g * (yf - cy) ** 2 / sy**3,
                         np.ones_like(z)], axis=1) / sig[:, None]

    out = least_squares_fit(residual, [peak, x0, y0, s0, s0, bg], jac=jac)
    a, cx, cy, sx, sy, b = out.params
    ex, ey = out.uncertainties[1], out.uncertainties[2]
    return Localization(cx * pixel_scale, cy * pixel_scale, abs(sx) * pixel_scale,
                        abs(sy) * pixel_scale, ex * pixel_scale, ey * pixel_scale, a, b)


def localization_scatter(photons: float, repeats: int, rng: np.random.Generator, *,
                         position: tuple[float, float] = (7.3 * PIXEL_SCALE, 6.8 * PIXEL_SCALE),
                         pixel_scale: float = PIXEL_SCALE, psf_sigma: float = PSF_SIGMA,
                         background: float = BACKGROUND, size: int = 15):
    """Standard deviation (x, y) of fitted centroids over repeated spot images."""
    xs = np.empty(repeats)
    ys = np.empty(repeats)
    for i in range(repeats):
        img = simulate_spot_image(position, photons, rng, size=size, pixel_scale=pixel_scale,
                                  psf_sigma=psf_sigma, background=background)
        loc = localize_atom(img, pixel_scale)
        xs[i], ys[i] = loc.x, loc.y
    return float(np.std(xs, ddof=1)), float(np.std(ys, ddof=1))


def calibrate_photon_budget(target: float = 46.5e-9, repeats: int = 400, seed: int = 0,
                            candidates: Sequence[float] = tuple(range(40, 201, 5))) -> float:
    """Smallest photon budget whose mean x/y scatter is at or below ``target``."""
    for n in candidates:
        sx, sy = localization_scatter(n, repeats, np.random.default_rng(seed))
        if 0.5 * (sx + sy) <= target:
            return float(n)
    return float(candidates[-1])
