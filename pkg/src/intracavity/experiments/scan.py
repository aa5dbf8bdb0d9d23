"""Transmission versus atom position along the AOD y axis, and its fit."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..aod import AodCalibration, PositionJitter, apply_jitter, freq_to_position
from ..fitting import least_squares_fit
from ..physics import CavityParams, transmission
from .drift import DriftModel, drift_series
from .results import FitResult, ScanResult

TWO_PI = 2 * np.pi
# Fits with a reduced chi-square above this (or, for unweighted data, an rms
# residual above RMS_LIMIT of the data span) are flagged as not converged.
CHI2_LIMIT = 25.0
RMS_LIMIT = 1e-3

_G_UNIT = TWO_PI * 1e6  # fit g_eff in MHz
_Y_UNIT = 1e-7  # fit y0 in units of 100 nm


def scan_model(u, amplitude, offset, g_eff, y0, axis_scale, cavity: CavityParams):
    """A*T(g_eff*sin(2 pi s (u - y0) / lambda_C)) + c along the scan coordinate u."""
    phase = TWO_PI * axis_scale * (np.asarray(u, dtype=float) - y0) / cavity.lambda_c
    return amplitude * transmission(g_eff * np.sin(phase), cavity) + offset


def scan_transmission(fy_values: Sequence[float], cal: AodCalibration, cavity: CavityParams,
                      jitter: PositionJitter, drift: DriftModel, rng: np.random.Generator, *,
                      fx: Optional[float] = None, amplitude: float = 1.0, offset: float = 0.0,
                      g_eff: Optional[float] = None, photons: Optional[float] = 50.0,
                      repeats: int = 100, dwell: float = 0.1, y_shift: float = 0.0) -> ScanResult:
    """Simulate a transmission scan over the AOD frequencies ``fy_values``.

    The range is swept ``repeats`` times; every placement gets its own
    jitter plus the drift accumulated at ``dwell`` seconds per point, and
    each point records the sweep average of ``A*T(g(y)) + c``.
    ``photons`` is the count budget per repetition at unit transmission
    (Poisson noise); ``None`` gives noiseless data.  The abscissa is the
    commanded displacement along y_AOD.
    """
    fy = np.asarray(fy_values, dtype=float)
    if fy.size < 2 or np.ptp(fy) == 0:
        raise ValueError("scan range is degenerate")
    fx = cal.origin_freq_x if fx is None else fx
    g_eff = cavity.g0 if g_eff is None else g_eff
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    x, y = freq_to_position(np.full_like(fy, fx), fy, cal)
    shape = (fy.size, repeats)
    x, y = apply_jitter((np.broadcast_to(x[:, None], shape), np.broadcast_to(y[:, None], shape)),
                        jitter, rng)
    # repetitions are interleaved sweeps over the whole range
    times = dwell * np.arange(fy.size * repeats)
    y = y + drift_series(times, drift, rng).reshape(repeats, fy.size).T + y_shift
    truth = amplitude * transmission(g_eff * np.sin(TWO_PI * y / cavity.lambda_c), cavity) + offset
    if photons is None:
        values, errors = truth.mean(axis=1), np.zeros(fy.size)
    else:
        counts = rng.poisson(np.clip(truth, 0, None) * photons).sum(axis=1)
        budget = photons * repeats
        values = counts / budget
        errors = np.sqrt(np.maximum(counts, 1)) / budget
    u = cal.scale_y * (fy - cal.origin_freq_y)
    meta = {"alpha_rad": float(cal.alpha), "photons": photons, "repeats": repeats, "dwell_s": dwell,
            "amplitude": amplitude, "offset": offset, "g_eff": float(g_eff)}
    return ScanResult(u, values, errors, "y_aod", meta)


def _period_guess(u: np.ndarray, v: np.ndarray) -> float:
    # dominant spatial frequency of the mean-subtracted data, zero padded
    grid = np.linspace(u.min(), u.max(), max(u.size, 64))
    vi = np.interp(grid, u, v) - np.mean(v)
    n = 16 * grid.size
    spec = np.abs(np.fft.rfft(vi * np.hanning(grid.size), n))
    freqs = np.fft.rfftfreq(n, grid[1] - grid[0])
    lo = 1.0 / np.ptp(u)  # at least one period inside the scan
    mask = freqs >= lo
    return 1.0 / freqs[mask][np.argmax(spec[mask])]


def fit_transmission_scan(scan: ScanResult, cavity: CavityParams,
                          period_guess: Optional[float] = None, n_starts: int = 8) -> FitResult:
    """Fit ``A*T(g_eff*sin(2 pi s (u - y0)/lambda_C)) + c`` to a scan.

    Free parameters are A, c, g_eff, y0 and the axis scale s, the projection
    of the scan axis onto the cavity axis (cos alpha).  The reported period is
    lambda_C / (2 s).  Several starting values of y0 across one period guard
    against aliased minima; the best is kept.  ``y0`` is returned wrapped into
    one period and ``g_eff`` as a magnitude.

    Data with no modulation above the noise are returned flagged
    ``degenerate`` with g_eff = 0.  Poor fits (see ``CHI2_LIMIT``) come back
    with ``converged=False``.
    """
    u, v, e = scan.abscissa, scan.values, scan.errors
    if u.size < 8:
        raise ValueError("need at least 8 points")
    weighted = bool(np.all(e > 0))
    w = e if weighted else np.ones_like(v)
    span = np.ptp(v)
    noise = np.median(e) if weighted else 0.0
    if span <= max(3 * noise, 1e-12 * max(np.abs(v).max(), 1e-300)):
        nan = float("nan")
        return FitResult({"A": 0.0, "c": float(np.mean(v)), "g_eff": 0.0, "y0": nan, "axis_scale": nan},
                         {"A": nan, "c": float(np.std(v) / np.sqrt(v.size)), "g_eff": nan,
                          "y0": nan, "axis_scale": nan},
                         0.0, True, True, {"period": nan, "alpha_deg": nan},
                         "no modulation above noise")

    period0 = period_guess if period_guess is not None else _period_guess(u, v)
    if period0 < np.ptp(u) / (u.size / 3) or period0 > np.ptp(u):
        raise ValueError("scan must span at least one period with >= 3 points per period")
    s0 = cavity.lambda_c / (2 * period0)
    t_empty = float(transmission(0.0, cavity))
    k, ko, gm = cavity.kappa, cavity.kappa_out, cavity.gamma
    num = 4 * (k - ko) * ko * gm**2

    def unpack(p):
        return p[0], p[1], p[2] * _G_UNIT, p[3] * _Y_UNIT, p[4]

    def residual(p):
        a, c, g, y0, s = unpack(p)
        return (scan_model(u, a, c, g, y0, s, cavity) - v) / w

    def jac(p):
        a, c, g, y0, s = unpack(p)
        phase = TWO_PI * s * (u - y0) / cavity.lambda_c
        sn, cs = np.sin(phase), np.cos(phase)
        gg = g * sn
        den = gm * k + gg**2
        t = num / den**2
        dt_dg = -4 * num * gg / den**3
        cols = [
            t,
            np.ones_like(u),
            a * dt_dg * sn * _G_UNIT,
            a * dt_dg * g * cs * (-TWO_PI * s / cavity.lambda_c) * _Y_UNIT,
            a * dt_dg * g * cs * TWO_PI * (u - y0) / cavity.lambda_c,
        ]
        return np.stack(cols, axis=1) / w[:, None]

    best = None
    for g_start in (cavity.g0, 0.5 * cavity.g0):
        t_min = float(transmission(g_start, cavity))
        a0 = span / (t_empty - t_min)
        c0 = float(np.min(v)) - a0 * t_min
        for j in range(n_starts):
            y_start = period0 * j / n_starts + u[0]
            p0 = [a0, c0, g_start / _G_UNIT, y_start / _Y_UNIT, s0]
            out = least_squares_fit(residual, p0, jac=jac, absolute_sigma=False)
            if best is None or (out.converged and out.residual_norm < best.residual_norm):
                best = out

    a, c, g, y0, s = unpack(best.params)
    err = best.uncertainties * np.array([1, 1, _G_UNIT, _Y_UNIT, 1])
    period = cavity.lambda_c / (2 * abs(s))
    y0 = float(np.mod(y0 - u[0], period) + u[0])
    period_err = period * err[4] / abs(s)
    derived = {
        "period": period,
        "period_err": float(period_err),
        "alpha_deg": float(np.degrees(np.arccos(abs(s)))) if abs(s) <= 1 else float("nan"),
        "reduced_chi2": best.reduced_chi2,
    }
    converged = best.converged
    message = best.message
    if weighted and best.reduced_chi2 > CHI2_LIMIT:
        converged, message = False, f"reduced chi-square {best.reduced_chi2:.3g} above {CHI2_LIMIT}"
    if not weighted and best.residual_norm / np.sqrt(u.size) > RMS_LIMIT * span:
        converged, message = False, "rms residual above threshold"
    return FitResult(
        {"A": float(a), "c": float(c), "g_eff": float(abs(g)), "y0": y0, "axis_scale": float(abs(s))},
        {"A": float(err[0]), "c": float(err[1]), "g_eff": float(err[2]), "y0": float(err[3]),
         "axis_scale": float(err[4])},
        best.residual_norm, bool(converged), False, derived, message)
