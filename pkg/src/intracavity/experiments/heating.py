"""Parametric-heating spectroscopy of the tweezer trap frequencies."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import constants as csts

from ..physics import RB87, SpeciesConstants, TrapSpectrum, TweezerBeam, potential_depth

TWO_PI = 2 * np.pi
STEPS_PER_PERIOD = 50

# 4.2 mW at 800.12 nm in the 1.414 um / 7.8 um tweezer
DEFAULT_TRAP_DEPTH = potential_depth(4.2e-3, TweezerBeam.circular(800.12e-9, 1.414e-6, 7.8e-6))


@dataclass
class SurvivalCurve:
    nu_m: np.ndarray
    survival: np.ndarray
    trajectories: int

    def dips(self, threshold: float = 0.9) -> list[float]:
        return locate_dips(self.nu_m, self.survival, threshold)


def parametric_survival(axis_frequencies: Sequence[float], nu_m: float, depth: float,
                        duration: float, trap_depth: float, initial: np.ndarray) -> float:
    """Fraction of trajectories whose energy never reaches ``trap_depth``.

    Each axis is a harmonic oscillator whose spring constant is modulated as
    ``1 + depth*sin(2 pi nu_m t)``.  ``initial`` has shape
    ``(trajectories, axes, 2)`` and holds position and momentum quadratures in
    energy units (E_axis = (q^2 + p^2) / 2).  Integration is kick-drift-kick
    leapfrog with at least ``STEPS_PER_PERIOD`` steps per fastest period.
    """
    omega = TWO_PI * np.asarray(axis_frequencies, dtype=float)[:, None]
    init = np.asarray(initial, dtype=float)
    q = init[:, :, 0].T.copy()
    p = init[:, :, 1].T.copy()
    if depth == 0:
        e = 0.5 * (q**2 + p**2).sum(axis=0)
        return float(np.mean(e < trap_depth))
    fastest = max(float(omega.max()) / TWO_PI, nu_m)
    steps = int(np.ceil(duration * fastest * STEPS_PER_PERIOD))
    dt = duration / steps
    half = 0.5 * dt * omega
    wdt = dt * omega
    alive = 0.5 * (q**2 + p**2).sum(axis=0) < trap_depth
    mod = 1.0 + depth * np.sin(TWO_PI * nu_m * dt * np.arange(steps + 1))
    for k in range(steps):
        p -= (half * mod[k]) * q
        q += wdt * p
        p -= (half * mod[k + 1]) * q
        alive &= 0.5 * (q**2 + p**2).sum(axis=0) < trap_depth
    return float(alive.mean())


def thermal_ensemble(n: int, axes: int, temperature: float, rng: np.random.Generator,
                     k_B: float = csts.k) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(k_B * temperature), size=(n, axes, 2))


def simulate_parametric_heating(spectrum: TrapSpectrum, nu_m_list: Sequence[float], depth: float,
                                duration: float, rng: np.random.Generator, *,
                                trajectories: int = 1000, temperature: float = 20e-6,
                                trap_depth: Optional[float] = None,
                                species: SpeciesConstants = RB87) -> SurvivalCurve:
    """Survival after ``duration`` of amplitude modulation at each ``nu_m``.

    Two transverse axes at ``nu_perp`` and one axial at ``nu_par`` start from
    the same thermal ensemble at every modulation frequency.
    """
    if not 0 <= depth < 1:
        raise ValueError("modulation depth must lie in [0, 1)")
    if duration <= 0:
        raise ValueError("duration must be positive")
    u = DEFAULT_TRAP_DEPTH if trap_depth is None else trap_depth
    axes = (spectrum.nu_perp, spectrum.nu_perp, spectrum.nu_par)
    init = thermal_ensemble(trajectories, 3, temperature, rng, species.k_B)
    nu = np.asarray(nu_m_list, dtype=float)
    surv = np.array([parametric_survival(axes, f, depth, duration, u, init) for f in nu])
    return SurvivalCurve(nu, surv, trajectories)


def locate_dips(nu_m, survival, threshold: float = 0.9) -> list[float]:
    """Loss-weighted centre of every contiguous run of points below ``threshold``."""
    nu_m = np.asarray(nu_m, dtype=float)
    loss = 1.0 - np.asarray(survival, dtype=float)
    below = np.asarray(survival) < threshold
    dips = []
    i = 0
    while i < below.size:
        if below[i]:
            j = i
            while j + 1 < below.size and below[j + 1]:
                j += 1
            w = loss[i : j + 1]
            dips.append(float(np.sum(w * nu_m[i : j + 1]) / np.sum(w)))
            i = j + 1
        else:
            i += 1
    return dips
