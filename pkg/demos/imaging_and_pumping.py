"""
Imaging a single atom and watching it pump
==========================================

The atom's fluorescence maps the tweezer profile and its camera spot gives
its position.  Optical pumping into m_F = +2 shows up as a drop in cavity
transmission.
"""

import numpy as np

from intracavity.experiments import (CALIBRATED_PHOTONS, PIXEL_SCALE, fit_beam_profile, localization_scatter,
                                     localize_atom, simulate_beam_image, simulate_pumping_trace,
                                     simulate_spot_image)
from intracavity.physics import CavityParams, TweezerBeam

rng = np.random.default_rng(2)
cav, beam = CavityParams(), TweezerBeam()

u = np.linspace(-4e-6, 4e-6, 81)
for axis in ("x", "y"):
    fit = fit_beam_profile(simulate_beam_image(beam, 1e-9, u, cav, rng, axis=axis))
    print(f"waist along {axis}: {fit['waist'] * 1e6:.3f} +- {fit.error('waist') * 1e6:.3f} um")

img = simulate_spot_image((1.83e-6, 1.71e-6), CALIBRATED_PHOTONS, rng)
loc = localize_atom(img, PIXEL_SCALE)
print(f"spot at ({loc.x * 1e6:.3f}, {loc.y * 1e6:.3f}) um, true (1.830, 1.710)")
sx, sy = localization_scatter(CALIBRATED_PHOTONS, 200, rng)
print(f"scatter over 200 images: {sx * 1e9:.1f} nm, {sy * 1e9:.1f} nm")

tr = simulate_pumping_trace(cav.lambda_c / 4, cav, 1e6, 20e-6, rng)
print(f"pumping at an antinode: c1 = {tr.c1}, c2 = {tr.c2} counts")
