"""
Cavity transmission and tweezer trap physics
============================================

A single coupled atom suppresses the resonant probe transmission, and the
tweezer light sets the trap that holds it there.
"""

import numpy as np

from intracavity.physics import (RB87, CavityParams, TweezerBeam, coupling_at, cooperativity,
                                 oscillator_length, potential_depth, trap_frequencies, transmission)

cav = CavityParams()

# empty cavity against a maximally coupled atom
t0 = transmission(0.0, cav)
tg = transmission(cav.g0, cav)
print(f"T(0) = {t0:.4f}   T(g0) = {tg:.4e}   contrast {t0 / tg:.1f}   C = {cooperativity(cav):.2f}")

# the standing wave: transmission along the cavity axis
y = np.linspace(0, cav.lambda_c / 2, 9)
for yi, ti in zip(y, transmission(coupling_at(y, cav), cav)):
    print(f"  y = {yi * 1e9:6.1f} nm   T = {ti:.4f}")

# depth per mW at 797 nm; the answer depends on which waist is used
for label, beam in [("measured waists, geometric mean", TweezerBeam()),
                    ("round 1.414 um waist", TweezerBeam.circular(797e-9, 1.414e-6, 7.8e-6))]:
    print(f"{label:32s} {potential_depth(1e-3, beam) / RB87.k_B * 1e3:.3f} mK/mW")

# trap frequencies of the 4.2 mW, 800.12 nm heating beam
spec = trap_frequencies(4.2e-3, TweezerBeam.circular(800.12e-9, 1.414e-6, 7.8e-6))
print(f"nu_perp = {spec.nu_perp / 1e3:.2f} kHz, nu_par = {spec.nu_par / 1e3:.3f} kHz")
print(f"oscillator lengths {oscillator_length(spec.nu_perp) * 1e9:.2f} nm, "
      f"{oscillator_length(spec.nu_par) * 1e9:.2f} nm")
