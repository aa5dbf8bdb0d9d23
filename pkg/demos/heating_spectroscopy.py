"""
Parametric heating spectroscopy
===============================

Modulating the trap depth at twice a trap frequency heats the atom out.
The survival dips reveal the transverse and axial frequencies.
"""

import numpy as np

from intracavity.experiments import simulate_parametric_heating
from intracavity.physics import TweezerBeam, potential_depth, trap_frequencies

beam = TweezerBeam.circular(800.12e-9, 1.414e-6, 7.8e-6)
spec = trap_frequencies(4.2e-3, beam)
nu = np.geomspace(20e3, 360e3, 40)

curve = simulate_parametric_heating(spec, nu, 0.15, 1e-3, np.random.default_rng(0), trajectories=300,
                                    trap_depth=potential_depth(4.2e-3, beam))
for f, s in zip(curve.nu_m, curve.survival):
    print(f"{f / 1e3:7.2f} kHz  {'#' * int(round(40 * s))}")
print("dips:", ", ".join(f"{d / 1e3:.1f} kHz" for d in curve.dips()),
      f"(expected {2 * spec.nu_par / 1e3:.1f} and {2 * spec.nu_perp / 1e3:.1f})")
