"""
Multitone AOD drive
===================

Schroeder phases keep the peak of a tone comb low, so the RF amplifier
can run closer to its limit without clipping.
"""

import numpy as np

from intracavity.aod import AodCalibration, ToneSet, crest_factor, freq_to_position, synthesize

for n in (2, 4, 8, 16, 32):
    crest = []
    for schroeder in (False, True):
        tones = ToneSet.comb(70e6, 1e6, n, schroeder)
        rate = float(np.ceil(16 * (70e6 + n * 1e6) / 1e6) * 1e6)
        crest.append(crest_factor(synthesize(tones, rate, 1e-6)))
    print(f"n = {n:2d}   zero-phase {crest[0]:.3f}   Schroeder {crest[1]:.3f}   ratio {crest[1] / crest[0]:.3f}")

# tones map to positions in the cavity frame through a rotated calibration
cal = AodCalibration()
fy = cal.origin_freq_y + np.array([0.0, 1e6, 2e6])
x, y = freq_to_position(np.full(3, cal.origin_freq_x), fy, cal)
print("positions (um):", np.round(np.c_[x, y] * 1e6, 3).tolist())
