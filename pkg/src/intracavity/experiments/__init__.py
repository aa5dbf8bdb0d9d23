"""Simulated probe experiments and their fits."""

from .drift import DEFAULT_DRIFT_RATE, DriftModel, drift_series, inject_drift
from .heating import (DEFAULT_TRAP_DEPTH, SurvivalCurve, locate_dips, parametric_survival,
                      simulate_parametric_heating, thermal_ensemble)
from .imaging import (CALIBRATED_PHOTONS, PIXEL_SCALE, PSF_SIGMA, Localization, NoSpotError,
                      calibrate_photon_budget, fit_beam_profile, localization_scatter, localize_atom,
                      simulate_beam_image, simulate_spot_image)
from .pumping import (Branching, PumpState, PumpTrace, evolve, pumping_generator,
                      simulate_pumping_trace)
from .results import FitResult, ScanResult
from .scan import fit_transmission_scan, scan_model, scan_transmission
