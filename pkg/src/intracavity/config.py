"""Scenario configuration: INI or JSON, with the unit in every key name.

Files look like::

    [tweezer]
    wavelength_nm = 800.12
    power_mw = 4.2 mW      # a trailing unit is optional but must match the key

Values are stored internally in SI.  Unknown sections or keys, unparsable
numbers and mismatched units raise ``ConfigError`` naming the key.
"""

from __future__ import annotations

import configparser
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np

from .aod import ALPHA_PROBE_780, ALPHA_TRAP, AodCalibration, PositionJitter
from .assembly import GridSpec, LoadingModel, LossModel, Scenario, TargetPattern
from .assembly.planning import DEFAULT_EXCLUSION_RADIUS, DEFAULT_RESOLUTION
from .assembly.execution import CALIBRATED_HANDOFF, DEFAULT_MAX_RETRIES
from .experiments import CALIBRATED_PHOTONS, DriftModel
from .experiments.drift import DEFAULT_DRIFT_RATE
from .physics import CavityParams, TweezerBeam

TWO_PI = 2 * np.pi


class ConfigError(ValueError):
    """Invalid configuration; the message names section, key and unit."""


@dataclass(frozen=True)
class Field:
    unit: str  # canonical unit label, "" for dimensionless, None for non-numeric
    factor: float  # multiply to get SI
    default: Any
    kind: type = float


def _f(unit, factor, default, kind=float):
    return Field(unit, factor, default, kind)


MHZ_ANG = TWO_PI * 1e6  # "2 pi x MHz" angular rates

SCHEMA: dict[str, dict[str, Field]] = {
    "run": {
        "seed": _f(None, 1, 0, int),
        "out_dir": _f(None, 1, "out", str),
        "trials": _f(None, 1, 2000, int),
    },
    "cavity": {
        "g0_mhz": _f("MHz", MHZ_ANG, 7.8),
        "kappa_mhz": _f("MHz", MHZ_ANG, 2.5),
        "kappa_out_mhz": _f("MHz", MHZ_ANG, 2.3),
        "gamma_mhz": _f("MHz", MHZ_ANG, 3.0),
        "lambda_c_nm": _f("nm", 1e-9, 780.0),
        "mode_waist_um": _f("um", 1e-6, 29.0),
        "finesse": _f("", 1, 61000.0),
    },
    "tweezer": {
        "wavelength_nm": _f("nm", 1e-9, 797.0),
        "waist_x_um": _f("um", 1e-6, 1.28),
        "waist_y_um": _f("um", 1e-6, 1.49),
        "rayleigh_range_um": _f("um", 1e-6, 7.8),
        "power_mw": _f("mW", 1e-3, 1.0),
    },
    "aod": {
        "scale_x_um_per_mhz": _f("um/MHz", 1e-12, 1.0),
        "scale_y_um_per_mhz": _f("um/MHz", 1e-12, 1.0),
        "alpha_deg": _f("deg", math.pi / 180, math.degrees(ALPHA_TRAP)),
        "alpha_probe_deg": _f("deg", math.pi / 180, math.degrees(ALPHA_PROBE_780)),
        "origin_x_mhz": _f("MHz", 1e6, 75.0),
        "origin_y_mhz": _f("MHz", 1e6, 75.0),
        "jitter_x_nm": _f("nm", 1e-9, 47.0),
        "jitter_y_nm": _f("nm", 1e-9, 46.0),
    },
    "waveform": {
        "n_tones": _f(None, 1, 8, int),
        "start_mhz": _f("MHz", 1e6, 70.0),
        "spacing_mhz": _f("MHz", 1e6, 1.0),
        "sample_rate_mhz": _f("MHz", 1e6, 500.0),
        "schroeder": _f(None, 1, True, bool),
    },
    "grid": {
        "rows": _f(None, 1, 3, int),
        "cols": _f(None, 1, 8, int),
        "pitch_x_um": _f("um", 1e-6, 3.7),
        "pitch_y_um": _f("um", 1e-6, 3.7),
        "rotation_deg": _f("deg", math.pi / 180, 0.0),
    },
    "loading": {
        "mean_atoms": _f("", 1, 6.4),
        "p_fill": _f("", 1, None),
    },
    "loss": {
        "trap_lifetime_s": _f("s", 1, 30.0),
        "handoff_success": _f("", 1, CALIBRATED_HANDOFF),
        "image_time_s": _f("s", 1, 0.35),
        "ramp_time_ms": _f("ms", 1e-3, 10.0),
        "speed_um_per_ms": _f("um/ms", 1e-3, 5.0),
    },
    "sort": {
        "targets": _f(None, 1, 2, int),
        "sizes": _f(None, 1, "1,2,3,4,5,6,7", str),
        "max_retries": _f(None, 1, DEFAULT_MAX_RETRIES, int),
        "exclusion_radius_um": _f("um", 1e-6, DEFAULT_EXCLUSION_RADIUS * 1e6),
        "resolution": _f(None, 1, DEFAULT_RESOLUTION, int),
        "occupancy_file": _f(None, 1, "", str),
        "pattern_sites": _f(None, 1, "", str),
    },
    "scan": {
        "span_um": _f("um", 1e-6, 2.0),
        "points": _f(None, 1, 81, int),
        "photons": _f("", 1, 50.0),
        "repeats": _f(None, 1, 100, int),
        "dwell_s": _f("s", 1, 0.1),
        "drift_rate_nm_per_min": _f("nm/min", 1e-9 / 60, DEFAULT_DRIFT_RATE * 60e9),
        "walk_sigma_nm_per_sqrt_s": _f("nm/sqrt(s)", 1e-9, 0.0),
    },
    "heat": {
        "power_mw": _f("mW", 1e-3, 4.2),
        "wavelength_nm": _f("nm", 1e-9, 800.12),
        "waist_um": _f("um", 1e-6, 1.414),
        "rayleigh_range_um": _f("um", 1e-6, 7.8),
        "nu_min_khz": _f("kHz", 1e3, 20.0),
        "nu_max_khz": _f("kHz", 1e3, 360.0),
        "points": _f(None, 1, 100, int),
        "depth": _f("", 1, 0.15),
        "duration_ms": _f("ms", 1e-3, 1.0),
        "temperature_uk": _f("uK", 1e-6, 20.0),
    },
    "beam": {
        "probe_power_nw": _f("nW", 1e-9, 1.0),
        "span_um": _f("um", 1e-6, 8.0),
        "points": _f(None, 1, 81, int),
    },
    "localize": {
        "photons": _f("", 1, CALIBRATED_PHOTONS),
        "repeats": _f(None, 1, 200, int),
    },
}

_NUM_UNIT = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf)\s*([^\s].*?)?\s*$")


def _parse(section: str, key: str, raw: Any) -> Any:
    spec = SCHEMA[section][key]
    where = f"{section}.{key}"
    if spec.kind is str:
        return str(raw)
    if spec.kind is bool:
        if isinstance(raw, bool):
            return raw
        s = str(raw).strip().lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{where}: expected a boolean, got {raw!r}")
    if spec.kind is int:
        if isinstance(raw, bool) or (isinstance(raw, float) and not raw.is_integer()):
            raise ConfigError(f"{where}: expected an integer, got {raw!r}")
        try:
            return int(str(raw).strip()) if not isinstance(raw, (int, float)) else int(raw)
        except ValueError:
            raise ConfigError(f"{where}: expected an integer, got {raw!r}") from None
    # physical quantity
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return float(raw)
    if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("", "none")):
        if spec.default is None:
            return None
        raise ConfigError(f"{where}: a value in {spec.unit or 'dimensionless units'} is required")
    m = _NUM_UNIT.match(str(raw))
    if not m:
        raise ConfigError(f"{where}: cannot parse {raw!r} as a number in "
                          f"{spec.unit or 'dimensionless units'}")
    value, unit = float(m.group(1)), m.group(2)
    if unit is not None and unit != spec.unit:
        expected = f"'{spec.unit}'" if spec.unit else "no unit"
        raise ConfigError(f"{where}: unit '{unit}' does not match the key's unit ({expected})")
    return value


class ScenarioConfig:
    """Validated configuration.  ``cfg[section, key]`` gives the SI value."""

    def __init__(self, values: Optional[Mapping[str, Mapping[str, Any]]] = None):
        self._raw: dict[str, dict[str, Any]] = {s: {} for s in SCHEMA}
        self._si: dict[str, dict[str, Any]] = {}
        for section, items in (values or {}).items():
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]")
            if not isinstance(items, Mapping):
                raise ConfigError(f"section [{section}] must be a table of keys")
            for key, raw in items.items():
                self.set(section, key, raw)
        self._rebuild()

    def set(self, section: str, key: str, raw: Any) -> None:
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {section}.{key}")
        _parse(section, key, raw)  # validate now, convert in _rebuild
        self._raw[section][key] = raw
        if self._si:
            self._rebuild()

    def override(self, assignment: str) -> None:
        """Apply ``section.key=value``."""
        lhs, eq, rhs = assignment.partition("=")
        section, dot, key = lhs.strip().partition(".")
        if not eq or not dot:
            raise ConfigError(f"override {assignment!r} must look like section.key=value")
        self.set(section, key.strip(), rhs.strip())

    def _rebuild(self) -> None:
        si = {}
        for section, fields in SCHEMA.items():
            si[section] = {}
            for key, spec in fields.items():
                if key in self._raw[section]:
                    v = _parse(section, key, self._raw[section][key])
                else:
                    v = spec.default
                if spec.kind is float and v is not None:
                    v = float(v) * spec.factor
                si[section][key] = v
        self._si = si

    def __getitem__(self, item: tuple[str, str]) -> Any:
        section, key = item
        return self._si[section][key]

    def display(self, section: str, key: str) -> Any:
        """Value in the key's own unit."""
        spec = SCHEMA[section][key]
        v = self._si[section][key]
        return v / spec.factor if spec.kind is float and v is not None else v

    def to_dict(self) -> dict:
        """Every key in file units (JSON-equivalent form of the INI file)."""
        return {s: {k: self.display(s, k) for k in SCHEMA[s]} for s in SCHEMA}

    # builders ------------------------------------------------------------

    @property
    def seed(self) -> int:
        return self["run", "seed"]

    def cavity(self) -> CavityParams:
        c = self._si["cavity"]
        return CavityParams(c["g0_mhz"], c["kappa_mhz"], c["kappa_out_mhz"], c["gamma_mhz"],
                            c["lambda_c_nm"], c["mode_waist_um"], c["finesse"])

    def tweezer(self) -> TweezerBeam:
        t = self._si["tweezer"]
        return TweezerBeam(t["wavelength_nm"], t["waist_x_um"], t["waist_y_um"], t["rayleigh_range_um"])

    def heating_beam(self) -> TweezerBeam:
        h = self._si["heat"]
        return TweezerBeam.circular(h["wavelength_nm"], h["waist_um"], h["rayleigh_range_um"])

    def calibration(self, probe: bool = False) -> AodCalibration:
        a = self._si["aod"]
        return AodCalibration(a["scale_x_um_per_mhz"], a["scale_y_um_per_mhz"],
                              a["alpha_probe_deg"] if probe else a["alpha_deg"],
                              a["origin_x_mhz"], a["origin_y_mhz"])

    def jitter(self) -> PositionJitter:
        a = self._si["aod"]
        return PositionJitter(a["jitter_x_nm"], a["jitter_y_nm"])

    def drift(self) -> DriftModel:
        s = self._si["scan"]
        return DriftModel(s["drift_rate_nm_per_min"], s["walk_sigma_nm_per_sqrt_s"])

    def grid(self) -> GridSpec:
        g = self._si["grid"]
        try:
            return GridSpec(g["rows"], g["cols"], g["pitch_x_um"], g["pitch_y_um"], (0.0, 0.0),
                            g["rotation_deg"])
        except ValueError as exc:
            raise ConfigError(f"[grid]: {exc}") from None

    def loading(self) -> LoadingModel:
        ld = self._si["loading"]
        try:
            if ld["p_fill"] is not None:
                return LoadingModel(p_fill=ld["p_fill"], mean_atoms=None)
            return LoadingModel(mean_atoms=ld["mean_atoms"])
        except ValueError as exc:
            raise ConfigError(f"[loading]: {exc}") from None

    def loss(self) -> LossModel:
        ls = self._si["loss"]
        try:
            return LossModel(ls["trap_lifetime_s"], ls["handoff_success"], ls["image_time_s"],
                             ls["ramp_time_ms"], ls["speed_um_per_ms"])
        except ValueError as exc:
            raise ConfigError(f"[loss]: {exc}") from None

    def pattern(self, grid: Optional[GridSpec] = None) -> TargetPattern:
        grid = grid or self.grid()
        sites = self._si["sort"]["pattern_sites"].strip()
        try:
            if sites:
                return TargetPattern(frozenset(int(s) for s in sites.split(",")))
            return TargetPattern.centered_row(grid, self._si["sort"]["targets"])
        except ValueError as exc:
            raise ConfigError(f"sort.pattern_sites / sort.targets: {exc}") from None

    def sizes(self) -> list[int]:
        try:
            out = [int(s) for s in self._si["sort"]["sizes"].split(",") if s.strip()]
        except ValueError:
            raise ConfigError("sort.sizes: expected a comma-separated list of integers") from None
        if not out or min(out) < 1:
            raise ConfigError("sort.sizes: sizes must be positive integers")
        return out

    def scenario(self) -> Scenario:
        grid = self.grid()
        s = self._si["sort"]
        try:
            return Scenario(grid, self.loading(), self.pattern(grid), self.loss(), s["max_retries"],
                            s["exclusion_radius_um"], s["resolution"])
        except ValueError as exc:
            raise ConfigError(f"[sort]: {exc}") from None


def _strip_comment(v: str) -> str:
    return re.split(r"\s[#;]", v, maxsplit=1)[0].strip()


def load_config(path=None) -> ScenarioConfig:
    """Read ``.json`` or INI (any other extension); ``None`` gives defaults."""
    if path is None:
        return ScenarioConfig()
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object of sections")
        return ScenarioConfig(data)
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep key case so 'power_mW' is reported, not folded
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    data = {s: {k: _strip_comment(v) for k, v in parser[s].items()} for s in parser.sections()}
    return ScenarioConfig(data)


def dump_ini(cfg: ScenarioConfig) -> str:
    lines = []
    for section, items in cfg.to_dict().items():
        lines.append(f"[{section}]")
        for key, v in items.items():
            lines.append(f"{key} = {'' if v is None else v}")
        lines.append("")
    return "\n".join(lines)
