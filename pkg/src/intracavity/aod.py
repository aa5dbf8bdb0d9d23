"""Multitone RF synthesis for the 2D AODs and the frequency-to-position map."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from math import gcd
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

ALPHA_TRAP = np.deg2rad(14.60)  # AOD axes vs cavity axis, tweezer wavelengths
ALPHA_PROBE_780 = np.deg2rad(14.03)  # same, 780 nm probe light

WAVEFORM_MAGIC = b"AODW"
WAVEFORM_VERSION = 1
_HEADER = struct.Struct("<4sIII")  # magic, version, sample_rate [Hz], count


@dataclass(frozen=True)
class Tone:
    frequency: float
    amplitude: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError("tone frequency must be positive")
        if not (np.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ValueError("tone amplitude must be finite and nonnegative")


@dataclass(frozen=True)
class ToneSet:
    tones: tuple[Tone, ...]

    def __post_init__(self):
        object.__setattr__(self, "tones", tuple(self.tones))
        if not self.tones:
            raise ValueError("a ToneSet needs at least one tone")
        f = [t.frequency for t in self.tones]
        if any(b <= a for a, b in zip(f, f[1:])):
            raise ValueError("tone frequencies must be strictly increasing")

    @classmethod
    def equal_amplitude(cls, frequencies: Sequence[float], phases: Optional[Sequence[float]] = None,
                        amplitude: float = 1.0) -> "ToneSet":
        if phases is None:
            phases = np.zeros(len(frequencies))
        return cls(tuple(Tone(float(f), amplitude, float(p)) for f, p in zip(frequencies, phases)))

    @classmethod
    def comb(cls, start: float, spacing: float, n: int, schroeder: bool = True,
             amplitude: float = 1.0) -> "ToneSet":
        freqs = start + spacing * np.arange(n)
        phases = schroeder_phases(n) if schroeder else None
        return cls.equal_amplitude(freqs, phases, amplitude)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([t.frequency for t in self.tones])

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([t.amplitude for t in self.tones])

    @property
    def phases(self) -> np.ndarray:
        return np.array([t.phase for t in self.tones])

    def merged(self, other: "ToneSet") -> "ToneSet":
        return ToneSet(tuple(sorted(self.tones + other.tones, key=lambda t: t.frequency)))


def schroeder_phases(n: int) -> np.ndarray:
    """Low-crest-factor phases for ``n`` equal-amplitude tones.

    phi_k = -pi*k*(k-1)/n for k = 1..n, so the first tone has zero phase.
    """
    if n < 1:
        raise ValueError("need at least one tone")
    k = np.arange(1, n + 1)
    return -np.pi * k * (k - 1) / n


def synthesize(tones: ToneSet, sample_rate: float, duration: float) -> np.ndarray:
    """Sample ``sum_k a_k sin(2 pi f_k t + phi_k)`` at ``t = i / sample_rate``."""
    fmax = tones.frequencies.max()
    if not sample_rate > 2 * fmax:
        raise ValueError(f"sample rate {sample_rate:g} Hz undersamples a {fmax:g} Hz tone")
    if duration < 0:
        raise ValueError("duration must be nonnegative")
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    out = np.zeros(n)
    for tone in tones.tones:
        out += tone.amplitude * np.sin(2 * np.pi * tone.frequency * t + tone.phase)
    return out


def crest_factor(samples) -> float:
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise ValueError("empty sample sequence")
    rms = np.sqrt(np.mean(s**2))
    if rms == 0:
        raise ValueError("crest factor undefined for a zero signal")
    return float(np.max(np.abs(s)) / rms)


def common_period(frequencies: Iterable[float], max_denominator: int = 1000) -> Optional[float]:
    """Least common period of the tones, or None when they are not commensurate."""
    fracs = []
    for f in frequencies:
        fr = Fraction(float(f)).limit_denominator(max_denominator)
        if abs(float(fr) - f) > 4 * np.finfo(float).eps * abs(f):
            return None
        fracs.append(fr)
    den = reduce(lambda a, b: a * b // gcd(a, b), (fr.denominator for fr in fracs))
    num = reduce(gcd, (fr.numerator * (den // fr.denominator) for fr in fracs))
    fundamental = Fraction(num, den)
    return float(1 / fundamental)


def waveform_crest(tones: ToneSet, sample_rate: float, duration: Optional[float] = None) -> float:
    """Crest factor over one least common period when the tones are
    commensurate, else over ``duration``."""
    period = common_period(tones.frequencies)
    if period is not None:
        duration = period
    if duration is None:
        raise ValueError("tones are not commensurate; a duration is required")
    return crest_factor(synthesize(tones, sample_rate, duration))


@dataclass(frozen=True)
class AodCalibration:
    """Affine AOD frequency -> cavity-frame position map.

    The scale and origin defaults are assumptions (1 um per MHz around a
    75 MHz centre); only the rotation angle is a measured quantity.
    """

    scale_x: float = 1e-12  # m per Hz
    scale_y: float = 1e-12
    alpha: float = ALPHA_TRAP
    origin_freq_x: float = 75e6
    origin_freq_y: float = 75e6

    def __post_init__(self):
        if self.scale_x == 0 or self.scale_y == 0:
            raise ValueError("AOD scales must be nonzero")
        if not abs(self.alpha) < np.pi / 2:
            raise ValueError("|alpha| must be below pi/2")


def freq_to_position(fx, fy, cal: AodCalibration = AodCalibration()):
    """Cavity-frame (x, y) of the tweezer driven at RF frequencies (fx, fy)."""
    dx = cal.scale_x * (np.asarray(fx, dtype=float) - cal.origin_freq_x)
    dy = cal.scale_y * (np.asarray(fy, dtype=float) - cal.origin_freq_y)
    c, s = np.cos(cal.alpha), np.sin(cal.alpha)
    return c * dx + s * dy, -s * dx + c * dy


def position_to_freq(x, y, cal: AodCalibration = AodCalibration()):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c, s = np.cos(cal.alpha), np.sin(cal.alpha)
    dx = c * x - s * y
    dy = s * x + c * y
    return cal.origin_freq_x + dx / cal.scale_x, cal.origin_freq_y + dy / cal.scale_y


@dataclass(frozen=True)
class PositionJitter:
    sigma_x: float = 47e-9
    sigma_y: float = 46e-9

    def __post_init__(self):
        if self.sigma_x < 0 or self.sigma_y < 0:
            raise ValueError("jitter must be nonnegative")


def apply_jitter(pos, jitter: PositionJitter, rng: np.random.Generator):
    """Add independent Gaussian placement errors to ``pos = (x, y)``."""
    x = np.asarray(pos[0], dtype=float)
    y = np.asarray(pos[1], dtype=float)
    return (x + rng.normal(0.0, 1.0, x.shape) * jitter.sigma_x,
            y + rng.normal(0.0, 1.0, y.shape) * jitter.sigma_y)


def write_waveform_csv(path, samples, sample_rate: float, header: Sequence[str] = ()) -> None:
    samples = np.asarray(samples, dtype=float)
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", "amplitude"])
        for i, v in enumerate(samples):
            w.writerow([repr(i / sample_rate), repr(float(v))])


def write_waveform_binary(path, samples, sample_rate: float) -> None:
    """Little-endian float32 stream behind a 16-byte header:
    magic ``AODW``, uint32 version, uint32 sample rate in Hz, uint32 count."""
    if sample_rate != int(sample_rate) or not 0 < sample_rate < 2**32:
        raise ValueError("binary export needs an integer sample rate below 2**32 Hz")
    data = np.asarray(samples, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(WAVEFORM_MAGIC, WAVEFORM_VERSION, int(sample_rate), data.size))
        fh.write(data.tobytes())


def read_waveform_binary(path) -> tuple[np.ndarray, int]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("file too short for an AODW header")
    magic, version, rate, count = _HEADER.unpack_from(raw)
    if magic != WAVEFORM_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != WAVEFORM_VERSION:
        raise ValueError(f"unsupported waveform version {version}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    if data.size != count:
        raise ValueError(f"header declares {count} samples, found {data.size}")
    return data.astype(float), rate
