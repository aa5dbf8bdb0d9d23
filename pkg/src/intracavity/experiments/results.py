"""Containers for simulated measurements and fitted models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np


def _num(v):
    # JSON has no inf/nan; keep them as strings so artifacts round-trip
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def _unnum(v):
    return float(v)


@dataclass
class ScanResult:
    abscissa: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    axis: str = "y_aod"
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.abscissa = np.asarray(self.abscissa, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.errors = np.asarray(self.errors, dtype=float)
        if not (self.abscissa.shape == self.values.shape == self.errors.shape):
            raise ValueError("abscissa, values and errors must have equal length")
        d = np.diff(self.abscissa)
        if self.abscissa.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("abscissa must be strictly monotone")

    def to_dict(self) -> dict:
        return {
            "kind": "scan",
            "axis": self.axis,
            "abscissa": [_num(v) for v in self.abscissa],
            "values": [_num(v) for v in self.values],
            "errors": [_num(v) for v in self.errors],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScanResult":
        if d.get("kind") != "scan":
            raise ValueError("not a scan record")
        return cls(np.array([_unnum(v) for v in d["abscissa"]]),
                   np.array([_unnum(v) for v in d["values"]]),
                   np.array([_unnum(v) for v in d["errors"]]),
                   d.get("axis", "y_aod"), dict(d.get("meta", {})))

    def __eq__(self, other):
        if not isinstance(other, ScanResult):
            return NotImplemented
        return (self.axis == other.axis and self.meta == other.meta
                and np.array_equal(self.abscissa, other.abscissa)
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.errors, other.errors))


@dataclass
class FitResult:
    params: dict[str, float]
    uncertainties: dict[str, float]
    residual_norm: float
    converged: bool
    degenerate: bool = False
    derived: dict[str, float] = field(default_factory=dict)
    message: str = ""

    def __post_init__(self):
        if any(not (u >= 0) for u in self.uncertainties.values() if not math.isnan(u)):
            raise ValueError("uncertainties must be nonnegative")

    def __getitem__(self, name: str) -> float:
        if name in self.params:
            return self.params[name]
        return self.derived[name]

    def error(self, name: str) -> float:
        return self.uncertainties[name]

    def to_dict(self) -> dict:
        return {
            "kind": "fit",
            "params": {k: _num(v) for k, v in self.params.items()},
            "uncertainties": {k: _num(v) for k, v in self.uncertainties.items()},
            "residual_norm": _num(self.residual_norm),
            "converged": bool(self.converged),
            "degenerate": bool(self.degenerate),
            "derived": {k: _num(v) for k, v in self.derived.items()},
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        if d.get("kind") != "fit":
            raise ValueError("not a fit record")
        return cls({k: _unnum(v) for k, v in d["params"].items()},
                   {k: _unnum(v) for k, v in d["uncertainties"].items()},
                   _unnum(d["residual_norm"]), bool(d["converged"]), bool(d.get("degenerate", False)),
                   {k: _unnum(v) for k, v in d.get("derived", {}).items()}, d.get("message", ""))

    def __eq__(self, other):
        if not isinstance(other, FitResult):
            return NotImplemented
        return self.to_dict() == other.to_dict()
