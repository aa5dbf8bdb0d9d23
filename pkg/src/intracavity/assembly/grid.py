"""Tweezer grid geometry, occupancy and stochastic loading."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Rectangular tweezer array, sites indexed row-major.

    ``origin`` is the position of site 0; ``rotation`` turns the grid axes
    with respect to the cavity frame.  The default 8x3 array at 3.7 um pitch
    spans about twice the 12.9 um standing-wave waist along a row.
    """

    rows: int = 3
    cols: int = 8
    pitch_x: float = 3.7e-6
    pitch_y: float = 3.7e-6
    origin: tuple[float, float] = (0.0, 0.0)
    rotation: float = 0.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid needs at least one row and one column")
        if not (self.pitch_x > 0 and self.pitch_y > 0):
            raise ValueError("pitches must be positive")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def n_sites(self) -> int:
        return self.rows * self.cols

    def row_col(self, site: int) -> tuple[int, int]:
        if not 0 <= site < self.n_sites:
            raise IndexError(f"site {site} outside a {self.rows}x{self.cols} grid")
        return divmod(site, self.cols)

    def site_index(self, row: int, col: int) -> int:
        return row * self.cols + col

    def to_world(self, local) -> np.ndarray:
        """Map grid-frame coordinates (metres, site 0 at 0) to the lab frame."""
        local = np.asarray(local, dtype=float)
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        x = c * local[..., 0] - s * local[..., 1] + self.origin[0]
        y = s * local[..., 0] + c * local[..., 1] + self.origin[1]
        return np.stack([x, y], axis=-1)

    def local_position(self, site: int) -> np.ndarray:
        r, c = self.row_col(site)
        return np.array([c * self.pitch_x, r * self.pitch_y])

    def position(self, site: int) -> np.ndarray:
        return self.to_world(self.local_position(site))

    def positions(self) -> np.ndarray:
        return np.array([self.position(i) for i in range(self.n_sites)])


@dataclass(frozen=True)
class Occupancy:
    filled: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "filled", tuple(bool(v) for v in self.filled))

    @classmethod
    def from_sites(cls, grid: GridSpec, sites: Iterable[int]) -> "Occupancy":
        filled = np.zeros(grid.n_sites, dtype=bool)
        for s in sites:
            grid.row_col(s)
            filled[s] = True
        return cls(tuple(filled))

    @classmethod
    def empty(cls, grid: GridSpec) -> "Occupancy":
        return cls((False,) * grid.n_sites)

    def check(self, grid: GridSpec) -> None:
        if len(self.filled) != grid.n_sites:
            raise ValueError(f"occupancy has {len(self.filled)} sites, grid has {grid.n_sites}")

    @property
    def sites(self) -> list[int]:
        return [i for i, v in enumerate(self.filled) if v]

    @property
    def count(self) -> int:
        return sum(self.filled)

    def as_array(self) -> np.ndarray:
        return np.array(self.filled, dtype=bool)


@dataclass(frozen=True)
class TargetPattern:
    sites: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "sites", frozenset(int(s) for s in self.sites))
        if not self.sites:
            raise ValueError("target pattern must not be empty")

    def check(self, grid: GridSpec) -> None:
        bad = [s for s in self.sites if not 0 <= s < grid.n_sites]
        if bad:
            raise ValueError(f"target sites {sorted(bad)} outside the grid")

    def __len__(self) -> int:
        return len(self.sites)

    def is_filled(self, occ: Occupancy) -> bool:
        return all(occ.filled[s] for s in self.sites)

    @classmethod
    def centered_row(cls, grid: GridSpec, n: int) -> "TargetPattern":
        """``n`` sites closest to the centre of the grid, middle row first."""
        if not 1 <= n <= grid.n_sites:
            raise ValueError(f"cannot target {n} sites on {grid.n_sites}")
        rc, cc = (grid.rows - 1) / 2, (grid.cols - 1) / 2
        order = sorted(range(grid.n_sites),
                       key=lambda s: (abs(s // grid.cols - rc), abs(s % grid.cols - cc), s))
        return cls(frozenset(order[:n]))


@dataclass(frozen=True)
class LoadingModel:
    p_fill: Optional[float] = None
    mean_atoms: Optional[float] = 6.4

    def __post_init__(self):
        if self.p_fill is not None and not 0 <= self.p_fill <= 1:
            raise ValueError("p_fill must lie in [0, 1]")
        if self.mean_atoms is not None and self.mean_atoms < 0:
            raise ValueError("mean_atoms must be nonnegative")

    def probability(self, grid: GridSpec) -> float:
        if self.p_fill is not None:
            return float(self.p_fill)
        if self.mean_atoms is None:
            raise ValueError("loading model needs p_fill or mean_atoms")
        if self.mean_atoms > grid.n_sites:
            raise ValueError(f"mean_atoms {self.mean_atoms} exceeds {grid.n_sites} sites")
        return self.mean_atoms / grid.n_sites


def sample_loading(grid: GridSpec, model: LoadingModel, rng: np.random.Generator) -> Occupancy:
    """Independent Bernoulli fill of every site."""
    p = model.probability(grid)
    return Occupancy(tuple(rng.random(grid.n_sites) < p))


def sample_loading_counts(grid: GridSpec, model: LoadingModel, draws: int,
                          rng: np.random.Generator) -> np.ndarray:
    """Atom numbers of ``draws`` independent loadings (vectorised)."""
    p = model.probability(grid)
    return (rng.random((draws, grid.n_sites)) < p).sum(axis=1)
