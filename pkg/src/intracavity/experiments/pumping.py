"""Probe-induced optical pumping into the stretched state, seen in cavity transmission."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from ..physics import CavityParams, coupling_at, transmission

M_F = np.arange(-2, 3)  # Zeeman sublevels of F = 2
STRETCHED = 4  # index of m_F = +2
WINDOW = 5e-6  # c1 / c2 integration windows


@dataclass(frozen=True)
class PumpState:
    population: tuple[float, ...]

    def __post_init__(self):
        p = np.asarray(self.population, dtype=float)
        if p.shape != (5,):
            raise ValueError("population needs one entry per m_F in -2..2")
        if np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
            raise ValueError("population must be a probability distribution")
        object.__setattr__(self, "population", tuple(float(v) for v in p))

    @classmethod
    def uniform(cls) -> "PumpState":
        return cls((0.2,) * 5)

    @classmethod
    def stretched(cls) -> "PumpState":
        return cls((0.0, 0.0, 0.0, 0.0, 1.0))

    def as_array(self) -> np.ndarray:
        return np.array(self.population)


@dataclass(frozen=True)
class Branching:
    """Change of m_F per scattered sigma+ photon (probabilities of -1, 0, +1)."""

    down: float = 0.0
    stay: float = 0.0
    up: float = 1.0

    def __post_init__(self):
        v = (self.down, self.stay, self.up)
        if min(v) < 0 or abs(sum(v) - 1) > 1e-12:
            raise ValueError("branching ratios must be a probability distribution")


def pumping_generator(scatter_rate: float, branching: Branching = Branching()) -> np.ndarray:
    """Rate matrix Q with dp/dt = Q p; m_F = +2 is absorbing."""
    q = np.zeros((5, 5))
    for i in range(STRETCHED):
        q[i + 1, i] += scatter_rate * branching.up
        if i > 0:
            q[i - 1, i] += scatter_rate * branching.down
    q -= np.diag(q.sum(axis=0))
    return q


def evolve(state: PumpState, t: float, scatter_rate: float,
           branching: Branching = Branching()) -> PumpState:
    p = expm(pumping_generator(scatter_rate, branching) * t) @ state.as_array()
    p = np.clip(p, 0.0, None)
    return PumpState(tuple(p / p.sum()))


@dataclass
class PumpTrace:
    times: np.ndarray  # bin centres, s
    bin_width: float
    expected: np.ndarray  # expected counts per bin (rate equations)
    counts: np.ndarray  # sampled counts per bin
    mc_level: np.ndarray  # Monte Carlo mean transmission per bin
    mc_error: np.ndarray  # its standard error
    c1: int
    c2: int
    meta: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.c2 / self.c1 if self.c1 else float("nan")


def _bin_average_stretched(q: np.ndarray, p0: np.ndarray, edges: np.ndarray, sub: int = 32):
    # Simpson average of P(m_F=+2) over every bin
    n = edges.size - 1
    avg = np.zeros(n)
    w = np.ones(sub + 1)
    w[1:-1:2], w[2:-1:2] = 4, 2
    w /= w.sum()
    for k in range(n):
        ts = np.linspace(edges[k], edges[k + 1], sub + 1)
        step = expm(q * (ts[1] - ts[0]))
        p = expm(q * ts[0]) @ p0
        vals = np.empty(sub + 1)
        for j in range(sub + 1):
            vals[j] = p[STRETCHED]
            p = step @ p
        avg[k] = w @ vals
    return avg


def _absorption_times(p0: np.ndarray, scatter_rate: float, branching: Branching, n: int,
                      horizon: float, rng: np.random.Generator) -> np.ndarray:
    """Gillespie sampling of the time each shot reaches m_F = +2 (inf if after horizon)."""
    state = rng.choice(5, size=n, p=p0)
    t = np.zeros(n)
    hit = np.where(state == STRETCHED, 0.0, np.inf)
    active = state != STRETCHED
    moves = np.array([-1, 0, 1])
    probs = np.array([branching.down, branching.stay, branching.up])
    while np.any(active):
        idx = np.flatnonzero(active)
        t[idx] += rng.exponential(1.0 / scatter_rate, idx.size)
        step = moves[rng.choice(3, size=idx.size, p=probs)]
        state[idx] = np.clip(state[idx] + step, 0, STRETCHED)
        done = state[idx] == STRETCHED
        hit[idx[done]] = t[idx[done]]
        late = t[idx] > horizon
        active[idx[done | late]] = False
    return hit


def simulate_pumping_trace(y: float, cavity: CavityParams, scatter_rate: float, duration: float,
                           rng: np.random.Generator, *, shots: int = 2000,
                           photon_rate: float = 2e7, bin_width: float = 0.5e-6,
                           initial: PumpState = PumpState.uniform(),
                           branching: Branching = Branching()) -> PumpTrace:
    """Transmission trace of a sigma+ probe pumping one atom at axial position ``y``.

    Atoms outside m_F = +2 leave the cavity at its empty transmission; once
    pumped the transmission drops to ``transmission(coupling_at(y))``.
    ``photon_rate`` is the detected count rate at unit transmission,
    accumulated over ``shots`` repetitions.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    nb = max(int(round(duration / bin_width)), 1)
    edges = np.linspace(0.0, duration, nb + 1)
    width = edges[1] - edges[0]
    t_empty = float(transmission(0.0, cavity))
    t_atom = float(transmission(coupling_at(y, cavity), cavity))
    p0 = initial.as_array()

    p2 = _bin_average_stretched(pumping_generator(scatter_rate, branching), p0, edges)
    level = t_empty * (1 - p2) + t_atom * p2
    expected = photon_rate * width * shots * level

    hit = _absorption_times(p0, scatter_rate, branching, shots, duration, rng)
    # fraction of every bin each shot spends pumped
    frac = np.clip((edges[None, 1:] - hit[:, None]) / width, 0.0, 1.0)
    shot_level = t_empty * (1 - frac) + t_atom * frac
    mc_level = shot_level.mean(axis=0)
    mc_error = shot_level.std(axis=0, ddof=1) / np.sqrt(shots) if shots > 1 else np.zeros(nb)
    counts = rng.poisson(photon_rate * width * shot_level.sum(axis=0))

    nwin = max(int(round(WINDOW / width)), 1)
    c1 = int(counts[:nwin].sum())
    c2 = int(counts[-nwin:].sum())
    return PumpTrace(0.5 * (edges[1:] + edges[:-1]), width, expected, counts, mc_level, mc_error,
                     c1, c2, {"y": y, "scatter_rate": scatter_rate, "shots": shots,
                              "t_empty": t_empty, "t_atom": t_atom})
