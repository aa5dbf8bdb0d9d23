"""Rearrangement planning: optimal assignment and collision-free transport paths."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .grid import GridSpec, Occupancy, TargetPattern

DEFAULT_EXCLUSION_RADIUS = 1.5e-6  # ~ one tweezer waist
DEFAULT_RESOLUTION = 8  # lattice nodes per pitch
DISCARD_OFFSET = 2  # pitches outside the grid
_MARGIN = 3  # search lattice extends this many pitches beyond the grid


class NoPathError(RuntimeError):
    """No trajectory keeps the required clearance from the other atoms."""


class InfeasiblePatternError(ValueError):
    """Fewer atoms than target sites."""


@dataclass(frozen=True)
class Move:
    """Transport of one atom.  ``to_site`` is None for a release in free space."""

    from_site: int
    to_site: Optional[int]
    path: tuple[tuple[float, float], ...]
    duration: float

    def __post_init__(self):
        object.__setattr__(self, "path", tuple((float(x), float(y)) for x, y in self.path))

    @property
    def length(self) -> float:
        p = np.asarray(self.path)
        return float(np.sum(np.hypot(*np.diff(p, axis=0).T)))

    @property
    def is_discard(self) -> bool:
        return self.to_site is None


@dataclass(frozen=True)
class SortPlan:
    moves: tuple[Move, ...] = ()
    discards: tuple[Move, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "moves", tuple(self.moves))
        object.__setattr__(self, "discards", tuple(self.discards))

    @property
    def duration(self) -> float:
        """Time spent on the filling moves (discards excluded)."""
        return math.fsum(m.duration for m in self.moves)

    @property
    def discard_duration(self) -> float:
        return math.fsum(m.duration for m in self.discards)

    def apply(self, occ: Occupancy, include_discards: bool = True) -> Occupancy:
        """Loss-free execution; raises if a move hits an occupied or empty site."""
        state = list(occ.filled)
        for m in self.moves + (self.discards if include_discards else ()):
            if not state[m.from_site]:
                raise ValueError(f"move from empty site {m.from_site}")
            if m.to_site is not None and state[m.to_site]:
                raise ValueError(f"move into occupied site {m.to_site}")
            state[m.from_site] = False
            if m.to_site is not None:
                state[m.to_site] = True
        return Occupancy(tuple(state))


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    n_atoms: int
    n_targets: int
    vacancies: tuple[int, ...]  # empty target sites
    reservoir: tuple[int, ...]  # filled sites outside the pattern
    surplus: int  # atoms left over once the pattern is filled

    @property
    def required_moves(self) -> int:
        return len(self.vacancies) if self.feasible else 0


def select_targets(occ: Occupancy, pattern: TargetPattern) -> FeasibilityReport:
    filled = occ.sites
    vac = tuple(sorted(s for s in pattern.sites if not occ.filled[s]))
    res = tuple(s for s in filled if s not in pattern.sites)
    n = len(filled)
    return FeasibilityReport(
        feasible=n >= len(pattern),
        n_atoms=n,
        n_targets=len(pattern),
        vacancies=vac,
        reservoir=res,
        surplus=max(n - len(pattern), 0),
    )


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[int, int], ...]  # (source, target)
    cost: float

    @property
    def moves(self) -> tuple[tuple[int, int], ...]:
        return tuple((s, t) for s, t in self.pairs if s != t)


def _distance_matrix(grid: GridSpec, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
    a = np.array([grid.local_position(s) for s in rows]).reshape(-1, 2)
    b = np.array([grid.local_position(s) for s in cols]).reshape(-1, 2)
    return np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])


def plan_assignment(sources: Iterable[int], targets: Iterable[int], grid: GridSpec) -> Assignment:
    """Minimum total Euclidean distance matching of every target to a source."""
    src = sorted(set(sources))
    tgt = sorted(set(targets))
    if len(src) < len(tgt):
        raise InfeasiblePatternError(f"{len(src)} sources cannot fill {len(tgt)} targets")
    if not tgt:
        return Assignment((), 0.0)
    cost = _distance_matrix(grid, tgt, src)
    r, c = linear_sum_assignment(cost)
    pairs = tuple(sorted(((src[j], tgt[i]) for i, j in zip(r, c)), key=lambda p: p[1]))
    total = math.fsum(cost[i, j] for i, j in zip(r, c))
    return Assignment(pairs, total)


# -- path search -----------------------------------------------------------


def _segment_clear(a, b, obstacles: np.ndarray, radius: float) -> bool:
    if obstacles.size == 0:
        return True
    a = np.asarray(a, dtype=float)
    ab = np.asarray(b, dtype=float) - a
    ao = obstacles - a
    den = ab @ ab
    t = np.zeros(len(obstacles)) if den == 0 else np.clip(ao @ ab / den, 0.0, 1.0)
    d = np.hypot(ao[:, 0] - t * ab[0], ao[:, 1] - t * ab[1])
    return bool(np.all(d > radius))


@lru_cache(maxsize=16)
def _lattice(rows: int, cols: int, px: float, py: float, res: int):
    hx, hy = px / res, py / res
    nx = (cols - 1 + 2 * _MARGIN) * res + 1
    ny = (rows - 1 + 2 * _MARGIN) * res + 1
    xs = -_MARGIN * px + hx * np.arange(nx)
    ys = -_MARGIN * py + hy * np.arange(ny)
    return xs, ys, hx, hy


def _simplify(points: list[tuple[float, float]], obstacles: np.ndarray, radius: float):
    # drop collinear lattice nodes, then pull the string
    pts = [points[0]]
    for i in range(1, len(points) - 1):
        ax, ay = pts[-1]
        bx, by = points[i]
        cx, cy = points[i + 1]
        if abs((bx - ax) * (cy - by) - (by - ay) * (cx - bx)) > 1e-30:
            pts.append(points[i])
    pts.append(points[-1])
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not _segment_clear(pts[i], pts[j], obstacles, radius):
            j -= 1
        out.append(pts[j])
        i = j
    return out


@lru_cache(maxsize=4096)
def _plan_local(start: tuple[float, float], goal: tuple[float, float],
                obstacles: tuple[tuple[float, float], ...], rows: int, cols: int,
                px: float, py: float, radius: float, res: int):
    obs = np.array(obstacles, dtype=float).reshape(-1, 2)
    if _segment_clear(start, goal, obs, radius):
        return (start, goal)
    xs, ys, hx, hy = _lattice(rows, cols, px, py, res)
    nx, ny = xs.size, ys.size

    def node_of(p):
        i = int(round((p[0] - xs[0]) / hx))
        j = int(round((p[1] - ys[0]) / hy))
        if not (0 <= i < nx and 0 <= j < ny) or abs(xs[i] - p[0]) > 1e-6 * hx or abs(ys[j] - p[1]) > 1e-6 * hy:
            raise ValueError(f"point {p} is not a search-lattice node")
        return j * nx + i

    X, Y = np.meshgrid(xs, ys)
    clear = np.full(X.shape, np.inf)
    for ox, oy in obs:
        np.minimum(clear, np.hypot(X - ox, Y - oy), out=clear)
    clear = clear.ravel()
    s, g = node_of(start), node_of(goal)
    if not clear[s] > radius or not clear[g] > radius:
        raise NoPathError("path endpoint lies inside the exclusion radius of another atom")
    clear_l = clear.tolist()
    xl, yl = xs.tolist(), ys.tolist()
    gx, gy = xl[g % nx], yl[g // nx]
    steps = []
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                steps.append((di, dj, math.hypot(di * hx, dj * hy)))

    best = {s: 0.0}
    parent = {s: -1}
    heap = [(math.hypot(xl[s % nx] - gx, yl[s // nx] - gy), 0.0, s)]
    done = set()
    while heap:
        _, cost, u = heapq.heappop(heap)
        if u in done:
            continue
        if u == g:
            break
        done.add(u)
        ui, uj = u % nx, u // nx
        cu = clear_l[u]
        for di, dj, step in steps:
            vi, vj = ui + di, uj + dj
            if not (0 <= vi < nx and 0 <= vj < ny):
                continue
            v = vj * nx + vi
            cv = clear_l[v]
            if v in done or not cv > radius:
                continue
            if min(cu, cv) <= radius + step / 2 and not _segment_clear(
                    (xl[ui], yl[uj]), (xl[vi], yl[vj]), obs, radius):
                continue
            nc = cost + step
            if nc < best.get(v, math.inf):
                best[v] = nc
                parent[v] = u
                heapq.heappush(heap, (nc + math.hypot(xl[vi] - gx, yl[vj] - gy), nc, v))
    if g not in parent:
        raise NoPathError("destination is enclosed by atoms at this exclusion radius")
    nodes = []
    u = g
    while u != -1:
        nodes.append((xl[u % nx], yl[u // nx]))
        u = parent[u]
    nodes.reverse()
    nodes[0], nodes[-1] = start, goal
    return tuple(_simplify(nodes, obs, radius))


def _path_local(start_local, goal_local, obstacle_sites: Iterable[int], grid: GridSpec,
                exclusion_radius: float, resolution: int) -> np.ndarray:
    obstacles = tuple(sorted(tuple(grid.local_position(o).tolist()) for o in obstacle_sites))
    pts = _plan_local(tuple(map(float, start_local)), tuple(map(float, goal_local)), obstacles,
                      grid.rows, grid.cols, grid.pitch_x, grid.pitch_y,
                      float(exclusion_radius), int(resolution))
    return np.array(pts)


def plan_path(from_site: int, to_site: int, occupied: Iterable[int], grid: GridSpec,
              exclusion_radius: float = DEFAULT_EXCLUSION_RADIUS,
              resolution: int = DEFAULT_RESOLUTION) -> np.ndarray:
    """Shortest polyline between two site centres that keeps more than
    ``exclusion_radius`` from every other occupied site.

    Returns an ``(k, 2)`` array of lab-frame waypoints.  Raises
    :class:`NoPathError` when no such path exists on the search lattice.
    """
    if from_site == to_site:
        raise ValueError("from_site and to_site coincide")
    blockers = set(occupied) - {from_site, to_site}
    local = _path_local(grid.local_position(from_site), grid.local_position(to_site),
                        blockers, grid, exclusion_radius, resolution)
    return grid.to_world(local)


def discard_point_local(site: int, grid: GridSpec) -> np.ndarray:
    """Release point two pitches outside the grid, past the nearer long edge."""
    r, c = grid.row_col(site)
    row = -DISCARD_OFFSET if r <= (grid.rows - 1) / 2 else grid.rows - 1 + DISCARD_OFFSET
    return np.array([c * grid.pitch_x, row * grid.pitch_y])


def move_duration(length: float, speed: float, ramp_time: float) -> float:
    return length / speed + 2.0 * ramp_time


def _polyline_length(pts: np.ndarray) -> float:
    return float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))


def build_sort_plan(occ: Occupancy, pattern: TargetPattern, grid: GridSpec,
                    speed: float = 5e-3, ramp_time: float = 0.010,
                    exclusion_radius: float = DEFAULT_EXCLUSION_RADIUS,
                    resolution: int = DEFAULT_RESOLUTION,
                    discards: bool = True) -> SortPlan:
    """Optimal filling moves followed by release of the surplus atoms.

    Atoms already sitting on target sites stay put; by the triangle
    inequality this never increases the optimal total distance.  Moves are
    executed one at a time, each routed around the atoms present at that
    moment.
    """
    occ.check(grid)
    pattern.check(grid)
    report = select_targets(occ, pattern)
    if not report.feasible:
        raise InfeasiblePatternError(f"{report.n_atoms} atoms for {report.n_targets} targets")
    assignment = plan_assignment(report.reservoir, report.vacancies, grid)
    state = set(occ.sites)

    def route(pairs, to_local):
        done = []
        pending = list(pairs)
        while pending:
            for k, (src, dst) in enumerate(pending):
                goal = to_local(src, dst)
                blockers = state - {src} - ({dst} if dst is not None else set())
                try:
                    pts = _path_local(grid.local_position(src), goal, blockers, grid,
                                      exclusion_radius, resolution)
                except NoPathError:
                    continue
                world = grid.to_world(pts)
                done.append(Move(src, dst, tuple(map(tuple, world)),
                                 move_duration(_polyline_length(pts), speed, ramp_time)))
                state.discard(src)
                if dst is not None:
                    state.add(dst)
                del pending[k]
                break
            else:
                raise NoPathError(f"no collision-free route for moves {pending}")
        return done

    moves = route(assignment.moves, lambda s, d: grid.local_position(d))
    dropped = []
    if discards:
        surplus = sorted(state - pattern.sites,
                         key=lambda s: (-abs(grid.row_col(s)[0] - (grid.rows - 1) / 2), s))
        dropped = route([(s, None) for s in surplus], lambda s, d: discard_point_local(s, grid))
    return SortPlan(tuple(moves), tuple(dropped))
