import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from intracavity.assembly import (GridSpec, InfeasiblePatternError, LoadingModel, LossModel,
                                  NoPathError, Occupancy, Scenario, SortPlan, TargetPattern,
                                  build_sort_plan, estimate_success, improvement_ratio,
                                  plan_assignment, plan_path, probabilistic_baseline,
                                  sample_loading, sample_loading_counts, select_targets,
                                  simulate_execution, success_curve, wilson_interval)
from intracavity.assembly.planning import DEFAULT_EXCLUSION_RADIUS, discard_point_local
from intracavity.assembly.statistics import BASELINE_ANCHORS, calibrate_handoff, trial_rng

GRID = GridSpec()


def brute_force_cost(sources, targets, grid):
    """Exhaustive minimum over all injective target -> source maps."""
    pos = {s: tuple(grid.position(s)) for s in set(sources) | set(targets)}
    best = math.inf
    for perm in itertools.permutations(sorted(sources), len(targets)):
        best = min(best, math.fsum(math.dist(pos[s], pos[t]) for s, t in zip(perm, sorted(targets))))
    return best if targets else 0.0


def random_instance(rng, grid=GRID, max_sources=6):
    ns = int(rng.integers(1, max_sources + 1))
    nt = int(rng.integers(1, ns + 1))
    sites = rng.permutation(grid.n_sites)
    return sorted(sites[:ns].tolist()), sorted(rng.choice(grid.n_sites, nt, replace=False).tolist())


def min_clearance(path, obstacles, step=10e-9):
    pts = []
    for a, b in zip(path[:-1], path[1:]):
        n = max(int(np.ceil(np.hypot(*(b - a)) / step)), 1)
        t = np.linspace(0.0, 1.0, n + 1)[:, None]
        pts.append(a + t * (b - a))
    pts = np.vstack(pts)
    if len(obstacles) == 0:
        return np.inf
    obs = np.asarray(obstacles)
    return float(np.min(np.hypot(pts[:, None, 0] - obs[None, :, 0], pts[:, None, 1] - obs[None, :, 1])))


class TestGrid:
    def test_geometry(self):
        assert GRID.n_sites == 24
        assert GRID.row_col(9) == (1, 1)
        assert GRID.site_index(1, 1) == 9
        assert GRID.position(9) == pytest.approx([3.7e-6, 3.7e-6])
        with pytest.raises(ValueError):
            GridSpec(rows=0)
        with pytest.raises(ValueError):
            GridSpec(pitch_x=0.0)

    def test_rotated_grid(self):
        g = GridSpec(rows=2, cols=2, origin=(1e-6, 0.0), rotation=np.pi / 2)
        assert g.position(1) == pytest.approx([1e-6, g.pitch_x])

    def test_occupancy_and_pattern(self):
        occ = Occupancy.from_sites(GRID, [0, 5, 9])
        assert occ.sites == [0, 5, 9] and occ.count == 3
        with pytest.raises(ValueError):
            Occupancy((True,) * 5).check(GRID)
        with pytest.raises(ValueError):
            TargetPattern(frozenset())
        with pytest.raises(ValueError):
            TargetPattern(frozenset({24})).check(GRID)
        assert TargetPattern.centered_row(GRID, 2).sites == {11, 12}


class TestLoading:
    def test_extremes(self):
        rng = np.random.default_rng(0)
        assert sample_loading(GRID, LoadingModel(p_fill=1.0), rng).count == 24
        assert sample_loading(GRID, LoadingModel(p_fill=0.0), rng).count == 0

    def test_validation(self):
        with pytest.raises(ValueError):
            LoadingModel(p_fill=1.5)
        with pytest.raises(ValueError):
            LoadingModel(mean_atoms=30).probability(GRID)

    def test_mean_and_binomial_shape(self):
        counts = sample_loading_counts(GRID, LoadingModel(mean_atoms=6.4), 100_000,
                                       np.random.default_rng(1))
        assert abs(counts.mean() / 6.4 - 1) < 0.01
        k = np.arange(25)
        expected = 100_000 * stats.binom.pmf(k, 24, 6.4 / 24)
        observed = np.bincount(counts, minlength=25).astype(float)
        # pool sparse tail bins so every expected count is at least 5
        keep = expected >= 5
        obs = np.append(observed[keep], observed[~keep].sum())
        exp = np.append(expected[keep], expected[~keep].sum())
        assert stats.chisquare(obs, exp * obs.sum() / exp.sum()).pvalue > 0.01

    def test_single_draw_matches_vectorised(self):
        occ = sample_loading(GRID, LoadingModel(), np.random.default_rng(4))
        counts = sample_loading_counts(GRID, LoadingModel(), 1, np.random.default_rng(4))
        assert occ.count == counts[0]


class TestSelection:
    def test_prefilled(self):
        occ = Occupancy.from_sites(GRID, [11, 12, 3])
        rep = select_targets(occ, TargetPattern(frozenset({11, 12})))
        assert rep.feasible and rep.required_moves == 0 and rep.surplus == 1

    def test_infeasible(self):
        rep = select_targets(Occupancy.from_sites(GRID, [0]), TargetPattern(frozenset({11, 12})))
        assert not rep.feasible

    def test_surplus(self):
        occ = Occupancy.from_sites(GRID, range(6))
        rep = select_targets(occ, TargetPattern(frozenset({10, 11, 12})))
        assert rep.feasible and rep.surplus == 3 and rep.required_moves == 3


class TestAssignment:
    def test_source_on_target(self):
        a = plan_assignment([11], [11], GRID)
        assert a.moves == () and a.cost == 0.0

    def test_reversed_line(self):
        src, tgt = [0, 1, 2], [5, 6, 7]
        assert plan_assignment(src, tgt, GRID).cost == brute_force_cost(src, tgt, GRID)

    def test_cardinality(self):
        with pytest.raises(InfeasiblePatternError):
            plan_assignment([0], [1, 2], GRID)

    def test_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            src, tgt = random_instance(rng)
            assert plan_assignment(src, tgt, GRID).cost == brute_force_cost(src, tgt, GRID)

    def test_tie_break_deterministic(self):
        a = plan_assignment([0, 2], [1], GRID)
        b = plan_assignment([2, 0], [1], GRID)
        assert a == b and a.pairs == ((0, 1),)


class TestPaths:
    def test_empty_grid_straight(self):
        p = plan_path(0, 23, [], GRID)
        assert len(p) == 2
        assert np.sum(np.hypot(*np.diff(p, axis=0).T)) == pytest.approx(math.dist(GRID.position(0),
                                                                                   GRID.position(23)))

    def test_detour_around_blocker(self):
        p = plan_path(8, 10, [8, 9, 10], GRID)
        length = np.sum(np.hypot(*np.diff(p, axis=0).T))
        assert length > 2 * GRID.pitch_x
        assert min_clearance(p, [GRID.position(9)]) > DEFAULT_EXCLUSION_RADIUS
        assert p[0] == pytest.approx(GRID.position(8)) and p[-1] == pytest.approx(GRID.position(10))

    def test_enclosed_destination(self):
        ring = [0, 1, 2, 8, 10, 16, 17, 18]
        with pytest.raises(NoPathError):
            plan_path(23, 9, ring + [23], GRID, exclusion_radius=3.0e-6)

    def test_same_site_rejected(self):
        with pytest.raises(ValueError):
            plan_path(3, 3, [], GRID)

    def test_random_paths_keep_clearance(self):
        rng = np.random.default_rng(7)
        for _ in range(150):
            occ = rng.choice(24, int(rng.integers(3, 12)), replace=False).tolist()
            a, b = int(occ[0]), int(rng.choice([s for s in range(24) if s not in occ]))
            try:
                p = plan_path(a, b, occ, GRID)
            except NoPathError:
                continue
            obstacles = [GRID.position(s) for s in occ if s not in (a, b)]
            assert min_clearance(p, obstacles) > DEFAULT_EXCLUSION_RADIUS

    def test_discard_point_outside_grid(self):
        assert discard_point_local(0, GRID)[1] == pytest.approx(-2 * GRID.pitch_y)
        assert discard_point_local(23, GRID)[1] == pytest.approx(4 * GRID.pitch_y)


class TestSortPlan:
    def test_prefilled_pattern_has_no_moves(self):
        occ = Occupancy.from_sites(GRID, [11, 12, 0])
        plan = build_sort_plan(occ, TargetPattern(frozenset({11, 12})), GRID)
        assert plan.moves == ()
        assert len(plan.discards) == 1 and plan.discards[0].is_discard

    def test_move_invariants(self):
        occ = Occupancy.from_sites(GRID, [0, 7, 16, 23])
        plan = build_sort_plan(occ, TargetPattern.centered_row(GRID, 3), GRID)
        for m in plan.moves:
            assert m.path[0] == pytest.approx(tuple(GRID.position(m.from_site)))
            assert m.path[-1] == pytest.approx(tuple(GRID.position(m.to_site)))
            assert m.duration == pytest.approx(m.length / 5e-3 + 2 * 0.010, rel=1e-12)
        assert plan.duration == pytest.approx(sum(m.duration for m in plan.moves))

    def test_infeasible(self):
        with pytest.raises(InfeasiblePatternError):
            build_sort_plan(Occupancy.from_sites(GRID, [0]), TargetPattern.centered_row(GRID, 2), GRID)

    def test_loss_free_post_state(self):
        rng = np.random.default_rng(99)
        checked = 0
        for _ in range(1000):
            occ = Occupancy(tuple(rng.random(24) < rng.uniform(0.15, 0.6)))
            pattern = TargetPattern.centered_row(GRID, int(rng.integers(1, 8)))
            if occ.count < len(pattern):
                continue
            plan = build_sort_plan(occ, pattern, GRID)
            final = plan.apply(occ)
            assert set(final.sites) == pattern.sites
            assert set(plan.apply(occ, include_discards=False).sites) >= pattern.sites
            checked += 1
        assert checked > 800

    @settings(max_examples=40)
    @given(st.sets(st.integers(0, 23), min_size=2, max_size=12), st.integers(1, 6))
    def test_moves_never_target_occupied_sites(self, sites, n):
        occ = Occupancy.from_sites(GRID, sites)
        pattern = TargetPattern.centered_row(GRID, min(n, len(sites)))
        plan = build_sort_plan(occ, pattern, GRID)
        plan.apply(occ)  # raises on any collision with an occupied site


class TestExecution:
    def test_loss_free(self):
        occ = Occupancy.from_sites(GRID, [0, 23, 5])
        pattern = TargetPattern.centered_row(GRID, 2)
        plan = build_sort_plan(occ, pattern, GRID, discards=False)
        loss = LossModel.lossless()
        out = simulate_execution(occ, plan, loss, np.random.default_rng(0), GRID, pattern)
        assert out.success and out.retries == 0
        assert out.elapsed == pytest.approx(plan.duration + loss.image_time)
        assert set(out.final.sites) == pattern.sites

    def test_zero_handoff(self):
        pattern = TargetPattern.centered_row(GRID, 2)
        loss = LossModel(trap_lifetime=np.inf, handoff_success=0.0)
        for sites, ok in (([11, 12, 0], True), ([0, 1, 2, 3], False)):
            occ = Occupancy.from_sites(GRID, sites)
            plan = build_sort_plan(occ, pattern, GRID, discards=False)
            out = simulate_execution(occ, plan, loss, np.random.default_rng(1), GRID, pattern)
            assert out.success is ok

    def test_retry_cap_is_failure_not_error(self):
        pattern = TargetPattern.centered_row(GRID, 2)
        occ = Occupancy.from_sites(GRID, list(range(8)) + list(range(16, 24)))
        loss = LossModel(trap_lifetime=np.inf, handoff_success=0.0)
        plan = build_sort_plan(occ, pattern, GRID, discards=False)
        out = simulate_execution(occ, plan, loss, np.random.default_rng(2), GRID, pattern, max_retries=3)
        assert not out.success and out.retries == 3 and "retry" in out.reason

    def test_loss_model_validation(self):
        with pytest.raises(ValueError):
            LossModel(handoff_success=1.2)
        with pytest.raises(ValueError):
            LossModel(image_time=-1.0)
        assert LossModel(trap_lifetime=30).survival(30) == pytest.approx(np.exp(-1))


class TestStatistics:
    def test_loss_free_estimate(self):
        sc = Scenario(loading=LoadingModel(p_fill=1.0), loss=LossModel.lossless())
        est = estimate_success(sc, 50, seed=3)
        assert est.p == 1.0 and est.ci_high == 1.0

    def test_zero_handoff_only_prefilled_succeed(self):
        sc = Scenario(loss=LossModel(trap_lifetime=np.inf, handoff_success=0.0))
        trials = 300
        pre = sum(sc.pattern.is_filled(sample_loading(sc.grid, sc.loading, trial_rng(5, i)))
                  for i in range(trials))
        assert estimate_success(sc, trials, seed=5).successes == pre
        empty = Scenario(loading=LoadingModel(p_fill=0.0), loss=sc.loss)
        assert estimate_success(empty, 20, seed=5).p == 0.0

    def test_seed_determinism(self):
        sc = Scenario()
        a = estimate_success(sc, 200, seed=42)
        b = estimate_success(sc, 200, seed=42)
        assert a == b

    def test_trial_streams_independent_of_order(self):
        fwd = [trial_rng(8, i).random() for i in range(5)]
        rev = [trial_rng(8, i).random() for i in reversed(range(5))][::-1]
        assert fwd == rev

    def test_monotone_in_target_size(self):
        rows = success_curve(Scenario(), range(1, 8), 400, seed=17)
        for (n1, p1, lo1, hi1, *_), (n2, p2, lo2, hi2, *_) in zip(rows, rows[1:]):
            assert p2 <= p1 or lo1 <= hi2  # overlapping intervals allowed

    def test_wilson(self):
        lo, hi = wilson_interval(50, 100)
        assert lo < 0.5 < hi
        assert wilson_interval(10, 10)[1] == 1.0

    def test_baseline(self):
        for n, p in BASELINE_ANCHORS.items():
            assert probabilistic_baseline(n) == pytest.approx(p, rel=0.5)
        assert probabilistic_baseline(2) == pytest.approx(0.02998, rel=1e-3)
        assert probabilistic_baseline(4) == pytest.approx(9.04e-4, rel=1e-2)
        vals = [probabilistic_baseline(n) for n in range(1, 12)]
        assert all(b < a for a, b in zip(vals, vals[1:]))
        with pytest.raises(ValueError):
            probabilistic_baseline(0)

    def test_ratio_identity(self):
        p = float(probabilistic_baseline(3))
        assert improvement_ratio(3, Scenario(), p_tweezer=p) == pytest.approx(1.0)

    def test_calibration_recovers_frozen_value(self):
        sc = Scenario()
        h = calibrate_handoff(sc, trials=2000, seed=20250, grid=(0.60, 0.61, 0.62, 0.63, 0.64))
        assert h == 0.62
