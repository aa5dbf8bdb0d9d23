"""Stochastic loading, rearrangement planning and lossy execution."""

from .execution import CALIBRATED_HANDOFF, ExecutionOutcome, LossModel, simulate_execution
from .grid import (GridSpec, LoadingModel, Occupancy, TargetPattern, sample_loading,
                   sample_loading_counts)
from .planning import (Assignment, FeasibilityReport, InfeasiblePatternError, Move, NoPathError,
                       SortPlan, build_sort_plan, plan_assignment, plan_path, select_targets)
from .statistics import (Scenario, SuccessEstimate, calibrate_handoff, estimate_success,
                         improvement_ratio, loading_histograms, probabilistic_baseline,
                         success_curve, wilson_interval)
