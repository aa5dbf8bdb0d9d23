"""JSON artifacts and CSV tables with ``#`` metadata headers.

Every record carries a ``kind`` tag.  ``load_json`` rebuilds the object and
re-runs its validation, so a saved artifact either round-trips unchanged or
fails loudly.  Output is byte-stable: keys are sorted and floats use
``repr``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .assembly import ExecutionOutcome, GridSpec, Move, Occupancy, SortPlan, SuccessEstimate
from .assembly import TargetPattern
from .experiments import FitResult, ScanResult


def _num(v: float):
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def grid_to_dict(grid: GridSpec) -> dict:
    d = asdict(grid)
    d["origin"] = [float(v) for v in grid.origin]
    return {"kind": "grid", **d}


def grid_from_dict(d: Mapping) -> GridSpec:
    _expect(d, "grid")
    return GridSpec(int(d["rows"]), int(d["cols"]), float(d["pitch_x"]), float(d["pitch_y"]),
                    tuple(float(v) for v in d["origin"]), float(d["rotation"]))


def occupancy_to_dict(occ: Occupancy, grid: GridSpec) -> dict:
    return {"kind": "occupancy", "grid": grid_to_dict(grid),
            "filled": "".join("1" if f else "0" for f in occ.filled)}


def occupancy_from_dict(d: Mapping) -> tuple[Occupancy, GridSpec]:
    _expect(d, "occupancy")
    grid = grid_from_dict(d["grid"])
    bits = d["filled"]
    if set(bits) - {"0", "1"}:
        raise ValueError("occupancy 'filled' must be a string of 0/1 characters")
    occ = Occupancy(tuple(c == "1" for c in bits))
    occ.check(grid)
    return occ, grid


def pattern_to_dict(pattern: TargetPattern) -> dict:
    return {"kind": "pattern", "sites": sorted(pattern.sites)}


def pattern_from_dict(d: Mapping) -> TargetPattern:
    _expect(d, "pattern")
    return TargetPattern(frozenset(int(s) for s in d["sites"]))


def _move_to_dict(m: Move) -> dict:
    return {"from_site": m.from_site, "to_site": m.to_site,
            "path": [[float(x), float(y)] for x, y in m.path], "duration": float(m.duration)}


def _move_from_dict(d: Mapping) -> Move:
    to = d["to_site"]
    return Move(int(d["from_site"]), None if to is None else int(to),
                tuple((float(x), float(y)) for x, y in d["path"]), float(d["duration"]))


def plan_to_dict(plan: SortPlan) -> dict:
    return {"kind": "sort_plan", "moves": [_move_to_dict(m) for m in plan.moves],
            "discards": [_move_to_dict(m) for m in plan.discards],
            "duration": float(plan.duration)}


def plan_from_dict(d: Mapping) -> SortPlan:
    _expect(d, "sort_plan")
    plan = SortPlan(tuple(_move_from_dict(m) for m in d["moves"]),
                    tuple(_move_from_dict(m) for m in d["discards"]))
    if "duration" in d and not math.isclose(plan.duration, float(d["duration"]), rel_tol=1e-12,
                                            abs_tol=1e-15):
        raise ValueError("stored plan duration disagrees with its moves")
    return plan


def outcome_to_dict(out: ExecutionOutcome, grid: GridSpec) -> dict:
    return {"kind": "outcome", "final": occupancy_to_dict(out.final, grid), "success": out.success,
            "elapsed": float(out.elapsed), "retries": int(out.retries), "reason": out.reason}


def outcome_from_dict(d: Mapping) -> ExecutionOutcome:
    _expect(d, "outcome")
    occ, _ = occupancy_from_dict(d["final"])
    return ExecutionOutcome(occ, bool(d["success"]), float(d["elapsed"]), int(d["retries"]),
                            d.get("reason", ""))


def estimate_to_dict(est: SuccessEstimate, **meta) -> dict:
    return {"kind": "success_estimate", "p": est.p, "ci_low": est.ci_low, "ci_high": est.ci_high,
            "successes": est.successes, "trials": est.trials, "meta": meta}


def estimate_from_dict(d: Mapping) -> SuccessEstimate:
    _expect(d, "success_estimate")
    est = SuccessEstimate(float(d["p"]), float(d["ci_low"]), float(d["ci_high"]),
                          int(d["successes"]), int(d["trials"]))
    if not (0 <= est.successes <= est.trials and est.ci_low <= est.p <= est.ci_high):
        raise ValueError("inconsistent success estimate")
    return est


def _expect(d: Mapping, kind: str) -> None:
    if not isinstance(d, Mapping) or d.get("kind") != kind:
        raise ValueError(f"expected a '{kind}' record")


_LOADERS = {
    "grid": grid_from_dict,
    "occupancy": occupancy_from_dict,
    "pattern": pattern_from_dict,
    "sort_plan": plan_from_dict,
    "outcome": outcome_from_dict,
    "success_estimate": estimate_from_dict,
    "scan": ScanResult.from_dict,
    "fit": FitResult.from_dict,
}


def from_record(d: Mapping) -> Any:
    kind = d.get("kind") if isinstance(d, Mapping) else None
    if kind not in _LOADERS:
        raise ValueError(f"unknown record kind {kind!r}")
    return _LOADERS[kind](d)


def dumps(record: Mapping) -> str:
    return json.dumps(record, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, record: Mapping) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = dumps(record)
    # refuse to write anything that would not load back
    from_record(json.loads(text))
    path.write_text(text, encoding="utf-8")
    return path


def load_json(path) -> Any:
    return from_record(json.loads(Path(path).read_text(encoding="utf-8")))


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    try:
        return repr(float(v)) if not isinstance(v, str) else v
    except (TypeError, ValueError):
        return str(v)


def format_csv(columns: Sequence[str], rows: Iterable[Sequence], meta: Mapping[str, Any]) -> str:
    buf = io.StringIO()
    for k in meta:
        buf.write(f"# {k}: {meta[k]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], meta: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_csv(columns, rows, meta), encoding="utf-8")
    return path


def read_csv(path) -> tuple[dict[str, str], list[str], list[list[str]]]:
    """Returns ``(meta, columns, rows)``; values stay strings."""
    meta, body = {}, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition(":")
            meta[k.strip()] = v.strip()
        elif line:
            body.append(line)
    rows = list(csv.reader(body))
    return meta, rows[0], rows[1:]
