"""Navigation metrics (NE, OS, SR, SPL) and cache-efficiency accounting."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

from .errors import UnreachableGoalError
from .search import cell_distances
from .world import Cell, GridWorld

SUCCESS_RADIUS_M = 3.0
_EPS = 1e-9


@dataclass(frozen=True)
class EpisodeMetrics:
    episode_id: str
    ne_m: float
    success: bool
    oracle_success: bool
    spl: float
    path_length_m: float
    shortest_path_m: float
    backend_calls: int
    steps: int
    avg_step_seconds: float
    total_seconds: float
    cost_usd: float

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SuiteMetrics:
    episodes: int
    ne_m: float
    os_pct: float
    sr_pct: float
    spl_pct: float
    backend_calls: int
    total_seconds: float
    avg_step_seconds: float
    cost_usd: float
    call_reduction_pct: Optional[float] = None
    time_reduction_pct: Optional[float] = None

    def to_json(self) -> dict:
        return asdict(self)


def cost_accounting(record, price_per_call_usd: float) -> float:
    if price_per_call_usd < 0:
        raise ValueError("price must be >= 0")
    calls = record if isinstance(record, int) else record.backend_calls
    return calls * price_per_call_usd


def _dist_m(a: Cell, b: Cell, cell_size_m: float) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1]) * cell_size_m


def shortest_path_cells(world: GridWorld, start: Cell, goal: Cell) -> int:
    dist = cell_distances([goal], world.is_free)
    if start not in dist:
        raise UnreachableGoalError(f"no free path from {start} to {goal}")
    return dist[start]


def episode_metrics(
    record,
    world: GridWorld,
    goal: Optional[Cell] = None,
    success_radius_m: float = SUCCESS_RADIUS_M,
    price_per_call_usd: float = 0.0,
) -> EpisodeMetrics:
    """Score one episode. Success needs an explicit Stop within the radius."""
    traj = record.trajectory
    if not traj:
        raise ValueError("empty trajectory")
    goal = record.goal if goal is None else goal
    size = world.cell_size_m
    ne = _dist_m(traj[-1].cell, goal, size)
    closest = min(_dist_m(p.cell, goal, size) for p in traj)
    moves = sum(1 for a, b in zip(traj, traj[1:]) if a.cell != b.cell)
    path = moves * size
    shortest = shortest_path_cells(world, traj[0].cell, goal) * size
    success = bool(record.stopped) and ne <= success_radius_m + _EPS
    if not success:
        spl = 0.0
    elif max(path, shortest) == 0:
        spl = 1.0
    else:
        spl = shortest / max(path, shortest)
    steps = record.steps
    return EpisodeMetrics(
        episode_id=record.episode_id,
        ne_m=ne,
        success=success,
        oracle_success=success or closest <= success_radius_m + _EPS,
        spl=spl,
        path_length_m=path,
        shortest_path_m=shortest,
        backend_calls=record.backend_calls,
        steps=steps,
        avg_step_seconds=record.total_seconds / steps if steps else 0.0,
        total_seconds=record.total_seconds,
        cost_usd=cost_accounting(record, price_per_call_usd),
    )


def reduction_pct(ours: float, baseline: float) -> float:
    if baseline == 0:
        return 0.0
    return 100.0 * (1.0 - ours / baseline)


def suite_metrics(records: Sequence[EpisodeMetrics], baseline: Optional[SuiteMetrics] = None) -> SuiteMetrics:
    if not records:
        raise ValueError("empty suite")
    n = len(records)
    calls = sum(r.backend_calls for r in records)
    total = sum(r.total_seconds for r in records)
    steps = sum(r.steps for r in records)
    out = SuiteMetrics(
        episodes=n,
        ne_m=sum(r.ne_m for r in records) / n,
        os_pct=100.0 * sum(r.oracle_success for r in records) / n,
        sr_pct=100.0 * sum(r.success for r in records) / n,
        spl_pct=100.0 * sum(r.spl for r in records) / n,
        backend_calls=calls,
        total_seconds=total,
        avg_step_seconds=total / steps if steps else 0.0,
        cost_usd=sum(r.cost_usd for r in records),
    )
    if baseline is not None:
        out = SuiteMetrics(
            **{
                **asdict(out),
                "call_reduction_pct": reduction_pct(calls, baseline.backend_calls),
                "time_reduction_pct": reduction_pct(total, baseline.total_seconds),
            }
        )
    return out


# -- reports -----------------------------------------------------------------

_COLUMNS = ("condition", "NE", "OS", "SR", "SPL", "calls", "time_s", "step_s", "cost", "calls_red", "time_red")


def _row(name: str, s: SuiteMetrics) -> list[str]:
    def pct(v):
        return "-" if v is None else f"{v:.1f}%"

    return [
        name,
        f"{s.ne_m:.2f}",
        f"{s.os_pct:.1f}",
        f"{s.sr_pct:.1f}",
        f"{s.spl_pct:.1f}",
        str(s.backend_calls),
        f"{s.total_seconds:.3f}",
        f"{s.avg_step_seconds:.3f}",
        f"{s.cost_usd:.3f}",
        pct(s.call_reduction_pct),
        pct(s.time_reduction_pct),
    ]


def text_report(rows: Sequence[tuple[str, SuiteMetrics]]) -> str:
    table = [list(_COLUMNS)] + [_row(name, s) for name, s in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(_COLUMNS))]
    lines = []
    for r in table:
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def json_report(rows: Sequence[tuple[str, SuiteMetrics]], episodes: Optional[dict] = None) -> str:
    obj = {"conditions": {name: s.to_json() for name, s in rows}}
    if episodes is not None:
        obj["episodes"] = {name: [m.to_json() for m in ms] for name, ms in episodes.items()}
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
