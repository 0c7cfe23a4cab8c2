"""Exploration loop: observe, ask the backend, act, merge; repeat until done."""

from __future__ import annotations

import enum
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

from .backends import DecisionBackend, DecisionContext, Mode
from .errors import BackendError, UnparseableActionError
from .scenegraph import (
    DEFAULT_VOID_THRESHOLD,
    CoverageReport,
    SceneGraph,
    coverage,
    delta_from_observation,
    merge,
)
from .world import Action, GridWorld, Pose, StepOutcome, observe, pose_in_world, step

log = logging.getLogger(__name__)

DEFAULT_WALL_CLOCK_S = 3600.0


class Termination(enum.Enum):
    BUDGET_EXHAUSTED = "budget_exhausted"
    COVERAGE_SUFFICIENT = "coverage_sufficient"
    BACKEND_STOPPED = "backend_stopped"


@dataclass
class ExplorationConfig:
    max_steps: Optional[int] = None
    wall_clock_limit: Optional[float] = None
    fov_deg: float = 120.0
    range_cells: int = 10
    void_threshold: int = DEFAULT_VOID_THRESHOLD
    constraints: tuple = ()

    def __post_init__(self):
        if self.max_steps is None and self.wall_clock_limit is None:
            self.wall_clock_limit = DEFAULT_WALL_CLOCK_S
        if self.max_steps is not None and self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        if self.wall_clock_limit is not None and self.wall_clock_limit <= 0:
            raise ValueError("wall_clock_limit must be positive")


@dataclass
class ExplorationResult:
    graph: SceneGraph
    steps_taken: int
    termination: Termination
    backend_calls: int
    coverage: CoverageReport = field(repr=False, default=None)
    blocked_moves: int = 0

    def to_json(self) -> dict:
        return {
            "steps_taken": self.steps_taken,
            "termination": self.termination.value,
            "backend_calls": self.backend_calls,
            "blocked_moves": self.blocked_moves,
            "known_cells": self.graph.known_count(),
            "trajectory_length": len(self.graph.trajectory),
            "coverage": self.coverage.to_json() if self.coverage else None,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def explore(
    world: GridWorld,
    start: Pose,
    backend: DecisionBackend,
    cfg: Optional[ExplorationConfig] = None,
    clock=time.monotonic,
) -> ExplorationResult:
    cfg = cfg or ExplorationConfig()
    if not pose_in_world(world, start):
        raise ValueError(f"start {start} is not a free cell")
    deadline = None if cfg.wall_clock_limit is None else clock() + cfg.wall_clock_limit

    graph = SceneGraph.empty(world.width, world.height, start, world.cell_size_m)
    pose = start
    obs = observe(world, pose, cfg.fov_deg, cfg.range_cells, step_index=0)
    graph = merge(graph, delta_from_observation(obs)).with_pose(pose)
    steps = calls = blocked = 0

    while True:
        report = coverage(graph, cfg.void_threshold)
        if report.sufficient:
            termination = Termination.COVERAGE_SUFFICIENT
            break
        if (cfg.max_steps is not None and steps >= cfg.max_steps) or (
            deadline is not None and clock() >= deadline
        ):
            termination = Termination.BUDGET_EXHAUSTED
            break
        ctx = DecisionContext(
            Mode.EXPLORATION,
            pose,
            graph,
            observation=obs,
            constraints=tuple(cfg.constraints),
            range_cells=cfg.range_cells,
        )
        calls += 1
        steps += 1
        try:
            action = backend.decide(ctx)
        except UnparseableActionError as exc:
            log.warning("unparseable backend reply, stopping: %s", exc)
            action = Action.STOP
        except BackendError as exc:
            exc.partial = ExplorationResult(
                graph, steps, Termination.BACKEND_STOPPED, calls, coverage(graph, cfg.void_threshold, world), blocked
            )
            raise
        if action is Action.STOP:
            termination = Termination.BACKEND_STOPPED
            break
        new_pose, outcome = step(world, pose, action)
        if outcome is StepOutcome.BLOCKED:
            blocked += 1
        obs = observe(world, new_pose, cfg.fov_deg, cfg.range_cells, step_index=steps)
        graph = merge(graph, delta_from_observation(obs))
        if new_pose != pose:
            graph = graph.with_pose(new_pose)
        pose = new_pose

    report = coverage(graph, cfg.void_threshold, world)
    return ExplorationResult(graph, steps, termination, calls, report, blocked)
