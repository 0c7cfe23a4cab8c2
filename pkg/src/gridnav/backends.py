"""Decision backends: anything that maps the agent's situation to one action.

The frontier explorer and the shortest-path oracle are deterministic stand-ins
for the vision-language model; :mod:`gridnav.vlmclient` provides the remote one.
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

from .errors import NoPathError
from .scenegraph import SceneGraph, render, render_observation
from .search import cost_to_go, disk_offsets, first_action, greedy_action, within_radius
from .world import Action, Cell, Observation, Pose


class Mode(enum.Enum):
    EXPLORATION = "exploration"
    DEPLOYMENT = "deployment"


@dataclass
class DecisionContext:
    mode: Mode
    pose: Pose
    graph: SceneGraph
    observation: Optional[Observation] = None
    constraints: tuple = ()
    task: Optional[str] = None
    subtask: object = None  # plan.Subtask during deployment
    goal_radius_cells: float = 0.0
    range_cells: int = 10
    _images: dict = field(default_factory=dict, repr=False)

    def graph_image(self) -> bytes:
        # rendered lazily: only the remote backend looks at pixels
        if "graph" not in self._images:
            self._images["graph"] = render(self.graph)
        return self._images["graph"]

    def view_image(self) -> bytes:
        if "view" not in self._images:
            if self.observation is None:
                raise ValueError("no observation to render")
            self._images["view"] = render_observation(self.observation, self.range_cells)
        return self._images["view"]


class DecisionBackend(Protocol):
    def decide(self, ctx: DecisionContext) -> Action: ...


class FrontierBackend:
    """Walk to the nearest frontier, stop when none is left."""

    def decide(self, ctx: DecisionContext) -> Action:
        graph = ctx.graph
        frontier = set(graph.frontiers())
        if not frontier:
            return Action.STOP
        res = first_action(ctx.pose, graph.is_navigable, lambda p: p.cell in frontier)
        if res is None:
            return Action.STOP
        if res.action is not None:
            return res.action
        # standing on a frontier: turn until an Unknown neighbour is ahead
        here = ctx.pose.cell
        res = first_action(
            ctx.pose,
            lambda c: False,
            lambda p: p.cell == here and graph.is_unknown(p.ahead()),
        )
        if res is None or res.action is None:
            return Action.STOP
        return res.action


def frontier_backend() -> FrontierBackend:
    return FrontierBackend()


GoalResolver = Callable[[object, SceneGraph], set]


def resolve_target(subtask, graph: SceneGraph) -> set[Cell]:
    """Default goal resolver: landmark cell, region cells, or an explicit cell."""
    target = getattr(subtask, "target", subtask)
    if target is None:
        return set()
    if isinstance(target, tuple):
        return {target}
    if target.startswith("@"):
        x, y = target[1:].split(",")
        return {(int(x), int(y))}
    if target in graph.landmarks:
        return {graph.landmarks[target].cell}
    if target in graph.regions:
        return set(graph.regions[target].cells)
    return set()


class OracleBackend:
    """Shortest known-navigable route to the current subtask's goal.

    The cost-to-go field for a (graph, goal) pair is computed once and reused
    for every later decision toward the same goal.
    """

    def __init__(self, goal_resolver: GoalResolver = resolve_target, max_fields: int = 16):
        self.goal_resolver = goal_resolver
        self.max_fields = max_fields
        self._fields: dict = {}
        self._lock = threading.Lock()

    def _field(self, graph: SceneGraph, goals: frozenset, radius: float) -> dict:
        key = (graph.width, graph.knowledge, goals, radius)
        with self._lock:
            field = self._fields.get(key)
        if field is None:
            field = cost_to_go(goal_region(goals, radius, graph), graph.is_navigable)
            with self._lock:
                if len(self._fields) >= self.max_fields:
                    self._fields.pop(next(iter(self._fields)))
                self._fields[key] = field
        return field

    def decide(self, ctx: DecisionContext) -> Action:
        goals = frozenset(self.goal_resolver(ctx.subtask, ctx.graph))
        if not goals:
            raise NoPathError(f"no goal cells for {ctx.subtask!r}")
        radius = ctx.goal_radius_cells
        if within_radius(ctx.pose.cell, goals, radius):
            return Action.STOP
        field = self._field(ctx.graph, goals, radius)
        action = greedy_action(ctx.pose, field, ctx.graph.is_navigable)
        if action is None:
            raise NoPathError(f"goal {sorted(goals)[:3]} unreachable from {ctx.pose} in known cells")
        return action


def goal_region(goals: set[Cell], radius: float, graph: SceneGraph) -> set[Cell]:
    """Navigable cells within ``radius`` (Euclidean, cells) of any goal cell."""
    offsets = disk_offsets(radius)
    out = set()
    for gx, gy in goals:
        for dx, dy in offsets:
            c = (gx + dx, gy + dy)
            if graph.is_navigable(c):
                out.add(c)
    return out


def oracle_backend(goal_resolver: GoalResolver = resolve_target) -> OracleBackend:
    return OracleBackend(goal_resolver)


class ScriptedBackend:
    """Replays a fixed action list; handy for tests and dry runs."""

    def __init__(self, actions):
        self.actions = list(actions)
        self.calls = 0

    def decide(self, ctx: DecisionContext) -> Action:
        action = self.actions[self.calls] if self.calls < len(self.actions) else Action.STOP
        self.calls += 1
        return action
