"""Deployment planner: decompose the task, replay cached routes, fall back to the backend.

Each tick tries, in order:

1. the task-level trajectory (looked up once, when the episode starts);
2. the subtask trajectory anchored near the current location (looked up once
   per subtask, the first time tier 1 cannot serve the tick);
3. the decision backend.

Finished subtask routes are written back to the subtask tier, and the task
entry is rebuilt from this episode's fragments whenever the episode learned
something new.
"""

from __future__ import annotations

import json
import logging
import random
import re
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

from .backends import DecisionBackend, DecisionContext, Mode, resolve_target
from .cache import CacheKey, Source, Trajectory, TrajectoryCache, trajectory_from_poses
from .errors import BackendError, ParseError, UnparseableActionError, UnresolvedTargetError
from .scenegraph import KnownKind, SceneGraph
from .search import cell_distances, first_action, within_radius
from .task import ConstraintSet, Subtask, SubtaskKind, TaskPrompt, as_prompt, normalize_prompt
from .world import Action, Cell, GridWorld, Heading, Observation, Pose, observe, step

log = logging.getLogger(__name__)

GOAL_RADIUS_CELLS = 12.0  # 3 m at 0.25 m per cell
LOCATION_TOLERANCE_CELLS = 2


# -- decomposition -----------------------------------------------------------

_CONNECTIVES = re.compile(r"\s*,?\s*\band then\b\s*|\s*,?\s*\bthen\b\s*|\s*,?\s*\band (?=return to\b)")
_COORD = re.compile(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)")


def split_clauses(text: str) -> list[str]:
    return [c.strip(" ,.") for c in _CONNECTIVES.split(normalize_prompt(text)) if c.strip(" ,.")]


def _candidates(graph: SceneGraph):
    # (match text, rank for ties, target id, kind); rank 0 prefers landmarks
    out = []
    for lid, lm in graph.landmarks.items():
        for text in {normalize_prompt(lm.name), normalize_prompt(lid.replace("_", " "))}:
            out.append((text, 0, lid, SubtaskKind.ROOM_TO_OBJECT))
    for rid, region in graph.regions.items():
        out.append((normalize_prompt(region.name), 1, rid, SubtaskKind.ROOM_TO_ROOM))
    return [c for c in out if len(c[0]) > 1]


def rule_decomposer(task, graph: SceneGraph) -> list[Subtask]:
    """Split on sequential connectives, map each clause to its longest graph match."""
    candidates = _candidates(graph)
    subtasks, unresolved = [], []
    for clause in split_clauses(as_prompt(task).text):
        coord = _COORD.search(clause)
        if coord:
            target = f"@{int(coord.group(1))},{int(coord.group(2))}"
            subtasks.append(Subtask(TaskPrompt(clause), SubtaskKind.OTHER, target))
            continue
        best = None
        for text, rank, tid, kind in candidates:
            if re.search(rf"\b{re.escape(text)}\b", clause):
                score = (-len(text), rank, tid)
                if best is None or score < best[0]:
                    best = (score, tid, kind)
        if best is None:
            unresolved.append(clause)
            continue
        subtasks.append(Subtask(TaskPrompt(clause), best[2], best[1]))
    if unresolved:
        raise UnresolvedTargetError(unresolved)
    return subtasks


Decomposer = Callable[[TaskPrompt, SceneGraph], list]


def decompose(task, graph: SceneGraph, decomposer: Optional[Decomposer] = None) -> list[Subtask]:
    task = as_prompt(task)
    subtasks = (decomposer or rule_decomposer)(task, graph)
    missing = [s.prompt.text for s in subtasks if s.target is not None and not resolve_target(s, graph)]
    if missing:
        raise UnresolvedTargetError(missing)
    return list(subtasks)


# -- planner state -----------------------------------------------------------


@dataclass
class PlanConfig:
    goal_radius_cells: float = GOAL_RADIUS_CELLS
    location_tolerance: int = LOCATION_TOLERANCE_CELLS
    max_steps: int = 500
    fov_deg: float = 120.0
    range_cells: int = 10
    unparseable_retries: int = 1
    # "wall" measures real time; "model" charges fixed latencies so reports are reproducible
    timing: str = "wall"
    call_latency_s: float = 2.0
    step_latency_s: float = 0.1


@dataclass
class TierCounts:
    task: int = 0
    subtask: int = 0
    fallback: int = 0

    def to_json(self) -> dict:
        return {"task": self.task, "subtask": self.subtask, "fallback": self.fallback}


@dataclass
class _ActivePlan:
    key: CacheKey
    traj: Trajectory
    cursor: int = 0


@dataclass
class PlanState:
    task: TaskPrompt
    subtasks: list
    pose: Pose
    current_subtask_index: int = 0
    executed: list = field(default_factory=list)
    backend_calls: int = 0
    cache_hits: TierCounts = field(default_factory=TierCounts)
    vetoed_moves: int = 0
    evicted_corrupt: int = 0
    # bookkeeping for cache replay and write-back
    started: bool = False
    task_plan: Optional[_ActivePlan] = None
    task_dirty: bool = False
    sub_plan: Optional[_ActivePlan] = None
    sub_looked_up: bool = False
    sub_used_backend: bool = False
    fragment: list = field(default_factory=list)
    fragments: list = field(default_factory=list)

    def __post_init__(self):
        if not self.executed:
            self.executed = [self.pose]
        if not self.fragment:
            self.fragment = [self.pose]

    @property
    def done(self) -> bool:
        return self.current_subtask_index >= len(self.subtasks)

    @property
    def current(self) -> Optional[Subtask]:
        return None if self.done else self.subtasks[self.current_subtask_index]

    def move_to(self, pose: Pose) -> None:
        if pose != self.pose:
            self.executed.append(pose)
            self.fragment.append(pose)
        self.pose = pose


# -- replay helpers ----------------------------------------------------------


def _rotate_toward(frm: Heading, to: Heading) -> Action:
    return Action.TURN_RIGHT if (int(to) - int(frm)) % 4 == 1 else Action.TURN_LEFT


def next_action(plan: _ActivePlan, pose: Pose, graph: Optional[SceneGraph] = None) -> Optional[Action]:
    """Next step along a cached trajectory from ``pose``, or None when it cannot serve.

    Only waypoints at or after the replay cursor are considered, so a route that
    passes the same cell twice is never replayed backwards. With a ``graph``, an
    off-route pose is steered onto the route through known navigable cells.
    """
    wps = plan.traj.waypoints
    last = len(wps) - 1
    for i in range(plan.cursor, last):
        if wps[i].cell != pose.cell:
            continue
        # waypoints i..j share this cell (in-place turns); resume at the matching heading
        j = i
        while j < last and wps[j + 1].cell == pose.cell:
            j += 1
        if j == last and wps[j].heading == pose.heading:
            break
        plan.cursor = i
        for k in range(j, i - 1, -1):
            if wps[k].heading == pose.heading and k < last:
                plan.cursor = k
                return _transition(wps[k], wps[k + 1])
        return _rotate_toward(pose.heading, wps[j].heading)
    if graph is None:
        return None
    route = {p.cell for p in wps[plan.cursor:-1]}
    if not route:
        return None
    res = first_action(pose, graph.is_navigable, lambda p: p.cell in route)
    return None if res is None else res.action


def _transition(a: Pose, b: Pose) -> Action:
    if a.cell != b.cell:
        return Action.MOVE_FORWARD
    return _rotate_toward(a.heading, b.heading)


def _usable(traj: Trajectory, graph: SceneGraph) -> bool:
    return not traj.problems() and all(graph.is_navigable(p.cell) for p in traj.waypoints)


def _goal_cells(subtask: Subtask, graph: SceneGraph) -> set[Cell]:
    return resolve_target(subtask, graph)


def _complete_subtasks(state: PlanState, graph: SceneGraph, cache: Optional[TrajectoryCache], cfg: PlanConfig):
    while not state.done:
        sub = state.current
        if not within_radius(state.pose.cell, _goal_cells(sub, graph), cfg.goal_radius_cells):
            return
        frag = trajectory_from_poses(state.fragment, source=Source.BACKEND)
        state.fragments.append(frag)
        if cache is not None:
            anchored = cache.peek_subtask(sub.prompt, frag.start.cell, 0)
            if state.sub_used_backend or anchored is None:
                cache.store(CacheKey.subtask(sub.prompt, frag.start.cell), frag)
            if state.task_dirty:
                _rebuild_task_entry(state, cache)
        state.current_subtask_index += 1
        state.fragment = [state.pose]
        state.sub_plan = None
        state.sub_looked_up = False
        state.sub_used_backend = False


def _rebuild_task_entry(state: PlanState, cache: TrajectoryCache) -> None:
    key = CacheKey.task(state.task)
    first, *rest = state.fragments
    cache.store(key, Trajectory(first.waypoints, first.created_at, Source.MERGED))
    for frag in rest:
        cache.merge_into_task(state.task, frag)


def _ask_backend(backend: DecisionBackend, ctx: DecisionContext, state: PlanState, retries: int) -> Action:
    attempt = 0
    while True:
        state.backend_calls += 1
        try:
            return backend.decide(ctx)
        except UnparseableActionError:
            if attempt >= retries:
                raise
            attempt += 1
            log.info("unparseable backend reply, retrying")


def plan_step(
    state: PlanState,
    graph: SceneGraph,
    cache: Optional[TrajectoryCache],
    backend: DecisionBackend,
    constraints: ConstraintSet | Sequence[str] = (),
    obs: Optional[Observation] = None,
    cfg: Optional[PlanConfig] = None,
) -> tuple[Action, PlanState]:
    cfg = cfg or PlanConfig()
    if not state.started:
        state.started = True
        if cache is not None:
            traj = cache.lookup_task(state.task)
            if traj is not None:
                key = CacheKey.task(state.task)
                if _usable(traj, graph):
                    state.task_plan = _ActivePlan(key, traj)
                else:
                    log.warning("evicting corrupt cache entry %s", key)
                    cache.evict(key)
                    state.evicted_corrupt += 1
        state.task_dirty = state.task_plan is None

    _complete_subtasks(state, graph, cache, cfg)
    if state.done:
        return Action.STOP, state
    sub = state.current
    pose = state.pose

    if state.task_plan is not None:
        action = next_action(state.task_plan, pose)
        if action is not None:
            state.cache_hits.task += 1
            return action, state

    if cache is not None and not state.sub_looked_up:
        state.sub_looked_up = True
        found = cache.find_subtask(sub.prompt, pose.cell, cfg.location_tolerance)
        if found is not None:
            key, traj = found
            if _usable(traj, graph):
                state.sub_plan = _ActivePlan(key, traj)
            else:
                log.warning("evicting corrupt cache entry %s", key)
                cache.evict(key)
                state.evicted_corrupt += 1
    if state.sub_plan is not None:
        action = next_action(state.sub_plan, pose, graph)
        if action is not None:
            state.cache_hits.subtask += 1
            return action, state

    # the backend's map shows this episode's start square and path, not the exploration route
    view = replace(graph, start=state.executed[0], trajectory=tuple(state.executed))
    ctx = DecisionContext(
        Mode.DEPLOYMENT,
        pose,
        view,
        observation=obs,
        constraints=tuple(constraints),
        task=state.task.text,
        subtask=sub,
        goal_radius_cells=cfg.goal_radius_cells,
        range_cells=cfg.range_cells,
    )
    action = _ask_backend(backend, ctx, state, cfg.unparseable_retries)
    state.cache_hits.fallback += 1
    state.sub_used_backend = True
    state.task_dirty = True
    if action is Action.MOVE_FORWARD:
        ahead = pose.ahead()
        if not graph.in_bounds(ahead) or graph.kind(ahead) is KnownKind.OBSTACLE:
            # unsafe proposal: never walk into a known obstacle
            state.vetoed_moves += 1
            action = Action.TURN_LEFT
    return action, state


# -- episodes ----------------------------------------------------------------


@dataclass
class Episode:
    id: str
    start: Pose
    instruction: str
    goal: object  # (x, y) cell or landmark id string
    constraints: tuple = ()

    def goal_cell(self, world: GridWorld) -> Cell:
        if isinstance(self.goal, tuple):
            return self.goal
        return world.landmarks[self.goal].cell

    def to_json(self) -> dict:
        goal = {"x": self.goal[0], "y": self.goal[1]} if isinstance(self.goal, tuple) else {"landmark": self.goal}
        return {
            "id": self.id,
            "start": self.start.to_json(),
            "goal": goal,
            "instruction": self.instruction,
            "constraints": list(self.constraints),
        }

    @classmethod
    def from_json(cls, obj) -> "Episode":
        try:
            goal = obj["goal"]
            if isinstance(goal, str):
                pass
            elif isinstance(goal, list):
                x, y = goal
                goal = (int(x), int(y))
            else:
                goal = goal["landmark"] if "landmark" in goal else (int(goal["x"]), int(goal["y"]))
            return cls(
                str(obj["id"]),
                Pose.from_json(obj["start"]),
                str(obj["instruction"]),
                goal,
                tuple(obj.get("constraints", ())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad episode {obj!r}: {exc}") from exc


def load_episodes(text: str | bytes) -> list[Episode]:
    try:
        obj = json.loads(text)
    except ValueError as exc:
        raise ParseError(f"episode file is not JSON: {exc}") from exc
    if isinstance(obj, dict):
        obj = obj.get("episodes", [obj])
    return [Episode.from_json(e) for e in obj]


@dataclass
class EpisodeRecord:
    episode_id: str
    instruction: str
    start: Pose
    goal: Cell
    subtasks: list
    trajectory: list
    stopped: bool
    status: str  # "stopped", "step_limit" or "error"
    steps: int
    backend_calls: int
    cache_hits: TierCounts
    subtasks_completed: int
    total_seconds: float
    vetoed_moves: int = 0
    error: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "instruction": self.instruction,
            "start": self.start.to_json(),
            "goal": list(self.goal),
            "subtasks": [s.to_json() for s in self.subtasks],
            "trajectory": [[p.x, p.y, p.heading.letter] for p in self.trajectory],
            "stopped": self.stopped,
            "status": self.status,
            "steps": self.steps,
            "backend_calls": self.backend_calls,
            "cache_hits": self.cache_hits.to_json(),
            "subtasks_completed": self.subtasks_completed,
            "total_seconds": round(self.total_seconds, 6),
            "vetoed_moves": self.vetoed_moves,
            "error": self.error,
        }


def run_episode(
    world: GridWorld,
    graph: SceneGraph,
    cache: Optional[TrajectoryCache],
    backend: DecisionBackend,
    decomposer: Optional[Decomposer],
    episode: Episode,
    cfg: Optional[PlanConfig] = None,
) -> EpisodeRecord:
    cfg = cfg or PlanConfig()
    t0 = time.perf_counter()
    if not world.is_free(episode.start.cell):
        raise ValueError(f"episode {episode.id}: start {episode.start} is not free")
    subtasks = decompose(episode.instruction, graph, decomposer)
    state = PlanState(TaskPrompt(episode.instruction), subtasks, episode.start)
    constraints = tuple(episode.constraints)

    stopped = False
    status = "step_limit"
    error = None
    steps = 0
    while steps < cfg.max_steps:
        obs = observe(world, state.pose, cfg.fov_deg, cfg.range_cells, step_index=steps)
        try:
            action, state = plan_step(state, graph, cache, backend, constraints, obs, cfg)
        except BackendError as exc:
            status, error = "error", str(exc)
            break
        steps += 1
        if action is Action.STOP:
            stopped, status = True, "stopped"
            break
        new_pose, _ = step(world, state.pose, action)
        state.move_to(new_pose)

    if cfg.timing == "model":
        total = state.backend_calls * cfg.call_latency_s + steps * cfg.step_latency_s
    else:
        total = time.perf_counter() - t0
    return EpisodeRecord(
        episode_id=episode.id,
        instruction=episode.instruction,
        start=episode.start,
        goal=episode.goal_cell(world),
        subtasks=subtasks,
        trajectory=list(state.executed),
        stopped=stopped,
        status=status,
        steps=steps,
        backend_calls=state.backend_calls,
        cache_hits=state.cache_hits,
        subtasks_completed=state.current_subtask_index,
        total_seconds=total,
        vetoed_moves=state.vetoed_moves,
        error=error,
    )


def random_episodes(world: GridWorld, n: int, seed: int = 0, min_cells: int = 1, prefix: str = "ep") -> list[Episode]:
    """``n`` solvable coordinate-goal episodes with random start headings."""
    rng = random.Random(seed)
    free = list(world.free_cells())
    out: list[Episode] = []
    while len(out) < n:
        start = rng.choice(free)
        reach = cell_distances([start], world.is_free)
        goals = sorted(c for c, d in reach.items() if d >= min_cells)
        if not goals:
            continue
        goal = rng.choice(goals)
        heading = Heading(rng.randrange(4))
        out.append(
            Episode(
                f"{prefix}{len(out):03d}",
                Pose(start[0], start[1], heading),
                f"go to ({goal[0]}, {goal[1]})",
                goal,
            )
        )
    return out
