"""Shortest action sequences over (cell, heading) states.

Cost is lexicographic ``(moves, turns)`` so the number of forward moves always
matches a plain cell BFS; turns only break ties between equally short routes.
"""

from __future__ import annotations

import heapq
from collections import deque
from typing import Callable, Iterable, Optional

from .world import Action, Cell, Heading, Pose

# bit order doubles as tie-break preference
_PREFERENCE = (Action.MOVE_FORWARD, Action.TURN_LEFT, Action.TURN_RIGHT)
_BIT = {a: 1 << i for i, a in enumerate(_PREFERENCE)}


def successors(pose: Pose, passable: Callable[[Cell], bool]):
    """Yield ``(action, next_pose, cost)`` for the three motion actions."""
    nxt = pose.ahead()
    if passable(nxt):
        yield Action.MOVE_FORWARD, Pose(nxt[0], nxt[1], pose.heading), (1, 0)
    yield Action.TURN_LEFT, Pose(pose.x, pose.y, pose.heading.left()), (0, 1)
    yield Action.TURN_RIGHT, Pose(pose.x, pose.y, pose.heading.right()), (0, 1)


def preferred(mask: int) -> Optional[Action]:
    for action in _PREFERENCE:
        if mask & _BIT[action]:
            return action
    return None


class SearchResult:
    __slots__ = ("action", "goal", "cost")

    def __init__(self, action: Optional[Action], goal: Pose, cost: tuple[int, int]):
        self.action = action  # None when the start already satisfies the goal
        self.goal = goal
        self.cost = cost


def first_action(
    start: Pose,
    passable: Callable[[Cell], bool],
    is_goal: Callable[[Pose], bool],
) -> Optional[SearchResult]:
    """Dijkstra from ``start`` to the cheapest goal pose.

    Among equal-cost goals the smallest ``(y, x)`` cell wins; among equal-cost
    routes to that cell the first action prefers forward, then left, then right.
    Returns ``None`` when no goal is reachable.
    """
    if is_goal(start):
        return SearchResult(None, start, (0, 0))

    best: dict[Pose, tuple[int, int]] = {start: (0, 0)}
    masks: dict[Pose, int] = {start: 0}
    heap: list = [((0, 0), start.y, start.x, int(start.heading), start)]
    done: set[Pose] = set()
    found_cost = None
    found: list[Pose] = []

    while heap:
        cost, _, _, _, pose = heapq.heappop(heap)
        if pose in done:
            continue
        if found_cost is not None and cost > found_cost:
            break
        done.add(pose)
        if pose is not start and is_goal(pose):
            found_cost = cost
            found.append(pose)
            continue
        for action, nxt, step_cost in successors(pose, passable):
            ncost = (cost[0] + step_cost[0], cost[1] + step_cost[1])
            nmask = _BIT[action] if pose == start else masks[pose]
            old = best.get(nxt)
            if old is None or ncost < old:
                best[nxt] = ncost
                masks[nxt] = nmask
                heapq.heappush(heap, (ncost, nxt.y, nxt.x, int(nxt.heading), nxt))
            elif ncost == old:
                masks[nxt] |= nmask

    if not found:
        return None
    cell = min((p.cell for p in found), key=lambda c: (c[1], c[0]))
    mask = 0
    goal = None
    for p in found:
        if p.cell == cell:
            mask |= masks[p]
            if goal is None or int(p.heading) < int(goal.heading):
                goal = p
    return SearchResult(preferred(mask), goal, found_cost)


State = tuple[int, int, int]  # x, y, heading


def cost_to_go(goals: Iterable[Cell], passable: Callable[[Cell], bool]) -> dict[State, tuple[int, int]]:
    """Reverse Dijkstra: cheapest ``(moves, turns)`` from every state to any goal cell.

    Goal cells count as reached in any heading. States that cannot reach a goal
    are absent from the result.
    """
    dist: dict[State, tuple[int, int]] = {}
    heap: list = []
    for x, y in goals:
        for h in range(4):
            dist[(x, y, h)] = (0, 0)
            heap.append(((0, 0), x, y, h))
    heapq.heapify(heap)

    def relax(state: State, cost: tuple[int, int]) -> None:
        old = dist.get(state)
        if old is None or cost < old:
            dist[state] = cost
            heapq.heappush(heap, (cost, *state))

    while heap:
        cost, x, y, h = heapq.heappop(heap)
        if dist[(x, y, h)] < cost:
            continue
        dx, dy = Heading(h).vector
        if passable((x - dx, y - dy)):
            relax((x - dx, y - dy, h), (cost[0] + 1, cost[1]))
        # a left turn reaches h from h+1, a right turn from h-1
        relax((x, y, (h + 1) % 4), (cost[0], cost[1] + 1))
        relax((x, y, (h - 1) % 4), (cost[0], cost[1] + 1))
    return dist


def greedy_action(pose: Pose, field: dict[State, tuple[int, int]], passable: Callable[[Cell], bool]) -> Optional[Action]:
    """Cheapest first action under a :func:`cost_to_go` field; forward, left, right on ties.

    None when ``pose`` is already on a goal cell or cannot reach one.
    """
    if field.get((pose.x, pose.y, int(pose.heading))) == (0, 0):
        return None
    best = None
    for action, nxt, step_cost in successors(pose, passable):
        rest = field.get((nxt.x, nxt.y, int(nxt.heading)))
        if rest is None:
            continue
        total = (step_cost[0] + rest[0], step_cost[1] + rest[1])
        if best is None or total < best[0]:
            best = (total, action)
    return None if best is None else best[1]


def action_between(a: Pose, b: Pose) -> Optional[Action]:
    """The single action turning pose ``a`` into pose ``b``, if there is one."""
    if a.cell == b.cell:
        if b.heading == a.heading.left():
            return Action.TURN_LEFT
        if b.heading == a.heading.right():
            return Action.TURN_RIGHT
        return None
    if a.heading == b.heading and a.ahead() == b.cell:
        return Action.MOVE_FORWARD
    return None


def rotation_bridge(frm: Heading, to: Heading) -> list[Heading]:
    """Intermediate headings when rotating in place; 180 degrees turns left twice."""
    diff = (int(to) - int(frm)) % 4
    if diff == 2:
        return [frm.left()]
    return []


def cell_distances(sources: Iterable[Cell], passable: Callable[[Cell], bool]) -> dict[Cell, int]:
    """Plain 4-connected BFS move counts from a set of source cells."""
    dist: dict[Cell, int] = {}
    queue: deque[Cell] = deque()
    for s in sources:
        if s not in dist:
            dist[s] = 0
            queue.append(s)
    while queue:
        x, y = queue.popleft()
        d = dist[(x, y)] + 1
        for nxt in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if nxt not in dist and passable(nxt):
                dist[nxt] = d
                queue.append(nxt)
    return dist


def disk_offsets(radius: float) -> list[Cell]:
    r = int(radius)
    r2 = radius * radius + 1e-9
    return [(dx, dy) for dy in range(-r, r + 1) for dx in range(-r, r + 1) if dx * dx + dy * dy <= r2]


def within_radius(cell: Cell, goals: Iterable[Cell], radius: float) -> bool:
    r2 = radius * radius + 1e-9
    return any((cell[0] - g[0]) ** 2 + (cell[1] - g[1]) ** 2 <= r2 for g in goals)
