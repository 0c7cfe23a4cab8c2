import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import full_graph
from gridnav.backends import (
    DecisionContext,
    Mode,
    OracleBackend,
    ScriptedBackend,
    frontier_backend,
    resolve_target,
)
from gridnav.errors import NoPathError
from gridnav.scenegraph import SceneGraph
from gridnav.search import (
    action_between,
    cell_distances,
    cost_to_go,
    first_action,
    greedy_action,
    rotation_bridge,
)
from gridnav.task import Subtask, SubtaskKind, TaskPrompt
from gridnav.world import Action, Heading, Pose, load_map, step


def walk(world, pose, choose, limit=500):
    """Apply ``choose(pose)`` until it returns None or Stop; count moves."""
    moves = 0
    for _ in range(limit):
        action = choose(pose)
        if action in (None, Action.STOP):
            return pose, moves
        nxt, _ = step(world, pose, action)
        moves += nxt.cell != pose.cell
        pose = nxt
    raise AssertionError("did not terminate")


grids = st.lists(st.lists(st.booleans(), min_size=6, max_size=6), min_size=6, max_size=6)


@settings(max_examples=60, deadline=None)
@given(grids, st.integers(0, 35), st.integers(0, 35), st.integers(0, 3))
def test_first_action_walk_matches_bfs(blocked, s, g, h):
    rows = ["".join("#" if b else "." for b in row) for row in blocked]
    start, goal = (s % 6, s // 6), (g % 6, g // 6)
    rows = [list(r) for r in rows]
    rows[start[1]][start[0]] = "."
    rows[goal[1]][goal[0]] = "."
    world = load_map("\n".join("".join(r) for r in rows) + "\n")
    dist = cell_distances([start], world.is_free)

    def choose(pose):
        res = first_action(pose, world.is_free, lambda p: p.cell == goal)
        return None if res is None else res.action

    if goal not in dist:
        assert first_action(Pose(*start, Heading(h)), world.is_free, lambda p: p.cell == goal) is None
        return
    end, moves = walk(world, Pose(*start, Heading(h)), choose)
    assert end.cell == goal and moves == dist[goal]

    field = cost_to_go([goal], world.is_free)
    end, moves = walk(world, Pose(*start, Heading(h)), lambda p: greedy_action(p, field, world.is_free))
    assert end.cell == goal and moves == dist[goal]


def test_first_action_tie_breaks_are_stable():
    world = load_map("...\n...\n...\n")
    # two equally short routes: forward is preferred over turning
    res = first_action(Pose(1, 2, Heading.NORTH), world.is_free, lambda p: p.cell in {(0, 0), (2, 0)})
    assert res.action is Action.MOVE_FORWARD
    assert res.goal.cell == (0, 0)  # smallest (y, x) goal cell
    res = first_action(Pose(1, 1, Heading.SOUTH), world.is_free, lambda p: p.cell == (1, 0))
    assert res.action is Action.TURN_LEFT  # about-face: left wins the tie with right


def test_action_between_and_rotation_bridge():
    assert action_between(Pose(0, 0, Heading.NORTH), Pose(0, 0, Heading.WEST)) is Action.TURN_LEFT
    assert action_between(Pose(0, 1, Heading.NORTH), Pose(0, 0, Heading.NORTH)) is Action.MOVE_FORWARD
    assert action_between(Pose(0, 1, Heading.EAST), Pose(0, 0, Heading.EAST)) is None
    assert action_between(Pose(0, 0, Heading.NORTH), Pose(0, 0, Heading.SOUTH)) is None
    assert rotation_bridge(Heading.NORTH, Heading.SOUTH) == [Heading.WEST]
    assert rotation_bridge(Heading.NORTH, Heading.EAST) == []


def _ctx(graph, pose, subtask=None, radius=0.0, mode=Mode.DEPLOYMENT):
    return DecisionContext(mode, pose, graph, subtask=subtask, goal_radius_cells=radius)


def test_frontier_backend_stops_on_complete_graph():
    assert frontier_backend().decide(_ctx(full_graph("open_11"), Pose(5, 5))) is Action.STOP


def test_frontier_backend_turns_toward_unknown_when_on_a_frontier():
    g = SceneGraph(3, 1, 0.25, b"ONU", Pose(1, 0, Heading.WEST))
    assert frontier_backend().decide(_ctx(g, Pose(1, 0, Heading.WEST))) in (Action.TURN_LEFT, Action.TURN_RIGHT)
    assert frontier_backend().decide(_ctx(g, Pose(1, 0, Heading.NORTH))) is Action.TURN_RIGHT


def test_oracle_stops_inside_radius_and_raises_when_unreachable():
    g = full_graph("two_room_15")
    sub = Subtask(TaskPrompt("go to (11, 7)"), SubtaskKind.OTHER, "@11,7")
    oracle = OracleBackend()
    assert oracle.decide(_ctx(g, Pose(10, 7), sub, radius=1)) is Action.STOP
    assert oracle.decide(_ctx(g, Pose(3, 7, Heading.EAST), sub)) is Action.MOVE_FORWARD
    closet = full_graph("sealed_closet")
    with pytest.raises(NoPathError):
        oracle.decide(_ctx(closet, Pose(2, 2), Subtask(TaskPrompt("x"), SubtaskKind.OTHER, "@9,2")))
    with pytest.raises(NoPathError):
        oracle.decide(_ctx(g, Pose(2, 2), Subtask(TaskPrompt("x"), SubtaskKind.OTHER, "nowhere")))


def test_resolve_target_forms():
    g = full_graph("apartment")
    assert resolve_target(Subtask(TaskPrompt("x"), SubtaskKind.OTHER, "@3,4"), g) == {(3, 4)}
    assert resolve_target(Subtask(TaskPrompt("x"), SubtaskKind.ROOM_TO_OBJECT, "sofa"), g) == {(2, 16)}
    assert (13, 2) in resolve_target(Subtask(TaskPrompt("x"), SubtaskKind.ROOM_TO_ROOM, "k"), g)
    assert resolve_target((1, 2), g) == {(1, 2)}


def test_scripted_backend_replays_then_stops():
    b = ScriptedBackend([Action.TURN_LEFT])
    ctx = _ctx(full_graph("open_11"), Pose(5, 5))
    assert [b.decide(ctx), b.decide(ctx)] == [Action.TURN_LEFT, Action.STOP]
    assert b.calls == 2
