import itertools

import pytest

from conftest import load_fixture
from gridnav.backends import ScriptedBackend, frontier_backend
from gridnav.errors import ProtocolError, UnparseableActionError
from gridnav.explore import ExplorationConfig, Termination, explore
from gridnav.world import Action, Heading, Pose, default_start


class Raising:
    def __init__(self, exc, after=0):
        self.exc, self.after, self.calls = exc, after, 0

    def decide(self, ctx):
        self.calls += 1
        if self.calls > self.after:
            raise self.exc
        return Action.TURN_LEFT


def test_zero_budget_is_budget_exhausted():
    world = load_fixture("apartment")
    res = explore(world, default_start(world), frontier_backend(), ExplorationConfig(max_steps=0))
    assert res.termination is Termination.BUDGET_EXHAUSTED
    assert res.steps_taken == 0 and res.backend_calls == 0
    assert res.graph.known_count() > 0  # the first observation is merged before any decision


def test_step_budget_is_respected():
    world = load_fixture("rooms_48")
    res = explore(world, default_start(world), frontier_backend(), ExplorationConfig(max_steps=25))
    assert res.termination is Termination.BUDGET_EXHAUSTED
    assert res.steps_taken == 25


def test_wall_clock_budget_with_fake_clock():
    world = load_fixture("rooms_48")
    ticks = itertools.count()
    res = explore(world, default_start(world), frontier_backend(), ExplorationConfig(wall_clock_limit=10), clock=lambda: next(ticks))
    assert res.termination is Termination.BUDGET_EXHAUSTED
    assert res.steps_taken < 12


def test_backend_stop_ends_the_run():
    world = load_fixture("rooms_48")
    backend = ScriptedBackend([Action.TURN_LEFT, Action.MOVE_FORWARD, Action.STOP])
    res = explore(world, default_start(world), backend, ExplorationConfig(max_steps=100))
    assert res.termination is Termination.BACKEND_STOPPED
    assert res.backend_calls == 3


def test_blocked_moves_are_counted_not_fatal():
    world = load_fixture("two_room_15")
    backend = ScriptedBackend([Action.TURN_LEFT] + [Action.MOVE_FORWARD] * 5 + [Action.STOP])
    res = explore(world, Pose(3, 7, Heading.NORTH), backend, ExplorationConfig(max_steps=50))
    assert res.blocked_moves == 3  # two moves reach x=1, the wall stops the rest
    assert res.graph.trajectory[-1] == Pose(1, 7, Heading.WEST)


def test_unparseable_reply_is_treated_as_stop():
    world = load_fixture("apartment")
    res = explore(world, default_start(world), Raising(UnparseableActionError("hmm"), after=2), ExplorationConfig(max_steps=50))
    assert res.termination is Termination.BACKEND_STOPPED
    assert res.backend_calls == 3


def test_backend_error_carries_partial_result():
    world = load_fixture("apartment")
    with pytest.raises(ProtocolError) as info:
        explore(world, default_start(world), Raising(ProtocolError("HTTP 500"), after=4), ExplorationConfig(max_steps=50))
    partial = info.value.partial
    assert partial is not None and partial.backend_calls == 5
    assert partial.graph.known_count() > 0


def test_frontier_exploration_is_deterministic():
    world = load_fixture("office_32x24")
    a = explore(world, default_start(world), frontier_backend(), ExplorationConfig(max_steps=400))
    b = explore(world, default_start(world), frontier_backend(), ExplorationConfig(max_steps=400))
    assert a.dumps() == b.dumps()
    assert a.graph == b.graph


def test_sealed_closet_counts_only_reachable_space():
    world = load_fixture("sealed_closet")
    res = explore(world, default_start(world), frontier_backend(), ExplorationConfig(max_steps=500))
    assert res.termination is Termination.COVERAGE_SUFFICIENT
    assert res.coverage.covered_fraction == 1.0


def test_rejects_start_on_obstacle_and_bad_config():
    world = load_fixture("two_room_15")
    with pytest.raises(ValueError):
        explore(world, Pose(0, 0), frontier_backend())
    with pytest.raises(ValueError):
        ExplorationConfig(max_steps=-1)
    assert ExplorationConfig().wall_clock_limit == 3600.0


def test_exploration_labels_regions_and_landmarks():
    world = load_fixture("apartment")
    res = explore(world, default_start(world), frontier_backend(), ExplorationConfig(max_steps=500))
    assert set(res.graph.regions) == {"a", "e", "k"}
    assert set(res.graph.landmarks) == set(world.landmarks)
