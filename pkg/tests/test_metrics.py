import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridnav.errors import UnreachableGoalError
from gridnav.metrics import (
    EpisodeMetrics,
    cost_accounting,
    episode_metrics,
    json_report,
    reduction_pct,
    suite_metrics,
    text_report,
)
from gridnav.plan import EpisodeRecord, TierCounts
from gridnav.world import Heading, Pose, load_map

E = Heading.EAST


def record(poses, goal, stopped=True, calls=0, steps=None, seconds=0.0):
    poses = [p if isinstance(p, Pose) else Pose(*p) for p in poses]
    return EpisodeRecord(
        episode_id="t",
        instruction="",
        start=poses[0],
        goal=goal,
        subtasks=[],
        trajectory=poses,
        stopped=stopped,
        status="stopped" if stopped else "step_limit",
        steps=len(poses) if steps is None else steps,
        backend_calls=calls,
        cache_hits=TierCounts(),
        subtasks_completed=0,
        total_seconds=seconds,
    )


def line(n):
    return load_map("." * n + "\n")


def em(calls=0, seconds=0.0, success=True, os_=True, spl=1.0, ne=0.0, steps=1):
    return EpisodeMetrics("x", ne, success, os_, spl, 0.0, 0.0, calls, steps, 0.0, seconds, 0.0)


def test_trivial_episode():
    m = episode_metrics(record([(0, 0, E)], (0, 0)), line(3))
    assert (m.ne_m, m.success, m.oracle_success, m.spl) == (0.0, True, True, 1.0)


def test_three_metre_boundary():
    world = line(30)
    ok = episode_metrics(record([(0, 0, E)], (11, 0)), world)
    assert ok.ne_m == pytest.approx(2.75) and ok.success
    edge = episode_metrics(record([(0, 0, E)], (12, 0)), world)
    assert edge.ne_m == pytest.approx(3.0) and edge.success
    far = episode_metrics(record([(0, 0, E)], (13, 0)), world)
    assert far.ne_m == pytest.approx(3.25) and not far.success and not far.oracle_success


def test_success_needs_an_explicit_stop():
    m = episode_metrics(record([(0, 0, E), (1, 0, E)], (1, 0), stopped=False), line(3))
    assert not m.success and m.oracle_success and m.spl == 0


def test_detour_halves_spl():
    world = line(10)
    # overshoot by one cell and come back: 4 moves where 2 would do
    poses = [(0, 0, E), (1, 0, E), (2, 0, E), (3, 0, E)]
    poses += [(3, 0, Heading.NORTH), (3, 0, Heading.WEST), (2, 0, Heading.WEST)]
    m = episode_metrics(record(poses, (2, 0)), world)
    assert m.path_length_m == pytest.approx(4 * 0.25)
    assert m.shortest_path_m == pytest.approx(2 * 0.25)
    assert m.spl == pytest.approx(0.5)


def test_rotations_cost_no_path_length():
    poses = [(0, 0, E), (0, 0, Heading.SOUTH), (0, 0, Heading.WEST), (0, 0, Heading.NORTH)]
    m = episode_metrics(record(poses, (0, 0)), line(3))
    assert m.path_length_m == 0 and m.spl == 1.0


def test_unreachable_goal_is_ill_posed():
    with pytest.raises(UnreachableGoalError):
        episode_metrics(record([(0, 0, E)], (2, 0)), load_map(".#.\n"))


def test_cost_accounting():
    assert cost_accounting(0, 0.5) == 0
    price = 0.200 / 47
    assert cost_accounting(47, price) == pytest.approx(0.200)
    assert cost_accounting(32, price) == pytest.approx(0.136, abs=0.001)
    assert cost_accounting(record([(0, 0, E)], (0, 0), calls=3), 0.25) == 0.75
    with pytest.raises(ValueError):
        cost_accounting(1, -1)


def test_suite_reductions():
    base = suite_metrics([em(calls=84, seconds=167.605)])
    ours = suite_metrics([em(calls=18, seconds=35.5)], base)
    assert round(ours.call_reduction_pct, 1) == 78.6
    assert round(ours.time_reduction_pct, 1) == 78.8
    same = suite_metrics([em(calls=84, seconds=167.605)], base)
    assert same.call_reduction_pct == 0 and same.time_reduction_pct == 0
    assert reduction_pct(5, 0) == 0
    with pytest.raises(ValueError):
        suite_metrics([])


@given(st.lists(st.tuples(st.booleans(), st.booleans(), st.floats(0, 1)), min_size=1, max_size=30))
def test_suite_orderings_hold_for_consistent_episodes(rows):
    eps = []
    for success, near, spl in rows:
        eps.append(em(success=success, os_=success or near, spl=spl if success else 0.0))
    s = suite_metrics(eps)
    assert s.os_pct >= s.sr_pct >= s.spl_pct
    assert 0 <= s.spl_pct <= 100


def test_reports_are_aligned_and_parseable():
    base = suite_metrics([em(calls=84, seconds=167.605)])
    rows = [("cold", base), ("warm", suite_metrics([em(calls=18, seconds=35.5)], base))]
    text = text_report(rows)
    lines = text.splitlines()
    assert lines[0].split()[:5] == ["condition", "NE", "OS", "SR", "SPL"]
    assert "78.6%" in lines[2] and "78.8%" in lines[2]
    assert len({len(l) for l in lines}) == 1
    obj = json.loads(json_report(rows))
    assert obj["conditions"]["warm"]["backend_calls"] == 18
