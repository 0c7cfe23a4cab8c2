import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import ALL_FIXTURES, FIXTURES, load_fixture
from gridnav.errors import ConsistencyError, ParseError
from gridnav.world import (
    Action,
    CellKind,
    Heading,
    Pose,
    StepOutcome,
    bresenham,
    default_start,
    in_view,
    load_map,
    observe,
    serialize_map,
    serialize_sidecar,
    step,
)


@pytest.mark.parametrize("name", ALL_FIXTURES)
def test_fixture_round_trips_byte_for_byte(name):
    raw = (FIXTURES / f"{name}.map").read_bytes()
    world = load_map(raw, (FIXTURES / f"{name}.json").read_bytes())
    assert serialize_map(world) == raw
    again = load_map(serialize_map(world), serialize_sidecar(world))
    assert again == world


def test_round_trip_without_trailing_newline():
    raw = b"..#\n.@.\n#.."
    assert serialize_map(load_map(raw)) == raw


def test_region_letters_and_start():
    w = load_map("ab.\n.@#\n")
    assert w.region_labels == {(0, 0): "a", (1, 0): "b"}
    assert w.start == (1, 1)
    assert w.kind((2, 1)) is CellKind.OBSTACLE
    assert default_start(w) == Pose(1, 1, Heading.NORTH)


@pytest.mark.parametrize(
    "text",
    ["..\n...\n", "..X\n", "@.\n.@\n", "", "\n", "..é\n".encode("latin-1")],
    ids=["ragged", "glyph", "two-starts", "empty", "blank", "non-ascii"],
)
def test_malformed_maps_raise_parse_error(text):
    with pytest.raises(ParseError):
        load_map(text)


def test_landmark_on_obstacle_is_inconsistent():
    side = json.dumps({"landmarks": [{"id": "lamp", "x": 2, "y": 0}]})
    with pytest.raises(ConsistencyError):
        load_map("..#\n...\n", side)


def test_landmark_name_defaults_from_id():
    side = json.dumps({"landmarks": [{"id": "coffee_table", "x": 1, "y": 1}]})
    assert load_map("...\n...\n", side).landmarks["coffee_table"].name == "coffee table"


def test_step_moves_turns_and_blocks():
    w = load_map("...\n.#.\n...\n")
    p = Pose(0, 2, Heading.NORTH)
    p1, out = step(w, p, Action.MOVE_FORWARD)
    assert (p1, out) == (Pose(0, 1, Heading.NORTH), StepOutcome.OK)
    assert step(w, p, Action.TURN_LEFT)[0].heading is Heading.WEST
    assert step(w, p, Action.TURN_RIGHT)[0].heading is Heading.EAST
    assert step(w, p, Action.STOP) == (p, StepOutcome.STOPPED)
    # into the wall and off the map: silent no-ops
    assert step(w, Pose(1, 2, Heading.NORTH), Action.MOVE_FORWARD) == (Pose(1, 2, Heading.NORTH), StepOutcome.BLOCKED)
    assert step(w, Pose(0, 0, Heading.WEST), Action.MOVE_FORWARD)[1] is StepOutcome.BLOCKED


def test_heading_rotations_compose():
    for h in Heading:
        assert h.left().right() is h
        assert h.left().left().left().left() is h
    assert Heading.NORTH.vector == (0, -1)


@given(st.tuples(st.integers(-20, 20), st.integers(-20, 20)), st.tuples(st.integers(-20, 20), st.integers(-20, 20)))
def test_bresenham_is_a_connected_inclusive_line(a, b):
    line = bresenham(a, b)
    assert line[0] == a and line[-1] == b
    assert len(line) == max(abs(a[0] - b[0]), abs(a[1] - b[1])) + 1
    for p, q in zip(line, line[1:]):
        assert max(abs(p[0] - q[0]), abs(p[1] - q[1])) == 1


def test_observe_respects_cone_range_and_occlusion():
    w = load_map(
        ".......\n"
        ".......\n"
        "...#...\n"
        ".......\n"
        "...@...\n"
    )
    obs = observe(w, Pose(3, 4, Heading.NORTH), fov_deg=90, range_cells=3)
    cells = obs.cells()
    assert (3, 2) in cells  # the wall itself is visible
    assert (3, 1) not in cells  # hidden behind it
    assert (3, 5) not in cells  # behind the agent, outside the cone
    assert (0, 4) not in cells  # beside the agent, outside a 90 degree cone
    assert all(abs(x - 3) ** 2 + abs(y - 4) ** 2 <= 9 for x, y in cells)
    assert (3, 4) in cells


def test_observe_reports_landmarks_and_regions():
    w = load_fixture("apartment")
    obs = observe(w, Pose(2, 3, Heading.NORTH), 120, 10)
    assert "bookshelf" in obs.landmark_ids()
    assert obs.region_names == {"a": "living room"}


@pytest.mark.parametrize("fov,rng", [(0, 5), (361, 5), (90, 0)])
def test_observe_rejects_bad_sensor_settings(fov, rng):
    with pytest.raises(ValueError):
        observe(load_fixture("open_11"), Pose(5, 5), fov, rng)


def test_in_view_cone_edge_is_inclusive():
    # 90 degree cone: the 45 degree diagonal is on the edge
    assert in_view(Pose(0, 0, Heading.EAST), (2, 2), 90, 5)
    assert not in_view(Pose(0, 0, Heading.EAST), (1, 2), 90, 5)
