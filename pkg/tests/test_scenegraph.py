import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import ALL_FIXTURES, check_golden, full_graph, load_fixture
from gridnav.errors import ConflictError, ParseError
from gridnav.scenegraph import (
    BLUE,
    GRAY,
    KnownKind,
    SceneGraph,
    SceneGraphDelta,
    coverage,
    delta_from_observation,
    dumps,
    label_regions,
    loads,
    merge,
    parse_ppm,
    render,
    rle_decode,
    rle_encode,
)
from gridnav.world import Heading, Pose, observe


def graph_from_rows(rows, start=(1, 1)):
    """Rows of U/N/O glyphs to a scene graph; the start must be on an N."""
    return SceneGraph(len(rows[0]), len(rows), 0.25, "".join(rows).encode(), Pose(*start))


def void_graph(void_cells: int) -> SceneGraph:
    """Known walls all round, a navigable ring, and one enclosed Unknown run."""
    w = void_cells + 4
    rows = ["O" * w, "O" + "N" * (w - 2) + "O", "ON" + "U" * void_cells + "NO", "O" + "N" * (w - 2) + "O", "O" * w]
    return graph_from_rows(rows)


def test_merge_only_fills_unknown_and_counts_conflicts():
    g = SceneGraph.empty(3, 1, Pose(0, 0))
    g = merge(g, SceneGraphDelta(frozenset({((0, 0), KnownKind.NAVIGABLE), ((1, 0), KnownKind.OBSTACLE)})))
    assert g.knowledge == b"NOU"
    g2 = merge(g, SceneGraphDelta(frozenset({((1, 0), KnownKind.NAVIGABLE), ((2, 0), KnownKind.NAVIGABLE)})))
    assert g2.knowledge == b"NON"
    assert g2.conflicts == 1


def test_merge_is_idempotent_and_monotone():
    world = load_fixture("apartment")
    g = SceneGraph.empty(world.width, world.height, Pose(16, 17))
    for pose in (Pose(16, 17, Heading.NORTH), Pose(16, 12, Heading.WEST), Pose(14, 15, Heading.SOUTH)):
        d = delta_from_observation(observe(world, pose))
        before = g.known_cells()
        g = merge(g, d)
        assert before <= g.known_cells()
        assert merge(g, d) == g
    assert g.conflicts == 0


def test_merge_attaches_regions_and_landmarks():
    world = load_fixture("apartment")
    g = SceneGraph.empty(world.width, world.height, Pose(2, 3))
    g = merge(g, delta_from_observation(observe(world, Pose(2, 3, Heading.NORTH))))
    assert g.regions["a"].name == "living room"
    assert g.landmarks["bookshelf"].cell == (1, 1)
    assert g.region_of((2, 2)) == "a"


def test_label_regions_rejects_double_labels():
    g = graph_from_rows(["NNN"], start=(0, 0))
    g = label_regions(g, [((0, 0), "a")], region_names={"a": "hall"})
    with pytest.raises(ConflictError):
        label_regions(g, [((0, 0), "b")])
    with pytest.raises(ConflictError):
        label_regions(g, [((1, 0), "a"), ((1, 0), "b")])


def test_region_components():
    g = label_regions(graph_from_rows(["NON"], start=(0, 0)), [((0, 0), "a"), ((2, 0), "a")])
    assert len(g.regions["a"].components()) == 2


def test_frontiers_are_navigable_cells_next_to_unknown():
    g = graph_from_rows(["NNU", "NON", "UNN"], start=(0, 0))
    assert sorted(g.frontiers()) == [(0, 1), (1, 0), (1, 2), (2, 1)]


@pytest.mark.parametrize("name", ALL_FIXTURES)
def test_complete_graph_is_sufficient(name):
    world = load_fixture(name)
    report = coverage(full_graph(name), world=world)
    assert report.sufficient and report.periphery_closed
    assert report.covered_fraction == 1.0


def test_void_threshold_boundary():
    assert not coverage(void_graph(13)).sufficient
    assert coverage(void_graph(13)).interior_voids[0].size == 13
    assert coverage(void_graph(12), void_threshold=13).sufficient
    assert not coverage(void_graph(12)).sufficient
    assert coverage(void_graph(11)).sufficient


def test_unknown_touching_border_means_open_periphery():
    g = graph_from_rows(["OOOO", "ONNU", "OOOO"])
    report = coverage(g)
    assert not report.periphery_closed and not report.sufficient


def test_unknown_outside_reachable_area_is_ignored():
    # the sealed pocket on the right never touches reachable cells
    g = graph_from_rows(["OOOOOO", "ONNOUO", "OOOOOO"])
    assert coverage(g).sufficient


def test_coverage_rejects_bad_threshold():
    with pytest.raises(ValueError):
        coverage(void_graph(3), void_threshold=0)


@given(st.lists(st.sampled_from(b"UNO"), min_size=1, max_size=200))
def test_rle_round_trip(cells):
    data = bytes(cells)
    assert rle_decode(rle_encode(data), len(data)) == data


@pytest.mark.parametrize("text", ["3N2", "3N", "2X1N", "N"])
def test_rle_rejects_garbage(text):
    with pytest.raises(ParseError):
        rle_decode(text, 4)


def test_json_round_trip_preserves_everything():
    g = full_graph("apartment").with_pose(Pose(16, 17)).with_pose(Pose(16, 16))
    assert loads(dumps(g)) == g
    assert dumps(loads(dumps(g))) == dumps(g)


def test_loads_rejects_non_graph():
    with pytest.raises(ParseError):
        loads("[]")
    with pytest.raises(ParseError):
        loads('{"width": 2}')


def test_render_colours_and_geometry():
    g = graph_from_rows(["OOO", "ONN", "OUO"]).with_pose(Pose(1, 1, Heading.EAST)).with_pose(Pose(2, 1, Heading.EAST))
    data = render(g)
    assert data.startswith(b"P6 24 24 255\n")
    img = parse_ppm(data)
    assert img.shape == (24, 24, 3)
    assert tuple(img[8, 8]) == GRAY  # corner of navigable cell (1,1)
    assert tuple(img[1, 1]) == (255, 255, 255)  # obstacle
    assert tuple(img[20, 12]) == (255, 255, 255)  # unknown renders white too
    assert tuple(img[12, 14]) == BLUE  # the path between cell centres
    assert tuple(img[10, 10]) == (0, 0, 0)  # start square outline
    blue = np.all(img == BLUE, axis=2)
    assert blue[8:16, 16:24].any()  # arrow at the last pose


def test_render_golden():
    world = load_fixture("two_room_15")
    g = full_graph("two_room_15")
    for pose in (Pose(3, 7, Heading.EAST), Pose(4, 7, Heading.EAST), Pose(5, 7, Heading.EAST), Pose(5, 7, Heading.NORTH)):
        g = g.with_pose(pose)
    check_golden("two_room_15.ppm", render(g))
    assert world.width * 8 == parse_ppm(render(g)).shape[1]
