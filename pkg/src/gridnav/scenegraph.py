"""Top-down scene graph: a labelled occupancy grid built from observations.

Knowledge is kept as a flat row-major ``bytes`` string of ``U``/``N``/``O``
glyphs, which makes values immutable, cheap to copy and trivially
run-length encoded.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import ndimage

from .errors import ConflictError, ParseError
from .search import cell_distances
from .world import Cell, CellKind, GridWorld, Heading, Observation, Pose, bresenham, default_start

DEFAULT_VOID_THRESHOLD = 12
PIXELS_PER_CELL = 8

_FOUR = ndimage.generate_binary_structure(2, 1)


class KnownKind(enum.Enum):
    UNKNOWN = "U"
    NAVIGABLE = "N"
    OBSTACLE = "O"


_U, _N, _O = (ord(k.value) for k in KnownKind)
_CODE = {KnownKind.UNKNOWN: _U, KnownKind.NAVIGABLE: _N, KnownKind.OBSTACLE: _O}
_KIND = {v: k for k, v in _CODE.items()}


@dataclass(frozen=True)
class Region:
    name: str
    cells: frozenset

    def components(self) -> list[frozenset]:
        return connected_components(self.cells)


@dataclass(frozen=True)
class GraphLandmark:
    cell: Cell
    name: str


@dataclass(frozen=True)
class SceneGraph:
    width: int
    height: int
    cell_size_m: float
    knowledge: bytes
    start: Pose
    regions: Mapping[str, Region] = field(default_factory=dict)
    landmarks: Mapping[str, GraphLandmark] = field(default_factory=dict)
    trajectory: tuple = ()
    conflicts: int = 0

    @classmethod
    def empty(cls, width: int, height: int, start: Pose, cell_size_m: float = 0.25) -> "SceneGraph":
        return cls(width, height, cell_size_m, bytes([_U]) * (width * height), start)

    @classmethod
    def from_world(cls, world: GridWorld, start: Optional[Pose] = None) -> "SceneGraph":
        """Complete ground-truth graph; used for deployment tests and oracles."""
        buf = bytearray(world.width * world.height)
        for y, row in enumerate(world.cells):
            for x, kind in enumerate(row):
                buf[y * world.width + x] = _N if kind is CellKind.FREE else _O
        regions: dict[str, set] = {}
        for cell, rid in world.region_labels.items():
            regions.setdefault(rid, set()).add(cell)
        if start is None:
            start = default_start(world)
        return cls(
            world.width,
            world.height,
            world.cell_size_m,
            bytes(buf),
            start,
            regions={
                rid: Region(world.region_names.get(rid, rid), frozenset(cells))
                for rid, cells in sorted(regions.items())
            },
            landmarks={
                lid: GraphLandmark(lm.cell, lm.name) for lid, lm in sorted(world.landmarks.items())
            },
        )

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def kind(self, cell: Cell) -> KnownKind:
        return _KIND[self.knowledge[cell[1] * self.width + cell[0]]]

    def is_navigable(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and self.knowledge[cell[1] * self.width + cell[0]] == _N

    def is_unknown(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and self.knowledge[cell[1] * self.width + cell[0]] == _U

    def known_count(self) -> int:
        return len(self.knowledge) - self.knowledge.count(_U)

    def known_cells(self) -> set[Cell]:
        w = self.width
        return {(i % w, i // w) for i, b in enumerate(self.knowledge) if b != _U}

    def array(self) -> np.ndarray:
        return np.frombuffer(self.knowledge, dtype=np.uint8).reshape(self.height, self.width)

    def frontiers(self) -> list[Cell]:
        """Navigable cells with at least one 4-adjacent Unknown cell."""
        grid = self.array()
        unknown = grid == _U
        touch = ndimage.binary_dilation(unknown, structure=_FOUR)
        ys, xs = np.nonzero(touch & (grid == _N))
        return [(int(x), int(y)) for y, x in zip(ys, xs)]

    def with_pose(self, pose: Pose) -> "SceneGraph":
        return replace(self, trajectory=self.trajectory + (pose,))

    def region_of(self, cell: Cell) -> Optional[str]:
        for rid, region in self.regions.items():
            if cell in region.cells:
                return rid
        return None


@dataclass(frozen=True)
class SceneGraphDelta:
    observed: frozenset  # of (cell, KnownKind)
    region_hints: frozenset = frozenset()  # of (cell, region id)
    landmark_hints: frozenset = frozenset()  # of (landmark id, cell, name)
    region_names: Mapping[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.observed)


def delta_from_observation(obs: Observation) -> SceneGraphDelta:
    observed = []
    hints = []
    for cell, kind, region in obs.visible_cells:
        observed.append((cell, KnownKind.NAVIGABLE if kind is CellKind.FREE else KnownKind.OBSTACLE))
        if region is not None:
            hints.append((cell, region))
    return SceneGraphDelta(
        observed=frozenset(observed),
        region_hints=frozenset(hints),
        landmark_hints=frozenset((s.id, s.cell, s.name) for s in obs.visible_landmarks),
        region_names=dict(obs.region_names),
    )


def merge(graph: SceneGraph, delta: SceneGraphDelta) -> SceneGraph:
    """Union ``delta`` into ``graph``; the existing value wins any conflict."""
    buf = bytearray(graph.knowledge)
    w = graph.width
    conflicts = graph.conflicts
    for cell, kind in delta.observed:
        if not graph.in_bounds(cell):
            raise ValueError(f"delta cell {cell} out of bounds")
        i = cell[1] * w + cell[0]
        code = _CODE[kind]
        if buf[i] == _U:
            buf[i] = code
        elif buf[i] != code and code != _U:
            conflicts += 1
    merged = replace(graph, knowledge=bytes(buf), conflicts=conflicts)
    if not (delta.region_hints or delta.landmark_hints):
        return merged
    merged, extra = _apply_hints(merged, delta.region_hints, delta.landmark_hints, delta.region_names, strict=False)
    return replace(merged, conflicts=merged.conflicts + extra)


def label_regions(
    graph: SceneGraph,
    region_hints: Iterable[tuple[Cell, str]] = (),
    landmark_hints: Iterable[tuple[str, Cell, str]] = (),
    region_names: Optional[Mapping[str, str]] = None,
) -> SceneGraph:
    """Group hinted navigable cells into named regions and attach landmarks.

    Raises ConflictError when a cell is given two different region ids, either
    within the hints or against the graph's existing labels.
    """
    labelled, _ = _apply_hints(graph, frozenset(region_hints), frozenset(landmark_hints), region_names or {}, strict=True)
    return labelled


def _apply_hints(graph, region_hints, landmark_hints, region_names, strict):
    owner = graph.region_of
    conflicts = 0
    incoming: dict[Cell, str] = {}
    for cell, rid in sorted(region_hints):
        if not graph.is_navigable(cell):
            continue
        prev = incoming[cell] if cell in incoming else owner(cell)
        if prev is not None and prev != rid:
            if strict:
                raise ConflictError(f"cell {cell} labelled both {prev!r} and {rid!r}")
            conflicts += 1
            continue
        incoming[cell] = rid

    grouped: dict[str, set] = {}
    for cell, rid in incoming.items():
        if owner(cell) != rid:
            grouped.setdefault(rid, set()).add(cell)
    regions = dict(graph.regions)
    for rid, cells in sorted(grouped.items()):
        old = regions.get(rid)
        name = region_names.get(rid) or (old.name if old else rid)
        base = old.cells if old else frozenset()
        regions[rid] = Region(name, base | frozenset(cells))
    for rid, name in region_names.items():
        if rid in regions and regions[rid].name != name:
            regions[rid] = Region(name, regions[rid].cells)

    landmarks = dict(graph.landmarks)
    for lid, cell, name in sorted(landmark_hints):
        landmarks.setdefault(lid, GraphLandmark(cell, name))

    if not grouped and landmarks == graph.landmarks and regions == graph.regions:
        return graph, conflicts
    return replace(graph, regions=dict(sorted(regions.items())), landmarks=dict(sorted(landmarks.items()))), conflicts


def connected_components(cells: Iterable[Cell]) -> list[frozenset]:
    pending = set(cells)
    out = []
    while pending:
        seed = min(pending, key=lambda c: (c[1], c[0]))
        comp = {seed}
        stack = [seed]
        pending.discard(seed)
        while stack:
            x, y = stack.pop()
            for n in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                if n in pending:
                    pending.discard(n)
                    comp.add(n)
                    stack.append(n)
        out.append(frozenset(comp))
    return out


@dataclass(frozen=True)
class Void:
    size: int
    anchor: Cell  # smallest (y, x) cell, for reporting


@dataclass(frozen=True)
class CoverageReport:
    periphery_closed: bool
    interior_voids: tuple
    covered_fraction: Optional[float]
    sufficient: bool

    def to_json(self) -> dict:
        return {
            "periphery_closed": self.periphery_closed,
            "interior_voids": [{"size": v.size, "anchor": list(v.anchor)} for v in self.interior_voids],
            "covered_fraction": self.covered_fraction,
            "sufficient": self.sufficient,
        }


def reachable_mask(graph: SceneGraph) -> np.ndarray:
    """Navigable cells 4-connected to the start or any trajectory pose."""
    grid = graph.array()
    labels, _ = ndimage.label(grid == _N, structure=_FOUR)
    seeds = {graph.start.cell, *(p.cell for p in graph.trajectory)}
    ids = {int(labels[y, x]) for x, y in seeds if graph.in_bounds((x, y))} - {0}
    if not ids:
        return np.zeros_like(grid, dtype=bool)
    return np.isin(labels, sorted(ids))


def coverage(
    graph: SceneGraph,
    void_threshold: int = DEFAULT_VOID_THRESHOLD,
    world: Optional[GridWorld] = None,
) -> CoverageReport:
    """Check the two exploration stopping indicators.

    Only Unknown components touching the reachable navigable area matter.
    Such a component that reaches the map edge means the explored periphery is
    still open; one enclosed away from the edge is an interior void.
    """
    if void_threshold < 1:
        raise ValueError("void_threshold must be >= 1")
    grid = graph.array()
    reach = reachable_mask(graph)
    fraction = _covered_fraction(graph, world) if world is not None else None
    if not reach.any():
        return CoverageReport(False, (), fraction, False)

    unknown = grid == _U
    labels, count = ndimage.label(unknown, structure=_FOUR)
    touching = ndimage.binary_dilation(reach, structure=_FOUR) & unknown
    ids = np.unique(labels[touching])
    ids = ids[ids != 0]

    border = set(np.unique(np.concatenate([labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]])).tolist())
    closed = True
    voids = []
    if len(ids):
        sizes = ndimage.sum_labels(unknown, labels, index=ids)
        for lid, size in zip(ids.tolist(), sizes.tolist()):
            if lid in border:
                closed = False
                continue
            ys, xs = np.nonzero(labels == lid)
            order = np.lexsort((xs, ys))
            voids.append(Void(int(size), (int(xs[order[0]]), int(ys[order[0]]))))
    voids.sort(key=lambda v: (v.anchor[1], v.anchor[0]))
    sufficient = closed and all(v.size < void_threshold for v in voids)
    return CoverageReport(closed, tuple(voids), fraction, sufficient)


def _covered_fraction(graph: SceneGraph, world: GridWorld) -> float:
    reach = cell_distances([graph.start.cell], world.is_free) if world.is_free(graph.start.cell) else {}
    if not reach:
        return 0.0
    known = sum(1 for c in reach if not graph.is_unknown(c))
    return known / len(reach)


# -- persistence -------------------------------------------------------------

_RLE = re.compile(r"(\d+)([UNO])")


def rle_encode(knowledge: bytes) -> str:
    out = []
    i = 0
    n = len(knowledge)
    while i < n:
        j = i
        while j < n and knowledge[j] == knowledge[i]:
            j += 1
        out.append(f"{j - i}{chr(knowledge[i])}")
        i = j
    return "".join(out)


def rle_decode(text: str, expected: int) -> bytes:
    pos = 0
    out = bytearray()
    for m in _RLE.finditer(text):
        if m.start() != pos:
            raise ParseError(f"bad RLE near offset {pos}")
        out += m.group(2).encode() * int(m.group(1))
        pos = m.end()
    if pos != len(text):
        raise ParseError(f"bad RLE near offset {pos}")
    if len(out) != expected:
        raise ParseError(f"RLE expands to {len(out)} cells, expected {expected}")
    return bytes(out)


def _pose_list(poses: Sequence[Pose]) -> list:
    return [[p.x, p.y, p.heading.letter] for p in poses]


def to_json(graph: SceneGraph) -> dict:
    return {
        "width": graph.width,
        "height": graph.height,
        "cell_size_m": graph.cell_size_m,
        "knowledge": rle_encode(graph.knowledge),
        "regions": {
            rid: {"name": r.name, "cells": sorted([list(c) for c in r.cells], key=lambda c: (c[1], c[0]))}
            for rid, r in graph.regions.items()
        },
        "landmarks": {
            lid: {"x": lm.cell[0], "y": lm.cell[1], "name": lm.name} for lid, lm in graph.landmarks.items()
        },
        "start": graph.start.to_json(),
        "trajectory": _pose_list(graph.trajectory),
        "conflicts": graph.conflicts,
    }


def from_json(obj: Mapping) -> SceneGraph:
    try:
        width, height = int(obj["width"]), int(obj["height"])
        knowledge = rle_decode(obj["knowledge"], width * height)
        regions = {
            rid: Region(r["name"], frozenset((int(c[0]), int(c[1])) for c in r["cells"]))
            for rid, r in obj.get("regions", {}).items()
        }
        landmarks = {
            lid: GraphLandmark((int(lm["x"]), int(lm["y"])), lm["name"])
            for lid, lm in obj.get("landmarks", {}).items()
        }
        trajectory = tuple(Pose(int(x), int(y), Heading.from_letter(h)) for x, y, h in obj.get("trajectory", []))
        return SceneGraph(
            width,
            height,
            float(obj.get("cell_size_m", 0.25)),
            knowledge,
            Pose.from_json(obj["start"]),
            regions=regions,
            landmarks=landmarks,
            trajectory=trajectory,
            conflicts=int(obj.get("conflicts", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad scene graph: {exc}") from exc


def dumps(graph: SceneGraph) -> str:
    return json.dumps(to_json(graph), indent=1, sort_keys=True) + "\n"


def loads(text: str | bytes) -> SceneGraph:
    try:
        obj = json.loads(text)
    except ValueError as exc:
        raise ParseError(f"scene graph is not JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ParseError("scene graph must be a JSON object")
    return from_json(obj)


# -- rendering ---------------------------------------------------------------

GRAY = (128, 128, 128)
WHITE = (255, 255, 255)
BLUE = (0, 0, 255)
BLACK = (0, 0, 0)


def render(graph: SceneGraph, overlay: Optional[Sequence] = None, scale: int = PIXELS_PER_CELL) -> bytes:
    """Binary PPM: gray navigable, white obstacle/unknown, blue path and arrow, black start square.

    ``overlay`` is any sequence of poses (or ``(x, y, heading)`` triples);
    it defaults to the graph's own trajectory. The arrow marks its last pose.
    """
    grid = graph.array()
    img = np.full((graph.height * scale, graph.width * scale, 3), 255, dtype=np.uint8)
    nav = np.kron(grid == _N, np.ones((scale, scale), dtype=bool))
    img[nav] = GRAY

    poses = [_as_pose(p) for p in (graph.trajectory if overlay is None else overlay)]
    half = scale // 2
    centers = [(p.x * scale + half, p.y * scale + half) for p in poses]
    for a, b in zip(centers, centers[1:]):
        for px, py in bresenham(a, b):
            img[py, px] = BLUE

    sx, sy = graph.start.x * scale, graph.start.y * scale
    lo, hi = 2, scale - 3
    for i in range(lo, hi + 1):
        for px, py in ((sx + i, sy + lo), (sx + i, sy + hi), (sx + lo, sy + i), (sx + hi, sy + i)):
            img[py, px] = BLACK

    if poses:
        _draw_arrow(img, poses[-1], scale)
    header = f"P6 {img.shape[1]} {img.shape[0]} 255\n".encode()
    return header + img.tobytes()


def _as_pose(p) -> Pose:
    if isinstance(p, Pose):
        return p
    x, y, h = p
    return Pose(int(x), int(y), h if isinstance(h, Heading) else Heading.from_letter(h))


def _draw_arrow(img: np.ndarray, pose: Pose, scale: int) -> None:
    # triangle with its tip on the heading side of the cell, drawn in cell-local coords
    ox, oy = pose.x * scale, pose.y * scale
    m = scale - 1
    for v in range(1, scale - 1):  # distance from the tip edge
        spread = v // 2
        for u in range(scale // 2 - spread, scale // 2 + spread):
            if pose.heading is Heading.NORTH:
                px, py = u, v
            elif pose.heading is Heading.SOUTH:
                px, py = u, m - v
            elif pose.heading is Heading.EAST:
                px, py = m - v, u
            else:
                px, py = v, u
            img[oy + py, ox + px] = BLUE


def parse_ppm(data: bytes) -> np.ndarray:
    """Decode a P6 image written by :func:`render` (used by tests and tooling)."""
    header, _, rest = data.partition(b"\n")
    magic, w, h, maxval = header.split()
    if magic != b"P6" or maxval != b"255":
        raise ParseError("not a P6/255 image")
    return np.frombuffer(rest, dtype=np.uint8).reshape(int(h), int(w), 3)


def render_observation(obs: Observation, range_cells: int, scale: int = PIXELS_PER_CELL) -> bytes:
    """Egocentric heading-up patch of what the agent sees: the first-person stand-in image."""
    r = int(range_cells)
    w, h = 2 * r + 1, r + 1
    img = np.zeros((h * scale, w * scale, 3), dtype=np.uint8)
    hx, hy = obs.pose.heading.vector
    # right-hand vector in image coordinates
    rx, ry = -hy, hx
    for cell, kind, _ in sorted(obs.visible_cells, key=lambda t: t[0]):
        dx, dy = cell[0] - obs.pose.x, cell[1] - obs.pose.y
        fwd = dx * hx + dy * hy
        side = dx * rx + dy * ry
        if fwd < 0 or abs(side) > r or fwd > r:
            continue
        col, row = side + r, r - fwd
        color = GRAY if kind is CellKind.FREE else WHITE
        img[row * scale:(row + 1) * scale, col * scale:(col + 1) * scale] = color
    header = f"P6 {img.shape[1]} {img.shape[0]} 255\n".encode()
    return header + img.tobytes()
