"""Deterministic grid-world simulator: map I/O, kinematics and ray-cast sensing.

Coordinates are ``(x, y)`` with ``x`` the column and ``y`` the row; ``y`` grows
downward, so North is ``y - 1``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Optional

from .errors import ConsistencyError, ParseError

Cell = tuple[int, int]

DEFAULT_CELL_SIZE_M = 0.25


class CellKind(enum.Enum):
    FREE = "free"
    OBSTACLE = "obstacle"


class Heading(enum.IntEnum):
    NORTH = 0
    EAST = 1
    SOUTH = 2
    WEST = 3

    @property
    def vector(self) -> Cell:
        return _VECTORS[self]

    @property
    def letter(self) -> str:
        return "NESW"[self]

    @classmethod
    def from_letter(cls, letter: str) -> "Heading":
        try:
            return cls("NESW".index(letter))
        except ValueError:
            raise ParseError(f"bad heading {letter!r}") from None

    def left(self) -> "Heading":
        return Heading((self - 1) % 4)

    def right(self) -> "Heading":
        return Heading((self + 1) % 4)


_VECTORS = {
    Heading.NORTH: (0, -1),
    Heading.EAST: (1, 0),
    Heading.SOUTH: (0, 1),
    Heading.WEST: (-1, 0),
}


class Action(enum.Enum):
    MOVE_FORWARD = "move forward"
    TURN_LEFT = "turn left"
    TURN_RIGHT = "turn right"
    STOP = "stop"


class StepOutcome(enum.Enum):
    OK = "ok"
    BLOCKED = "blocked"
    STOPPED = "stopped"


@dataclass(frozen=True, order=True)
class Pose:
    x: int
    y: int
    heading: Heading = Heading.NORTH

    @property
    def cell(self) -> Cell:
        return (self.x, self.y)

    def ahead(self) -> Cell:
        dx, dy = self.heading.vector
        return (self.x + dx, self.y + dy)

    def to_json(self) -> dict:
        return {"x": self.x, "y": self.y, "heading": self.heading.letter}

    @classmethod
    def from_json(cls, obj: Mapping) -> "Pose":
        try:
            heading = obj.get("heading", "N")
            return cls(int(obj["x"]), int(obj["y"]), Heading.from_letter(heading))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad pose {obj!r}") from exc


@dataclass(frozen=True)
class Landmark:
    cell: Cell
    name: str
    region: Optional[str] = None


@dataclass(frozen=True)
class GridWorld:
    width: int
    height: int
    cells: tuple[tuple[CellKind, ...], ...]  # cells[y][x]
    region_labels: Mapping[Cell, str] = field(default_factory=dict)
    region_names: Mapping[str, str] = field(default_factory=dict)
    landmarks: Mapping[str, Landmark] = field(default_factory=dict)
    cell_size_m: float = DEFAULT_CELL_SIZE_M
    start: Optional[Cell] = None
    trailing_newline: bool = True

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def kind(self, cell: Cell) -> CellKind:
        x, y = cell
        return self.cells[y][x]

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and self.cells[cell[1]][cell[0]] is CellKind.FREE

    def free_cells(self) -> Iterator[Cell]:
        for y, row in enumerate(self.cells):
            for x, kind in enumerate(row):
                if kind is CellKind.FREE:
                    yield (x, y)

    def region_cells(self, region: str) -> set[Cell]:
        return {c for c, r in self.region_labels.items() if r == region}

    def landmark_at(self) -> dict[Cell, list[str]]:
        out: dict[Cell, list[str]] = {}
        for lid, lm in sorted(self.landmarks.items()):
            out.setdefault(lm.cell, []).append(lid)
        return out


GLYPH_FREE = "."
GLYPH_OBSTACLE = "#"
GLYPH_START = "@"


def load_map(text: bytes | str, sidecar: bytes | str | None = None) -> GridWorld:
    """Parse an ASCII map plus its optional JSON region sidecar."""
    if isinstance(text, bytes):
        try:
            text = text.decode("ascii")
        except UnicodeDecodeError as exc:
            raise ParseError("map is not ASCII") from exc
    trailing = text.endswith("\n")
    body = text[:-1] if trailing else text
    if not body:
        raise ParseError("empty map")
    rows = body.split("\n")
    width = len(rows[0])
    if width == 0:
        raise ParseError("empty first row")

    cells: list[tuple[CellKind, ...]] = []
    labels: dict[Cell, str] = {}
    start: Optional[Cell] = None
    for y, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"ragged row {y}: length {len(row)} != {width}")
        out_row = []
        for x, ch in enumerate(row):
            if ch == GLYPH_OBSTACLE:
                out_row.append(CellKind.OBSTACLE)
                continue
            if ch == GLYPH_FREE:
                pass
            elif ch == GLYPH_START:
                if start is not None:
                    raise ParseError(f"second start glyph at ({x}, {y})")
                start = (x, y)
            elif "a" <= ch <= "z":
                labels[(x, y)] = ch
            else:
                raise ParseError(f"unknown glyph {ch!r} at ({x}, {y})")
            out_row.append(CellKind.FREE)
        cells.append(tuple(out_row))

    world = GridWorld(
        width=width,
        height=len(rows),
        cells=tuple(cells),
        region_labels=labels,
        start=start,
        trailing_newline=trailing,
    )
    if sidecar is None:
        names = {r: r for r in sorted(set(labels.values()))}
        return replace(world, region_names=names)
    return _attach_sidecar(world, sidecar)


def _attach_sidecar(world: GridWorld, sidecar: bytes | str) -> GridWorld:
    try:
        meta = json.loads(sidecar)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ParseError(f"sidecar is not JSON: {exc}") from exc
    if not isinstance(meta, dict):
        raise ParseError("sidecar must be a JSON object")

    regions = meta.get("regions", {})
    if not isinstance(regions, dict):
        raise ParseError("sidecar 'regions' must be an object")
    names = {r: r for r in set(world.region_labels.values())}
    for rid, name in regions.items():
        if not isinstance(name, str):
            raise ParseError(f"region {rid!r} name must be a string")
        names[rid] = name

    landmarks: dict[str, Landmark] = {}
    for entry in meta.get("landmarks", []):
        try:
            lid = str(entry["id"])
            cell = (int(entry["x"]), int(entry["y"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad landmark entry {entry!r}") from exc
        if lid in landmarks:
            raise ParseError(f"duplicate landmark id {lid!r}")
        if not world.in_bounds(cell):
            raise ConsistencyError(f"landmark {lid!r} at {cell} is out of bounds")
        if world.kind(cell) is not CellKind.FREE:
            raise ConsistencyError(f"landmark {lid!r} at {cell} sits on an obstacle")
        name = entry.get("name", lid.replace("_", " "))
        landmarks[lid] = Landmark(cell, str(name), entry.get("region"))

    try:
        cell_size = float(meta.get("cell_size_m", DEFAULT_CELL_SIZE_M))
    except (TypeError, ValueError) as exc:
        raise ParseError("cell_size_m must be a number") from exc
    if cell_size <= 0:
        raise ParseError("cell_size_m must be positive")
    return replace(
        world,
        region_names=dict(sorted(names.items())),
        landmarks=landmarks,
        cell_size_m=cell_size,
    )


def serialize_map(world: GridWorld) -> bytes:
    """Inverse of :func:`load_map` for the grid text."""
    lines = []
    for y, row in enumerate(world.cells):
        chars = []
        for x, kind in enumerate(row):
            if kind is CellKind.OBSTACLE:
                chars.append(GLYPH_OBSTACLE)
            elif world.start == (x, y):
                chars.append(GLYPH_START)
            else:
                chars.append(world.region_labels.get((x, y), GLYPH_FREE))
        lines.append("".join(chars))
    text = "\n".join(lines)
    if world.trailing_newline:
        text += "\n"
    return text.encode("ascii")


def serialize_sidecar(world: GridWorld) -> bytes:
    meta = {
        "regions": dict(world.region_names),
        "landmarks": [
            {"id": lid, "x": lm.cell[0], "y": lm.cell[1], "name": lm.name, "region": lm.region}
            for lid, lm in sorted(world.landmarks.items())
        ],
        "cell_size_m": world.cell_size_m,
    }
    return json.dumps(meta, indent=2, sort_keys=True).encode()


def step(world: GridWorld, pose: Pose, action: Action) -> tuple[Pose, StepOutcome]:
    if action is Action.TURN_LEFT:
        return Pose(pose.x, pose.y, pose.heading.left()), StepOutcome.OK
    if action is Action.TURN_RIGHT:
        return Pose(pose.x, pose.y, pose.heading.right()), StepOutcome.OK
    if action is Action.STOP:
        return pose, StepOutcome.STOPPED
    nxt = pose.ahead()
    if not world.is_free(nxt):
        return pose, StepOutcome.BLOCKED
    return Pose(nxt[0], nxt[1], pose.heading), StepOutcome.OK


def bresenham(a: Cell, b: Cell) -> list[Cell]:
    """Integer line from ``a`` to ``b`` inclusive of both ends."""
    x0, y0 = a
    x1, y1 = b
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    out = [(x0, y0)]
    while (x0, y0) != (x1, y1):
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy
        out.append((x0, y0))
    return out


@dataclass(frozen=True)
class LandmarkSighting:
    id: str
    cell: Cell
    name: str


@dataclass(frozen=True)
class Observation:
    visible_cells: frozenset  # of (cell, CellKind, region id or None)
    visible_landmarks: frozenset  # of LandmarkSighting
    pose: Pose
    step_index: int = 0
    region_names: Mapping[str, str] = field(default_factory=dict)

    def cells(self) -> set[Cell]:
        return {c for c, _, _ in self.visible_cells}

    def landmark_ids(self) -> set[str]:
        return {s.id for s in self.visible_landmarks}


_FOV_EPS = 1e-9


def in_view(pose: Pose, cell: Cell, fov_deg: float, range_cells: float) -> bool:
    """Range and field-of-view test only; occlusion is handled separately."""
    dx = cell[0] - pose.x
    dy = cell[1] - pose.y
    if dx == 0 and dy == 0:
        return True
    dist2 = dx * dx + dy * dy
    if dist2 > range_cells * range_cells:
        return False
    if fov_deg >= 360:
        return True
    hx, hy = pose.heading.vector
    cos_angle = (dx * hx + dy * hy) / math.sqrt(dist2)
    return cos_angle >= math.cos(math.radians(fov_deg / 2)) - _FOV_EPS


def line_of_sight(world: GridWorld, a: Cell, b: Cell) -> bool:
    # endpoints excluded: an obstacle target is itself visible
    for c in bresenham(a, b)[1:-1]:
        if world.kind(c) is CellKind.OBSTACLE:
            return False
    return True


def observe(
    world: GridWorld,
    pose: Pose,
    fov_deg: float = 120.0,
    range_cells: int = 10,
    step_index: int = 0,
) -> Observation:
    if not 0 < fov_deg <= 360:
        raise ValueError(f"fov_deg must be in (0, 360], got {fov_deg}")
    if range_cells < 1:
        raise ValueError(f"range_cells must be >= 1, got {range_cells}")
    r = int(range_cells)
    visible = []
    by_cell = world.landmark_at()
    sightings = []
    for y in range(max(0, pose.y - r), min(world.height, pose.y + r + 1)):
        for x in range(max(0, pose.x - r), min(world.width, pose.x + r + 1)):
            cell = (x, y)
            if not in_view(pose, cell, fov_deg, range_cells):
                continue
            if not line_of_sight(world, pose.cell, cell):
                continue
            visible.append((cell, world.kind(cell), world.region_labels.get(cell)))
            for lid in by_cell.get(cell, ()):
                sightings.append(LandmarkSighting(lid, cell, world.landmarks[lid].name))
    seen_regions = {r for _, _, r in visible if r is not None}
    names = {r: world.region_names.get(r, r) for r in sorted(seen_regions)}
    return Observation(
        visible_cells=frozenset(visible),
        visible_landmarks=frozenset(sightings),
        pose=pose,
        step_index=step_index,
        region_names=names,
    )


def pose_in_world(world: GridWorld, pose: Pose) -> bool:
    return world.is_free(pose.cell)


def default_start(world: GridWorld) -> Pose:
    if world.start is not None:
        return Pose(world.start[0], world.start[1], Heading.NORTH)
    for cell in world.free_cells():
        return Pose(cell[0], cell[1], Heading.NORTH)
    raise ConsistencyError("map has no free cell")
