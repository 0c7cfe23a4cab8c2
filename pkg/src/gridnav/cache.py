"""Hierarchical trajectory cache.

Two keyed tiers: whole tasks (location-free) and subtasks anchored at the
location where they start. Room-to-room and room-to-object fragments are simply
subtask entries. All public methods are serialized by one re-entrant lock, so a
cache can be shared by episodes running in worker threads.
"""

from __future__ import annotations

import enum
import json
import threading
from dataclasses import asdict, dataclass, replace
from typing import Iterable, Optional, Sequence

from .errors import InvalidTrajectoryError, ParseError
from .search import action_between, rotation_bridge
from .task import Subtask, as_prompt
from .world import Action, Cell, GridWorld, Heading, Pose, step

CACHE_VERSION = 1


class Tier(enum.Enum):
    TASK = "task"
    SUBTASK = "subtask"


class Source(enum.Enum):
    BACKEND = "backend"
    COMPOSED = "composed"
    MERGED = "merged"


@dataclass(frozen=True)
class Trajectory:
    waypoints: tuple
    created_at: int = 0
    source: Source = Source.BACKEND

    @classmethod
    def of(cls, poses: Iterable, **meta) -> "Trajectory":
        return cls(tuple(_pose(p) for p in poses), **meta)

    @property
    def start(self) -> Pose:
        return self.waypoints[0]

    @property
    def end(self) -> Pose:
        return self.waypoints[-1]

    def __len__(self) -> int:
        return len(self.waypoints)

    def moves(self) -> int:
        return sum(1 for a, b in zip(self.waypoints, self.waypoints[1:]) if a.cell != b.cell)

    def actions(self) -> list[Action]:
        return [action_between(a, b) for a, b in zip(self.waypoints, self.waypoints[1:])]

    def problems(self) -> list[str]:
        if not self.waypoints:
            return ["empty trajectory"]
        out = []
        for i, (a, b) in enumerate(zip(self.waypoints, self.waypoints[1:])):
            if action_between(a, b) is None:
                out.append(f"waypoint {i}->{i + 1}: {_fmt(a)} to {_fmt(b)} is not one action")
        return out

    def validate(self, key=None) -> "Trajectory":
        problems = self.problems()
        if problems:
            where = f" under {key}" if key is not None else ""
            raise InvalidTrajectoryError(f"invalid trajectory{where}: {problems[0]}", key=key)
        return self

    def replay(self, world: GridWorld) -> list[Pose]:
        """Execute the trajectory's actions through the simulator from its start."""
        pose = self.start
        out = [pose]
        for action in self.actions():
            pose, _ = step(world, pose, action)
            out.append(pose)
        return out

    def to_json(self) -> list:
        return [[p.x, p.y, p.heading.letter] for p in self.waypoints]


def _pose(p) -> Pose:
    if isinstance(p, Pose):
        return p
    x, y, h = p
    return Pose(int(x), int(y), h if isinstance(h, Heading) else Heading.from_letter(h))


def _fmt(p: Pose) -> str:
    return f"({p.x},{p.y},{p.heading.letter})"


@dataclass(frozen=True)
class CacheKey:
    tier: Tier
    prompt: str  # normalized
    location: Optional[Cell] = None

    def __post_init__(self):
        if (self.tier is Tier.SUBTASK) != (self.location is not None):
            raise ValueError("subtask keys need a location; task keys must not have one")

    @classmethod
    def task(cls, task) -> "CacheKey":
        return cls(Tier.TASK, as_prompt(task).normalized)

    @classmethod
    def subtask(cls, prompt, location: Cell) -> "CacheKey":
        return cls(Tier.SUBTASK, as_prompt(prompt).normalized, (int(location[0]), int(location[1])))

    def __str__(self) -> str:
        if self.location is None:
            return f"task:{self.prompt!r}"
        return f"subtask:{self.prompt!r}@{self.location[0]},{self.location[1]}"


@dataclass
class CacheStats:
    task_hits: int = 0
    task_misses: int = 0
    subtask_hits: int = 0
    subtask_misses: int = 0
    insertions: int = 0
    evictions: int = 0
    discontinuities: int = 0

    def lookups(self, tier: Tier) -> int:
        if tier is Tier.TASK:
            return self.task_hits + self.task_misses
        return self.subtask_hits + self.subtask_misses


def chebyshev(a: Cell, b: Cell) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def join(first: Trajectory, second: Trajectory) -> Optional[list[Pose]]:
    """Concatenate when ``second`` starts on ``first``'s end cell; rotations bridge headings."""
    last, nxt = first.end, second.start
    if last.cell != nxt.cell:
        return None
    if last.heading == nxt.heading:
        return list(first.waypoints) + list(second.waypoints[1:])
    bridge = [Pose(last.x, last.y, h) for h in rotation_bridge(last.heading, nxt.heading)]
    return list(first.waypoints) + bridge + list(second.waypoints)


class TrajectoryCache:
    def __init__(self, capacity: Optional[int] = None):
        if capacity is not None and capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.entries: dict[CacheKey, Trajectory] = {}
        self.stats = CacheStats()
        self._inserted: dict[CacheKey, int] = {}
        self._used: dict[CacheKey, int] = {}
        self._clock = 0
        self._lock = threading.RLock()
        self.rejected: list[CacheKey] = []

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: CacheKey) -> bool:
        return key in self.entries

    def _tick(self) -> int:
        self._clock += 1
        return self._clock

    # -- lookups ---------------------------------------------------------

    def lookup_task(self, task) -> Optional[Trajectory]:
        key = CacheKey.task(task)
        with self._lock:
            traj = self.entries.get(key)
            if traj is None:
                self.stats.task_misses += 1
                return None
            self.stats.task_hits += 1
            self._used[key] = self._tick()
            return traj

    def peek_task(self, task) -> Optional[Trajectory]:
        with self._lock:
            return self.entries.get(CacheKey.task(task))

    def _subtask_candidate(self, prompt, location: Cell, tolerance: int) -> Optional[CacheKey]:
        norm = as_prompt(prompt).normalized
        best = None
        for key, traj in self.entries.items():
            if key.tier is not Tier.SUBTASK or key.prompt != norm:
                continue
            d = chebyshev(traj.start.cell, location)
            if d > tolerance:
                continue
            rank = (d, self._inserted[key])
            if best is None or rank < best[0]:
                best = (rank, key)
        return None if best is None else best[1]

    def find_subtask(self, prompt, location: Cell, tolerance: int = 0) -> Optional[tuple[CacheKey, Trajectory]]:
        """Like :meth:`lookup_subtask` but also returns the matching key."""
        if tolerance < 0:
            raise ValueError("tolerance must be >= 0")
        with self._lock:
            key = self._subtask_candidate(prompt, location, tolerance)
            if key is None:
                self.stats.subtask_misses += 1
                return None
            self.stats.subtask_hits += 1
            self._used[key] = self._tick()
            return key, self.entries[key]

    def lookup_subtask(self, prompt, location: Cell, tolerance: int = 0) -> Optional[Trajectory]:
        """Nearest-start entry within Chebyshev ``tolerance``; ties go to the oldest entry."""
        found = self.find_subtask(prompt, location, tolerance)
        return None if found is None else found[1]

    def peek_subtask(self, prompt, location: Cell, tolerance: int = 0) -> Optional[Trajectory]:
        with self._lock:
            key = self._subtask_candidate(prompt, location, tolerance)
            return None if key is None else self.entries[key]

    # -- mutation --------------------------------------------------------

    def store(self, key: CacheKey, traj: Trajectory) -> None:
        traj.validate(key)
        with self._lock:
            t = self._tick()
            if key not in self.entries:
                self._inserted[key] = t
            self.entries[key] = traj
            self._used[key] = t
            self.stats.insertions += 1
            self._enforce_capacity(protect=key)

    def _enforce_capacity(self, protect: CacheKey) -> None:
        # the entry just written is never its own victim
        while self.capacity is not None and len(self.entries) > self.capacity:
            victims = [k for k in self.entries if k != protect and k.tier is Tier.SUBTASK]
            if not victims:
                victims = [k for k in self.entries if k != protect]
            victim = min(victims, key=lambda k: (self._used[k], self._inserted[k]))
            self._drop(victim)

    def _drop(self, key: CacheKey) -> None:
        del self.entries[key]
        del self._inserted[key]
        del self._used[key]
        self.stats.evictions += 1

    def evict(self, key: CacheKey) -> bool:
        with self._lock:
            if key not in self.entries:
                return False
            self._drop(key)
            return True

    def evict_lru(self, count: int = 1) -> list[CacheKey]:
        """Force-evict ``count`` entries using the capacity policy's ordering."""
        out = []
        with self._lock:
            for _ in range(count):
                if not self.entries:
                    break
                subs = [k for k in self.entries if k.tier is Tier.SUBTASK]
                pool = subs or list(self.entries)
                victim = min(pool, key=lambda k: (self._used[k], self._inserted[k]))
                self._drop(victim)
                out.append(victim)
        return out

    def merge_into_task(self, task, traj: Trajectory) -> None:
        """Extend the task entry with ``traj`` when it continues it, else replace it."""
        traj.validate(CacheKey.task(task))
        key = CacheKey.task(task)
        with self._lock:
            existing = self.entries.get(key)
            if existing is None:
                self.store(key, replace(traj, source=Source.MERGED))
                return
            joined = join(existing, traj)
            if joined is None:
                self.stats.discontinuities += 1
                self.store(key, replace(traj, source=Source.MERGED))
                return
            self.store(key, Trajectory(tuple(joined), existing.created_at, Source.MERGED))

    def compose(self, subtasks: Sequence[Subtask], start: Cell, tolerance: int = 0) -> Optional[Trajectory]:
        """Chain subtask entries end-to-start; all-or-nothing."""
        with self._lock:
            chain: Optional[Trajectory] = None
            here = start
            for sub in subtasks:
                frag = self.lookup_subtask(sub.prompt, here, tolerance)
                if frag is None:
                    return None
                if chain is None:
                    chain = frag
                else:
                    joined = join(chain, frag)
                    if joined is None:
                        return None
                    chain = Trajectory(tuple(joined), self._clock, Source.COMPOSED)
                here = chain.end.cell
            if chain is None:
                return None
            return replace(chain, source=Source.COMPOSED)

    # -- inspection ------------------------------------------------------

    def invalid_against(self, navigable) -> list[CacheKey]:
        """Keys whose trajectories leave ``navigable(cell)`` or break adjacency."""
        with self._lock:
            bad = []
            for key, traj in self.entries.items():
                if traj.problems() or not all(navigable(p.cell) for p in traj.waypoints):
                    bad.append(key)
            return bad

    # -- persistence -----------------------------------------------------

    def to_json(self) -> dict:
        with self._lock:
            return {
                "version": CACHE_VERSION,
                "capacity": self.capacity,
                "clock": self._clock,
                "entries": [
                    {
                        "tier": key.tier.value,
                        "prompt": key.prompt,
                        "location": list(key.location) if key.location is not None else None,
                        "waypoints": traj.to_json(),
                        "meta": {
                            "created_at": traj.created_at,
                            "source": traj.source.value,
                            "inserted": self._inserted[key],
                            "used": self._used[key],
                        },
                    }
                    for key, traj in self.entries.items()
                ],
                "stats": asdict(self.stats),
            }

    def save(self) -> bytes:
        return (json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n").encode()

    @classmethod
    def load(cls, data: bytes | str, strict: bool = True) -> "TrajectoryCache":
        """Parse a saved cache. With ``strict=False`` invalid trajectories are
        skipped and their keys collected in ``cache.rejected`` instead of raising."""
        try:
            obj = json.loads(data)
        except (ValueError, UnicodeDecodeError) as exc:
            raise ParseError(f"cache file is not JSON: {exc}") from exc
        if not isinstance(obj, dict) or obj.get("version") != CACHE_VERSION:
            raise ParseError("not a version-1 cache file")
        cache = cls(capacity=obj.get("capacity"))
        try:
            for entry in obj["entries"]:
                loc = entry.get("location")
                key = CacheKey(Tier(entry["tier"]), entry["prompt"], tuple(loc) if loc is not None else None)
                meta = entry.get("meta", {})
                traj = Trajectory(
                    tuple(_pose(w) for w in entry["waypoints"]),
                    int(meta.get("created_at", 0)),
                    Source(meta.get("source", "backend")),
                )
                if not strict and traj.problems():
                    cache.rejected.append(key)
                    continue
                traj.validate(key)
                cache.entries[key] = traj
                cache._inserted[key] = int(meta.get("inserted", len(cache.entries)))
                cache._used[key] = int(meta.get("used", cache._inserted[key]))
            cache.stats = CacheStats(**obj.get("stats", {}))
            cache._clock = int(obj.get("clock", max(cache._used.values(), default=0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad cache entry: {exc}") from exc
        return cache


def trajectory_from_poses(poses: Sequence[Pose], created_at: int = 0, source: Source = Source.BACKEND) -> Trajectory:
    """Drop repeated poses (blocked moves) so the result satisfies the adjacency rule."""
    out: list[Pose] = []
    for p in poses:
        if not out or out[-1] != p:
            out.append(p)
    return Trajectory(tuple(out), created_at, source)
