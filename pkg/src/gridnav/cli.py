"""Command-line entry points.

    gridnav explore --map fixtures/apartment.map --backend frontier --max-steps 500 --out out/
    gridnav run --map fixtures/apartment.map --scenegraph out/scenegraph.json \\
        --episodes episodes.json --backend oracle --compare-cache --out out/run
    gridnav render --scenegraph out/scenegraph.json --out map.ppm
    gridnav cache inspect --cache cache.json

Exit codes: 0 ok, 1 check failed, 2 usage, 3 input/output, 4 backend.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional

from .backends import frontier_backend, oracle_backend
from .cache import TrajectoryCache
from .errors import (
    BackendError,
    ConsistencyError,
    GridNavError,
    InvalidTrajectoryError,
    ParseError,
    UnreachableGoalError,
    UnresolvedTargetError,
)
from .explore import ExplorationConfig, explore
from .metrics import episode_metrics, json_report, suite_metrics, text_report
from .plan import PlanConfig, load_episodes, run_episode
from .scenegraph import DEFAULT_VOID_THRESHOLD, SceneGraph, dumps, loads, render
from .world import Pose, default_start, load_map

log = logging.getLogger("gridnav")

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO, EXIT_BACKEND = 0, 1, 2, 3, 4
BACKENDS = ("frontier", "oracle", "vlm")


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


def _read(path: str, binary: bool = False):
    p = Path(path)
    try:
        return p.read_bytes() if binary else p.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _write(path: Path, data) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(data, bytes):
            path.write_bytes(data)
        else:
            path.write_text(data, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _load_world(map_path: str, sidecar: Optional[str] = None):
    text = _read(map_path)
    side = sidecar or str(Path(map_path).with_suffix(".json"))
    side_text = _read(side) if (sidecar or Path(side).exists()) else None
    return load_map(text, side_text)


def _load_graph(path: str) -> SceneGraph:
    return loads(_read(path))


def _vlm_backend(args):
    # imported lazily so the deterministic backends never need httpx
    from .vlmclient import VlmBackend, VlmClient, VlmConfig

    if not args.vlm_endpoint:
        raise UsageError("--backend vlm needs --vlm-endpoint")
    cfg = VlmConfig.from_env(
        args.vlm_endpoint,
        model=args.vlm_model,
        max_retries=args.vlm_retries,
        price_per_call_usd=args.price_per_call,
    )
    return VlmBackend(VlmClient(cfg))


def _backend(args, allowed):
    if args.backend not in allowed:
        raise UsageError(f"backend {args.backend!r} is not valid here; choose from {', '.join(allowed)}")
    if args.backend == "frontier":
        return frontier_backend()
    if args.backend == "oracle":
        return oracle_backend()
    return _vlm_backend(args)


# -- explore -----------------------------------------------------------------


def cmd_explore(args) -> int:
    world = _load_world(args.map, args.sidecar)
    backend = _backend(args, ("frontier", "vlm"))
    cfg = ExplorationConfig(
        max_steps=args.max_steps,
        wall_clock_limit=args.wall_clock_secs,
        fov_deg=args.fov,
        range_cells=args.range,
        void_threshold=args.void_threshold,
        constraints=tuple(args.constraint),
    )
    try:
        result = explore(world, default_start(world), backend, cfg)
    except BackendError as exc:
        if exc.partial is not None:
            _write_exploration(Path(args.out), exc.partial)
        raise
    _write_exploration(Path(args.out), result)
    print(
        f"{result.termination.value}: {result.steps_taken} steps, "
        f"{result.backend_calls} backend calls, covered {result.coverage.covered_fraction:.3f}"
    )
    return EXIT_OK


def _write_exploration(out: Path, result) -> None:
    _write(out / "scenegraph.json", dumps(result.graph))
    _write(out / "trajectory.ppm", render(result.graph))
    _write(out / "exploration.json", result.dumps())


# -- run ---------------------------------------------------------------------


def _run_suite(world, graph, cache, backend_factory, episodes, cfg, jobs):
    def one(ep):
        return run_episode(world, graph, cache, backend_factory(), None, ep, cfg)

    if jobs <= 1:
        return [one(ep) for ep in episodes]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, episodes))


def cmd_run(args) -> int:
    world = _load_world(args.map, args.sidecar)
    graph = _load_graph(args.scenegraph)
    if (graph.width, graph.height) != (world.width, world.height):
        raise UsageError("scene graph and map sizes differ")
    episodes = load_episodes(_read(args.episodes))
    _backend(args, ("oracle", "vlm"))  # validate the name before doing any work
    shared = _vlm_backend(args) if args.backend == "vlm" else None

    def backend_factory():
        return shared if shared is not None else oracle_backend()

    cfg = PlanConfig(
        goal_radius_cells=args.goal_radius_m / world.cell_size_m,
        max_steps=args.max_steps,
        timing=args.timing,
    )
    cache_off = args.cache == "none"
    cache_path = None if cache_off or args.cache is None else Path(args.cache)
    if cache_off:
        cache = None
    elif args.compare_cache:
        cache = TrajectoryCache()  # the cold pass must start empty
    elif cache_path is not None and cache_path.exists():
        cache = TrajectoryCache.load(_read(str(cache_path), binary=True))
    elif cache_path is not None:
        cache = TrajectoryCache()
    else:
        cache = None

    conditions = ["cold", "warm"] if args.compare_cache else ["run"]
    out = Path(args.out)
    rows, per_episode = [], {}
    baseline = None
    for name in conditions:
        records = _run_suite(world, graph, cache, backend_factory, episodes, cfg, args.jobs)
        metrics = [episode_metrics(r, world, price_per_call_usd=args.price_per_call) for r in records]
        suite = suite_metrics(metrics, baseline)
        baseline = baseline or suite
        rows.append((name, suite))
        per_episode[name] = metrics
        _write(out / f"records_{name}.json", json.dumps([r.to_json() for r in records], indent=1, sort_keys=True) + "\n")

    report = text_report(rows)
    _write(out / "metrics.txt", report)
    _write(out / "metrics.json", json_report(rows, per_episode))
    if cache is not None and cache_path is not None:
        _write(cache_path, cache.save())
    sys.stdout.write(report)
    return EXIT_OK


# -- render ------------------------------------------------------------------


def cmd_render(args) -> int:
    if args.scenegraph:
        graph = _load_graph(args.scenegraph)
    elif args.map:
        graph = SceneGraph.from_world(_load_world(args.map, args.sidecar))
    else:
        raise UsageError("render needs --scenegraph or --map")
    overlay = None
    if args.records:
        records = json.loads(_read(args.records))
        match = [r for r in records if args.episode in (None, r["episode_id"])]
        if not match:
            raise UsageError(f"episode {args.episode!r} not in {args.records}")
        overlay = [tuple(p) for p in match[0]["trajectory"]]
        graph = replace(graph, start=Pose.from_json(match[0]["start"]))
    _write(Path(args.out), render(graph, overlay))
    print(f"wrote {args.out}")
    return EXIT_OK


# -- cache -------------------------------------------------------------------


def cmd_cache(args) -> int:
    path = args.cache
    if args.action == "validate":
        cache = TrajectoryCache.load(_read(path, binary=True), strict=False)
        bad = list(cache.rejected)
        if args.scenegraph:
            graph = _load_graph(args.scenegraph)
            bad += cache.invalid_against(lambda c: graph.in_bounds(c) and graph.is_navigable(c))
        for key in bad:
            print(f"invalid: {key}")
        print(f"{len(cache.entries) + len(cache.rejected)} entries, {len(bad)} invalid")
        return EXIT_CHECK if bad else EXIT_OK

    cache = TrajectoryCache.load(_read(path, binary=True))
    if args.action == "inspect":
        print(f"{len(cache)} entries")
        for key, traj in sorted(cache.entries.items(), key=lambda kv: str(kv[0])):
            print(f"  {key}  waypoints={len(traj)} moves={traj.moves()} source={traj.source.value}")
        s = cache.stats
        print(
            f"hits task={s.task_hits} subtask={s.subtask_hits}  misses task={s.task_misses} "
            f"subtask={s.subtask_misses}  insertions={s.insertions} evictions={s.evictions}"
        )
        return EXIT_OK

    # evict
    if args.all:
        victims = cache.evict_lru(len(cache))
    else:
        victims = cache.evict_lru(args.count)
    for key in victims:
        print(f"evicted: {key}")
    _write(Path(path), cache.save())
    return EXIT_OK


# -- parser ------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_backend_flags(p) -> None:
    p.add_argument("--backend", default=None, help=f"one of {', '.join(BACKENDS)}")
    p.add_argument("--vlm-endpoint", default=None)
    p.add_argument("--vlm-model", default="gpt-4.1")
    p.add_argument("--vlm-retries", type=int, default=3)
    p.add_argument("--price-per-call", type=float, default=0.0, help="USD per backend call")
    p.add_argument("--seed", type=int, default=0, help="accepted for reproducibility; every built-in backend is deterministic")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="gridnav", description="Grid-world exploration and cached deployment.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("explore", help="explore a map and write its scene graph")
    p.add_argument("--map", required=True)
    p.add_argument("--sidecar", default=None, help="defaults to the map path with .json")
    p.add_argument("--out", default="out")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--wall-clock-secs", type=float, default=None)
    p.add_argument("--fov", type=float, default=120.0)
    p.add_argument("--range", type=int, default=10)
    p.add_argument("--void-threshold", type=int, default=DEFAULT_VOID_THRESHOLD)
    p.add_argument("--constraint", action="append", default=[])
    _add_backend_flags(p)
    p.set_defaults(func=cmd_explore, backend_default="frontier")

    p = sub.add_parser("run", help="run deployment episodes")
    p.add_argument("--map", required=True)
    p.add_argument("--sidecar", default=None)
    p.add_argument("--scenegraph", required=True)
    p.add_argument("--episodes", required=True)
    p.add_argument("--cache", default=None, help="cache file path, or 'none' to disable caching")
    p.add_argument("--compare-cache", action="store_true", help="run cold then warm and report savings")
    p.add_argument("--out", default="out/run")
    p.add_argument("--max-steps", type=int, default=500)
    p.add_argument("--goal-radius-m", type=float, default=3.0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--timing", choices=("model", "wall"), default="model")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_run, backend_default="oracle")

    p = sub.add_parser("render", help="render a scene graph as PPM")
    p.add_argument("--scenegraph", default=None)
    p.add_argument("--map", default=None)
    p.add_argument("--sidecar", default=None)
    p.add_argument("--records", default=None, help="records JSON from `run` to overlay")
    p.add_argument("--episode", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("cache", help="inspect, validate or evict cache entries")
    p.add_argument("action", choices=("inspect", "validate", "evict"))
    p.add_argument("--cache", required=True)
    p.add_argument("--scenegraph", default=None, help="validate against this graph")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--all", action="store_true")
    p.set_defaults(func=cmd_cache)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("a command is required")
        if hasattr(args, "backend_default") and args.backend is None:
            args.backend = args.backend_default
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"gridnav: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UnresolvedTargetError, UnreachableGoalError, ConsistencyError, ValueError) as exc:
        print(f"gridnav: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, ParseError, InvalidTrajectoryError) as exc:
        print(f"gridnav: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BackendError as exc:
        print(f"gridnav: backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except GridNavError as exc:
        print(f"gridnav: error: {exc}", file=sys.stderr)
        return EXIT_CHECK
