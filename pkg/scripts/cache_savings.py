"""Cold versus warm trajectory-cache experiment on the fixture maps.

    python scripts/cache_savings.py [--maps apartment two_room_20] [--out results/cache_savings]

For each map the scene graph comes from frontier exploration. Two suites then
run from the map's default start:

  single     "go to the <landmark>" for every landmark
  composite  "go to the <a> and then go to the <b>" for consecutive landmark pairs

``single`` runs on an empty cache and again on the cache it filled, so the
second pass is pure task-level replay. ``composite`` runs once on an empty
cache and once on the cache left by ``single``. Its first subtask is then
served from the subtask tier, and only the second leg needs the backend.
Timing uses the latency model, so the numbers are reproducible. Composite SPL
sits well below 100 because the path visits both landmarks while the shortest
path is measured to the final one only.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from gridnav.backends import frontier_backend, oracle_backend
from gridnav.cache import TrajectoryCache
from gridnav.explore import ExplorationConfig, explore
from gridnav.metrics import episode_metrics, json_report, suite_metrics, text_report
from gridnav.plan import Episode, PlanConfig, run_episode
from gridnav.world import default_start, load_map

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def load(name):
    side = FIXTURES / f"{name}.json"
    return load_map((FIXTURES / f"{name}.map").read_text(), side.read_text() if side.exists() else None)


def suites(world):
    start = default_start(world)
    names = sorted(world.landmarks)
    label = {lid: world.landmarks[lid].name for lid in names}
    single = [Episode(f"s-{lid}", start, f"go to the {label[lid]}", lid) for lid in names]
    pairs = list(zip(names, names[1:]))
    composite = [
        Episode(f"c-{a}-{b}", start, f"go to the {label[a]} and then go to the {label[b]}", b) for a, b in pairs
    ]
    return single, composite


def run(world, graph, cache, episodes, cfg, price):
    records = [run_episode(world, graph, cache, oracle_backend(), None, ep, cfg) for ep in episodes]
    return records, [episode_metrics(r, world, price_per_call_usd=price) for r in records]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--maps", nargs="+", default=["two_room_20", "apartment", "office_32x24"])
    ap.add_argument("--goal-radius-cells", type=float, default=2.0,
                    help="tight radius so each leg travels; the scored radius stays 3 m")
    ap.add_argument("--call-latency", type=float, default=2.0)
    ap.add_argument("--price-per-call", type=float, default=0.0)
    ap.add_argument("--out", default="results/cache_savings")
    args = ap.parse_args(argv)

    cfg = PlanConfig(goal_radius_cells=args.goal_radius_cells, timing="model", call_latency_s=args.call_latency)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for name in args.maps:
        world = load(name)
        if len(world.landmarks) < 2:
            print(f"== {name}: skipped, needs at least two landmarks")
            continue
        explored = explore(world, default_start(world), frontier_backend(), ExplorationConfig(max_steps=5000))
        graph = explored.graph
        single, composite = suites(world)

        cache = TrajectoryCache()
        _, cold = run(world, graph, cache, single, cfg, args.price_per_call)
        _, warm = run(world, graph, cache, single, cfg, args.price_per_call)
        _, comp_cold = run(world, graph, TrajectoryCache(), composite, cfg, args.price_per_call)
        _, comp_warm = run(world, graph, cache, composite, cfg, args.price_per_call)

        base = suite_metrics(cold)
        comp_base = suite_metrics(comp_cold)
        rows = [
            ("single/cold", base),
            ("single/warm", suite_metrics(warm, base)),
            ("composite/cold", comp_base),
            ("composite/warm", suite_metrics(comp_warm, comp_base)),
        ]
        print(f"== {name}: {len(single)} single, {len(composite)} composite episodes, "
              f"exploration {explored.termination.value} after {explored.steps_taken} steps")
        print(text_report(rows))
        (out / f"{name}.txt").write_text(text_report(rows))
        (out / f"{name}.json").write_text(json_report(rows))
        summary[name] = {cond: s.to_json() for cond, s in rows}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
