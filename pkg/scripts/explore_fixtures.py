"""Frontier exploration on every fixture map, with a coverage table.

    python scripts/explore_fixtures.py [--fov 120] [--range 10] [--out results/explore]

Writes each explored scene graph and its render next to a summary JSON.
"""

from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

from gridnav.backends import frontier_backend
from gridnav.explore import ExplorationConfig, explore
from gridnav.scenegraph import dumps, render
from gridnav.world import default_start, load_map

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fov", type=float, default=120.0)
    ap.add_argument("--range", type=int, default=10)
    ap.add_argument("--max-steps", type=int, default=None)
    ap.add_argument("--out", default="results/explore")
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    print(f"{'map':<14} {'size':>7} {'steps':>6} {'covered':>8} {'voids':>5}  termination  seconds")
    for path in sorted(FIXTURES.glob("*.map")):
        side = path.with_suffix(".json")
        world = load_map(path.read_text(), side.read_text() if side.exists() else None)
        cfg = ExplorationConfig(max_steps=args.max_steps, fov_deg=args.fov, range_cells=args.range)
        t0 = time.perf_counter()
        result = explore(world, default_start(world), frontier_backend(), cfg)
        secs = time.perf_counter() - t0
        cov = result.coverage
        rows.append({"map": path.stem, **result.to_json(), "seconds": round(secs, 3)})
        print(f"{path.stem:<14} {world.width:>3}x{world.height:<3} {result.steps_taken:>6} "
              f"{cov.covered_fraction:>8.3f} {len(cov.interior_voids):>5}  {result.termination.value:<12} {secs:7.2f}")
        (out / f"{path.stem}.scenegraph.json").write_text(dumps(result.graph))
        (out / f"{path.stem}.ppm").write_bytes(render(result.graph))
    (out / "summary.json").write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
