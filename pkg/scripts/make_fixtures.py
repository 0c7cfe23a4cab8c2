"""Regenerate the fixture maps under fixtures/.

    python scripts/make_fixtures.py [--out fixtures]

Every map is produced from code so the layouts are reviewable and reproducible.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path


class Canvas:
    def __init__(self, w: int, h: int, fill: str = "."):
        self.w, self.h = w, h
        self.rows = [[fill] * w for _ in range(h)]

    def rect(self, x0, y0, x1, y1, ch):
        for y in range(y0, y1 + 1):
            for x in range(x0, x1 + 1):
                self.rows[y][x] = ch

    def border(self):
        self.rect(0, 0, self.w - 1, 0, "#")
        self.rect(0, self.h - 1, self.w - 1, self.h - 1, "#")
        self.rect(0, 0, 0, self.h - 1, "#")
        self.rect(self.w - 1, 0, self.w - 1, self.h - 1, "#")

    def put(self, x, y, ch):
        self.rows[y][x] = ch

    def text(self) -> str:
        return "".join("".join(r) + "\n" for r in self.rows)


def open_11():
    c = Canvas(11, 11)
    c.put(5, 5, "@")
    return c, {"regions": {}, "landmarks": [], "cell_size_m": 0.25}


def two_room_15():
    c = Canvas(15, 15)
    c.border()
    c.rect(7, 1, 7, 13, "#")
    c.put(7, 7, ".")
    c.put(3, 7, "@")
    return c, {"regions": {}, "landmarks": [], "cell_size_m": 0.25}


def two_room_20():
    c = Canvas(20, 20)
    c.border()
    c.rect(1, 1, 9, 18, "a")
    c.rect(11, 1, 18, 18, "k")
    c.rect(10, 1, 10, 18, "#")
    c.put(10, 9, ".")
    c.put(10, 10, ".")
    c.put(2, 17, "@")
    meta = {
        "regions": {"a": "living room", "k": "kitchen"},
        "landmarks": [
            {"id": "sofa", "x": 3, "y": 3, "region": "a"},
            {"id": "bookshelf", "x": 8, "y": 2, "region": "a"},
            {"id": "fridge", "x": 17, "y": 2, "region": "k"},
            {"id": "stove", "x": 17, "y": 17, "region": "k"},
        ],
        "cell_size_m": 0.25,
    }
    return c, meta


def apartment():
    c = Canvas(20, 20)
    c.border()
    c.rect(1, 1, 10, 18, "a")  # living room
    c.rect(12, 1, 18, 9, "k")  # kitchen
    c.rect(12, 11, 18, 18, "e")  # entrance
    c.rect(11, 1, 11, 18, "#")
    c.rect(12, 10, 18, 10, "#")
    c.put(11, 5, ".")  # living room <-> kitchen
    c.put(11, 14, ".")  # living room <-> entrance
    c.put(15, 10, ".")  # kitchen <-> entrance
    c.rect(4, 8, 6, 9, "#")  # coffee table block
    c.rect(13, 3, 14, 4, "#")  # kitchen island
    c.put(16, 17, "@")
    meta = {
        "regions": {"a": "living room", "k": "kitchen", "e": "entrance"},
        "landmarks": [
            {"id": "bookshelf", "x": 1, "y": 1, "region": "a"},
            {"id": "coffee_table", "x": 5, "y": 10, "region": "a"},
            {"id": "sofa", "x": 2, "y": 16, "region": "a"},
            {"id": "fridge", "x": 18, "y": 1, "region": "k"},
            {"id": "sink", "x": 12, "y": 7, "region": "k"},
            {"id": "front_door", "x": 18, "y": 18, "name": "front door", "region": "e"},
        ],
        "cell_size_m": 0.25,
    }
    return c, meta


def office_32x24():
    c = Canvas(32, 24)
    c.border()
    # horizontal corridor rows 10..12, four rooms above and below
    c.rect(1, 9, 30, 9, "#")
    c.rect(1, 13, 30, 13, "#")
    for x in (8, 16, 24):
        c.rect(x, 1, x, 8, "#")
        c.rect(x, 14, x, 22, "#")
    letters = iter("abcdefgh")
    for y0, y1, door_y in ((1, 8, 9), (14, 22, 13)):
        for x0, x1 in ((1, 7), (9, 15), (17, 23), (25, 30)):
            c.rect(x0, y0, x1, y1, next(letters))
            c.put((x0 + x1) // 2, door_y, ".")
    c.rect(12, 4, 13, 5, "#")  # desk
    c.put(2, 11, "@")
    names = ["office a", "office b", "meeting room", "office d", "lab", "storage", "lounge", "server room"]
    meta = {
        "regions": dict(zip("abcdefgh", names)),
        "landmarks": [
            {"id": "printer", "x": 27, "y": 2, "region": "d"},
            {"id": "whiteboard", "x": 18, "y": 1, "region": "c"},
            {"id": "coffee_machine", "x": 19, "y": 21, "name": "coffee machine", "region": "g"},
        ],
        "cell_size_m": 0.25,
    }
    return c, meta


def rooms_48():
    c = Canvas(48, 48)
    c.border()
    for k in (16, 32):
        c.rect(k, 1, k, 46, "#")
        c.rect(1, k, 46, k, "#")
    # doors: a spanning tree plus one loop
    for y in (8, 24, 40):
        c.put(16, y, ".")
    c.put(32, 8, ".")
    c.put(32, 40, ".")
    for x in (8, 40):
        c.put(x, 16, ".")
        c.put(x, 32, ".")
    c.put(24, 32, ".")
    # pillars
    for px, py in ((6, 6), (22, 22), (38, 38), (38, 6), (6, 38)):
        c.rect(px, py, px + 2, py + 2, "#")
    c.put(2, 2, "@")
    return c, {"regions": {}, "landmarks": [], "cell_size_m": 0.25}


def warehouse_64():
    c = Canvas(64, 64)
    c.border()
    # shelving rows with aisles
    for y in range(6, 58, 6):
        for x0 in (4, 22, 40):
            c.rect(x0, y, x0 + 14, y + 1, "#")
    c.rect(30, 1, 30, 4, "#")
    c.put(1, 62, "@")
    meta = {
        "regions": {},
        "landmarks": [{"id": "loading_dock", "x": 60, "y": 2, "name": "loading dock"}],
        "cell_size_m": 0.25,
    }
    return c, meta


def sealed_closet():
    """Free space is NOT connected: a closet without a door."""
    c = Canvas(12, 10)
    c.border()
    c.rect(7, 1, 7, 8, "#")
    c.rect(8, 5, 10, 5, "#")
    c.put(2, 2, "@")
    return c, {"regions": {}, "landmarks": [], "cell_size_m": 0.25}


FIXTURES = {
    "open_11": open_11,
    "two_room_15": two_room_15,
    "two_room_20": two_room_20,
    "apartment": apartment,
    "office_32x24": office_32x24,
    "rooms_48": rooms_48,
    "warehouse_64": warehouse_64,
    "sealed_closet": sealed_closet,
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "fixtures"))
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, build in FIXTURES.items():
        canvas, meta = build()
        (out / f"{name}.map").write_text(canvas.text())
        (out / f"{name}.json").write_text(json.dumps(meta, indent=2) + "\n")
        print(f"wrote {name} ({canvas.w}x{canvas.h})")


if __name__ == "__main__":
    main()
