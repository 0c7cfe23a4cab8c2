from __future__ import annotations

import os
from functools import lru_cache
from pathlib import Path

import pytest

from gridnav.scenegraph import SceneGraph
from gridnav.world import GridWorld, load_map

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
GOLDEN = Path(__file__).resolve().parent / "golden"
DATA = Path(__file__).resolve().parent / "data"

CONNECTED_FIXTURES = ["open_11", "two_room_15", "two_room_20", "apartment", "office_32x24", "rooms_48", "warehouse_64"]
ALL_FIXTURES = CONNECTED_FIXTURES + ["sealed_closet"]


@lru_cache(maxsize=None)
def load_fixture(name: str) -> GridWorld:
    side = FIXTURES / f"{name}.json"
    return load_map((FIXTURES / f"{name}.map").read_bytes(), side.read_bytes() if side.exists() else None)


@lru_cache(maxsize=None)
def full_graph(name: str) -> SceneGraph:
    return SceneGraph.from_world(load_fixture(name))


def check_golden(name: str, data: bytes | str) -> None:
    """Compare against tests/golden/<name>; GRIDNAV_UPDATE_GOLDEN=1 rewrites it."""
    if isinstance(data, str):
        data = data.encode()
    path = GOLDEN / name
    if os.environ.get("GRIDNAV_UPDATE_GOLDEN") == "1" or not path.exists():
        if os.environ.get("GRIDNAV_UPDATE_GOLDEN") != "1":
            pytest.fail(f"missing golden file {path}; rerun with GRIDNAV_UPDATE_GOLDEN=1")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    assert data == path.read_bytes(), f"{name} differs from golden file"


# one summary line per acceptance criterion, whatever the verbosity

_criteria: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        _criteria[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria, key=lambda n: int(n.split("_")[2])):
        terminalreporter.write_line(f"{_criteria[name]}  {name}")
