"""Shared geometries and the acceptance summary printed at the end of a run."""
from __future__ import annotations

from pathlib import Path

import pytest

from ballschwarz import chain, lattice, load_xyzr

DATA = Path(__file__).parent / "data"

# name -> (constructor, grid spacing used by solver-level tests)
FIXTURES = {
    "single": (lambda: chain(1, r=1.0), 1 / 6),
    "two_ball": (lambda: chain(2, 2.0, 2.0), 1 / 3),
    "chain5": (lambda: chain(5), 0.15),
    "lattice2": (lambda: lattice(2, 2, 2), 0.15),
    "lattice3": (lambda: lattice(3, 3, 3), 0.15),
    "cluster7": (lambda: load_xyzr(DATA / "cluster7.xyzr"), 1 / 6),
}

_cache: dict = {}


def fixture_union(name):
    if name not in _cache:
        _cache[name] = FIXTURES[name][0]()
    return _cache[name]


@pytest.fixture(params=list(FIXTURES), scope="session")
def any_fixture(request):
    return request.param, fixture_union(request.param), FIXTURES[request.param][1]


@pytest.fixture(scope="session")
def two_ball():
    return fixture_union("two_ball")


@pytest.fixture(scope="session")
def single():
    return fixture_union("single")


@pytest.fixture(scope="session")
def lattice3():
    return fixture_union("lattice3")


@pytest.fixture(scope="session")
def cluster7():
    return fixture_union("cluster7")


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
