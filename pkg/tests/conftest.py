from __future__ import annotations

import functools

import pytest
from hypothesis import HealthCheck, settings

from csvortex import Flat, GaussianBump, Grid, PowerGrowth, SolveSettings, VortexConfiguration, solve

settings.register_profile(
    "ci", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ci")

METRICS = {
    "flat": Flat(),
    "bump": GaussianBump(amplitude=1.0, sigma=2.0),
    "power": PowerGrowth(exponent=0.5),
}

# vortex layouts: total vorticity n at the origin or spread over generic offsets
LAYOUTS = {
    ("origin", 1): ((0.0, 0.0, 1),),
    ("origin", 2): ((0.0, 0.0, 2),),
    ("origin", 3): ((0.0, 0.0, 3),),
    ("offset", 1): ((0.7, -0.4, 1),),
    ("offset", 2): ((1.3, 0.6, 1), (-1.1, -0.9, 1)),
    ("offset", 3): ((1.5, 0.2, 1), (-0.8, 1.3, 1), (-0.6, -1.4, 1)),
    ("none", 0): (),
}

LADDER = {513: (129, 257, 513), 257: (129, 257), 129: None}


@functools.lru_cache(maxsize=None)
def cached_solve(layout: str, n: int, metric: str = "flat", mu: float = 1.0, nodes: int = 513, method: str = "both"):
    """One solve per distinct configuration for the whole session."""
    vc = VortexConfiguration.at(*LAYOUTS[(layout, n)], mu=mu)
    st = SolveSettings(method=method, continuation=LADDER.get(nodes) if method == "both" else None)
    return solve(vc, METRICS[metric], Grid(16.0, nodes), st)


@pytest.fixture(scope="session")
def solved():
    return cached_solve


# ---------------------------------------------------------------------------
# acceptance summary: one line per criterion at the end of the run

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def record_criterion():
    def record(number: int, title: str, passed: bool, detail: str) -> None:
        ACCEPTANCE[number] = (title, passed, detail)
        print(f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{number:2d}. {'PASS' if passed else 'FAIL'}  {title}: {detail}")
