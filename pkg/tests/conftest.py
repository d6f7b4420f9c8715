from __future__ import annotations

import math

import numpy as np
import pytest

from crabgate.swarm import Agent, World


class FixedUniformRng:
    """Stands in for a Generator whose ``uniform`` always returns one value."""

    def __init__(self, value: float):
        self.value = value

    def uniform(self, low, high, size=None):
        return np.full(size, self.value)


def bounded(width: int, height: int, walls=()) -> World:
    grid = np.zeros((height, width), dtype=bool)
    for c, r in walls:
        grid[r, c] = True
    return World(grid)


def scatter(world: World, n: int, rng: np.random.Generator) -> list[Agent]:
    """``n`` agents on distinct free cells with random unit headings."""
    cells = world.free_cells()
    idx = rng.choice(len(cells), size=n, replace=False)
    agents = []
    for i, c in enumerate(idx.tolist()):
        t = rng.uniform(-math.pi, math.pi)
        agents.append(Agent(i, cells[c], (math.cos(t), math.sin(t))))
    world.place(agents)
    return agents


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def report(number: int, ok: bool, detail: str) -> bool:
    """Record one acceptance verdict line; it is echoed in the terminal summary."""
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
