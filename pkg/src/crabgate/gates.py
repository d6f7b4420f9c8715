"""Collision gates on ASCII layouts: parsing, seeding, runs and decisions.

A layout file holds two equally sized grids::

    ; comment
    MAP
    #######
    #A.2.B#
    #######
    FLOW
    .......
    .>.^.<.
    .......

MAP legend: ``#`` wall, ``.`` free, ``A``/``B`` input regions, ``1``/``2``/``3``
output regions. FLOW legend: ``^ v < >`` unit wall-bias vectors, ``.`` none.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .swarm import Agent, ModelParams, StepTelemetry, World, make_rng, step

INPUT_LABELS = ("A", "B")
OUTPUT_LABELS = ("1", "2", "3")
UNRESOLVED = "unresolved"
INPUT_PAIRS = ((0, 0), (0, 1), (1, 0), (1, 1))

_MAP_CHARS = set("#.") | set(INPUT_LABELS) | set(OUTPUT_LABELS)
_FLOW_VECTORS = {"^": (0.0, -1.0), "v": (0.0, 1.0), "<": (-1.0, 0.0), ">": (1.0, 0.0)}


class LayoutError(ValueError):
    """Malformed layout text; carries a 1-based line and column when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line, self.column = line, column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


@dataclass(frozen=True)
class GateLayout:
    name: str
    walls: np.ndarray
    flow: np.ndarray
    input_regions: dict[str, frozenset]
    output_regions: dict[str, frozenset]

    def world(self) -> World:
        """Fresh, empty world for one run."""
        return World(self.walls, flow=self.flow)

    def region_flow(self, label: str):
        """Mean flow direction over an input region, or None without flow."""
        cells = self.input_regions[label]
        vs = [self.flow[r, c] for c, r in cells if np.any(self.flow[r, c])]
        if not vs:
            return None
        m = np.mean(vs, axis=0)
        n = math.hypot(m[0], m[1])
        if n < 1e-9:
            return None
        return float(m[0] / n), float(m[1] / n)


@dataclass
class GateRunResult:
    counts: dict[str, int]
    steps_used: int
    n_agents: int
    telemetry: list[StepTelemetry] = field(default_factory=list)


def _grid_section(lines, start, label):
    rows = []
    for lineno, text in lines[start:]:
        if text in ("MAP", "FLOW"):
            break
        rows.append((lineno, text))
    if not rows:
        raise LayoutError(f"section {label} is empty", lines[start - 1][0])
    return rows


def parse_layout(text: str, name: str = "layout") -> GateLayout:
    lines = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        stripped = raw.rstrip("\r")
        if not stripped.strip() or stripped.lstrip().startswith(";"):
            continue
        lines.append((lineno, stripped.rstrip()))

    headers = {t: i for i, (_, t) in enumerate(lines) if t in ("MAP", "FLOW")}
    for section in ("MAP", "FLOW"):
        if section not in headers:
            raise LayoutError(f"missing {section} section")
    map_rows = _grid_section(lines, headers["MAP"] + 1, "MAP")
    flow_rows = _grid_section(lines, headers["FLOW"] + 1, "FLOW")

    width = len(map_rows[0][1])
    for rows, label in ((map_rows, "MAP"), (flow_rows, "FLOW")):
        for lineno, row in rows:
            if len(row) != width:
                raise LayoutError(f"{label} row has width {len(row)}, expected {width}", lineno)
    if len(flow_rows) != len(map_rows):
        raise LayoutError(
            f"FLOW has {len(flow_rows)} rows but MAP has {len(map_rows)}", flow_rows[0][0])

    height = len(map_rows)
    walls = np.zeros((height, width), dtype=bool)
    regions: dict[str, set] = {k: set() for k in INPUT_LABELS + OUTPUT_LABELS}
    for r, (lineno, row) in enumerate(map_rows):
        for c, ch in enumerate(row):
            if ch not in _MAP_CHARS:
                raise LayoutError(f"unknown MAP character {ch!r}", lineno, c + 1)
            if ch == "#":
                walls[r, c] = True
            elif ch != ".":
                regions[ch].add((c, r))

    padded = np.pad(walls, 1, constant_values=True)
    flow = np.zeros((height, width, 2))
    for r, (lineno, row) in enumerate(flow_rows):
        for c, ch in enumerate(row):
            if ch == ".":
                continue
            if ch not in _FLOW_VECTORS:
                raise LayoutError(f"unknown FLOW character {ch!r}", lineno, c + 1)
            if walls[r, c]:
                raise LayoutError("flow arrow on a wall cell", lineno, c + 1)
            if not padded[r:r + 3, c:c + 3].any():
                raise LayoutError("flow arrow not adjacent to a wall", lineno, c + 1)
            flow[r, c] = _FLOW_VECTORS[ch]

    outputs = {k: frozenset(regions[k]) for k in OUTPUT_LABELS if regions[k]}
    if not outputs:
        raise LayoutError("layout has no output region")
    inputs = {k: frozenset(regions[k]) for k in INPUT_LABELS}
    for k in INPUT_LABELS:
        if not inputs[k]:
            raise LayoutError(f"layout has no input region {k}")
    return GateLayout(name, walls, flow, inputs, outputs)


def load_layout(path) -> GateLayout:
    path = Path(path)
    if not path.exists() and not path.is_absolute() and path.parent == Path("."):
        bundled = resources.files("crabgate") / "layouts" / path.name
        if bundled.is_file():
            return parse_layout(bundled.read_text(), name=path.stem)
    return parse_layout(path.read_text(), name=path.stem)


def bundled_layout(name: str) -> GateLayout:
    """``"or"`` or ``"and"``."""
    text = (resources.files("crabgate") / "layouts" / f"{name}.map").read_text()
    return parse_layout(text, name=name)


def seed_inputs(layout: GateLayout, inputs, n_per_input: int, rng: np.random.Generator):
    """Place ``n_per_input`` agents at random on each active input region."""
    world = layout.world()
    agents: list[Agent] = []
    for label, bit in zip(INPUT_LABELS, inputs):
        if not bit:
            continue
        cells = sorted(layout.input_regions[label])
        if n_per_input > len(cells):
            raise ValueError(
                f"input region {label} holds {len(cells)} cells, cannot seed {n_per_input} agents")
        chosen = rng.choice(len(cells), size=n_per_input, replace=False)
        direction = layout.region_flow(label)
        angles = rng.uniform(-math.pi, math.pi, size=n_per_input)
        for idx, theta in zip(chosen.tolist(), angles.tolist()):
            heading = direction if direction is not None else (math.cos(theta), math.sin(theta))
            agents.append(Agent(id=len(agents), pos=cells[idx], heading=heading))
    world.place(agents)
    return world, agents


def run_gate(layout: GateLayout, inputs, params: ModelParams, max_steps: int = 1000,
             rng: np.random.Generator | None = None, n_per_input: int = 40,
             on_step=None) -> GateRunResult:
    """Run one gate evaluation.

    Agents that end a step inside an output region are tallied and taken off
    the lattice. ``on_step(step_index, world, agents)`` is called after seeding
    (index 0) and after every step, before absorption.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    if rng is None:
        rng = make_rng(params.seed)
    world, agents = seed_inputs(layout, inputs, n_per_input, rng)
    n_agents = len(agents)
    counts = {k: 0 for k in OUTPUT_LABELS}
    counts[UNRESOLVED] = 0
    lookup = {cell: label for label, cells in layout.output_regions.items() for cell in cells}
    telemetry = []
    steps_used = 0
    if on_step is not None:
        on_step(0, world, agents)
    while agents and steps_used < max_steps:
        steps_used += 1
        telemetry.append(step(world, agents, params, rng, steps_used))
        if on_step is not None:
            on_step(steps_used, world, agents)
        remaining = []
        for agent in agents:
            label = lookup.get(agent.pos)
            if label is None:
                remaining.append(agent)
            else:
                counts[label] += 1
                world.remove(agent)
        agents = remaining
    counts[UNRESOLVED] = len(agents)
    return GateRunResult(counts, steps_used, n_agents, telemetry)


def decide_by_fraction(result: GateRunResult, fraction: float = 0.8) -> dict[str, int]:
    """Bit per output region: 1 iff it collected ``ceil(fraction * N)`` agents."""
    if result.n_agents <= 0:
        raise ValueError("no agents were seeded; nothing to decide")
    need = math.ceil(fraction * result.n_agents - 1e-9)
    return {k: int(result.counts.get(k, 0) >= need) for k in OUTPUT_LABELS}


def decide_by_difference(result: GateRunResult, margin_fraction: float = 0.1) -> int:
    """0 if the two side outputs differ by more than the margin, else 1."""
    if result.n_agents <= 0:
        raise ValueError("no agents were seeded; nothing to decide")
    diff = abs(result.counts.get("1", 0) - result.counts.get("3", 0))
    return 0 if diff > margin_fraction * result.n_agents else 1


def expected_outputs(layout: GateLayout, inputs) -> dict[str, int]:
    """Intended truth table of the bundled gates, keyed by output region."""
    x, y = inputs
    if layout.name == "or":
        return {k: int(k == "1" and (x or y)) for k in OUTPUT_LABELS if k in layout.output_regions}
    if layout.name == "and":
        return {"1": int(not x and y), "2": int(x and y), "3": int(x and not y)}
    raise ValueError(f"no reference truth table for layout {layout.name!r}")


def gate_bits(layout: GateLayout, result: GateRunResult, fraction: float = 0.8) -> dict[str, int]:
    if result.n_agents == 0:
        return {k: 0 for k in layout.output_regions}
    bits = decide_by_fraction(result, fraction)
    return {k: bits[k] for k in layout.output_regions}


def decision_bits(layout: GateLayout, result: GateRunResult, decision: str = "fraction",
                  fraction: float = 0.8, margin_fraction: float = 0.1) -> dict[str, int]:
    """Output bits of one run under either decision rule.

    The difference rule yields a single bit under the key ``"out"``. Runs
    without agents map to all-zero bits.
    """
    if decision == "fraction":
        return gate_bits(layout, result, fraction)
    if decision == "difference":
        if result.n_agents == 0:
            return {"out": 0}
        return {"out": decide_by_difference(result, margin_fraction)}
    raise ValueError(f"unknown decision rule {decision!r}")


def expected_bits(layout: GateLayout, inputs, decision: str = "fraction") -> dict[str, int]:
    if decision == "difference":
        return {"out": int(all(inputs))}
    return expected_outputs(layout, inputs)


@dataclass
class TruthRow:
    inputs: tuple[int, int]
    outputs: dict[str, int]
    success: float
    trials: int


def truth_table(layout: GateLayout, params: ModelParams, n_per_input: int = 40,
                trials: int = 100, seed: int | None = None, max_steps: int = 1000,
                fraction: float = 0.8, decision: str = "fraction") -> list[TruthRow]:
    """Modal output bits and success fraction per input pair.

    Trial ``t`` of input pair ``i`` runs on ``make_rng(seed, 4 * t + i)``.
    A trial succeeds when its bits equal the layout's reference table, or,
    for layouts without one, when it matches the modal bits.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seed = params.seed if seed is None else seed
    rows = []
    for i, inputs in enumerate(INPUT_PAIRS):
        outcomes = []
        for t in range(trials):
            if not any(inputs):
                result = GateRunResult({k: 0 for k in OUTPUT_LABELS} | {UNRESOLVED: 0}, 0, 0)
            else:
                result = run_gate(layout, inputs, params, max_steps,
                                  make_rng(seed, 4 * t + i), n_per_input)
            bits = decision_bits(layout, result, decision, fraction)
            outcomes.append(tuple(sorted(bits.items())))
        modal = Counter(outcomes).most_common(1)[0][0]
        try:
            target = tuple(sorted(expected_bits(layout, inputs, decision).items()))
        except ValueError:
            target = modal
        success = sum(o == target for o in outcomes) / trials
        rows.append(TruthRow(inputs, dict(modal), success, trials))
    return rows
