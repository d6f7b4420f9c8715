"""Parameter sweeps over the swarm model, with CSV output.

Two sweeps are provided:

* the open-arena sweep, which measures polarization and density on a torus
  as the number of potential transitions grows;
* the external-noise sweep, which measures how often a gate layout still
  routes its swarm to the intended output as the matching noise grows.

Every trial draws its generator from ``make_rng(config.seed, trial)``, so a
trial's outcome does not depend on which other trials ran or in what order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .gates import (GateLayout, decide_by_difference, decide_by_fraction,
                    expected_outputs, load_layout, run_gate)
from .metrics import P_MAX_DEFAULT, MetricsRow, density_of, inherent_perturbation, polarization_of
from .swarm import Agent, ModelParams, World, make_rng, step

LAMBDA_MAX = 0.2


def default_lambda_grid(step_size: float = 0.02) -> list[float]:
    n = int(round(LAMBDA_MAX / step_size))
    return [round(i * step_size, 10) for i in range(n + 1)]


@dataclass
class SweepConfig:
    p_values: list[int] = field(default_factory=lambda: [1, 2, 4, 8, 16, 24, 31])
    p_max: int = P_MAX_DEFAULT
    lambda_values: list[float] = field(default_factory=default_lambda_grid)
    trials: int = 100
    width: int = 100
    height: int = 100
    layout: str | None = None
    inputs: tuple[int, int] = (1, 1)
    n_agents: int = 100
    warmup_steps: int = 500
    measure_steps: int = 500
    max_steps: int = 1000
    decision: str = "fraction"
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for lam in self.lambda_values:
            if not 0.0 <= lam <= LAMBDA_MAX + 1e-12:
                raise ValueError(f"lambda {lam} outside [0, {LAMBDA_MAX}]")
        if self.warmup_steps < 0 or self.measure_steps < 1:
            raise ValueError("need warmup_steps >= 0 and measure_steps >= 1")
        if self.decision not in ("fraction", "difference"):
            raise ValueError(f"unknown decision rule {self.decision!r}")


@dataclass(frozen=True)
class PerformanceRow:
    p: int
    lambda_: float
    successes: int
    trials: int
    performance: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name.rstrip("_") for f in fields(cls)]

    def values(self) -> tuple:
        return astuple(self)


# -- open arena ----------------------------------------------------------------

def _random_swarm(world: World, n: int, rng: np.random.Generator) -> list[Agent]:
    cells = world.free_cells()
    if n > len(cells):
        raise ValueError(f"{n} agents do not fit into {len(cells)} free cells")
    chosen = rng.choice(len(cells), size=n, replace=False)
    angles = rng.uniform(-math.pi, math.pi, size=n)
    agents = [Agent(id=i, pos=cells[c], heading=(math.cos(t), math.sin(t)))
              for i, (c, t) in enumerate(zip(chosen.tolist(), angles.tolist()))]
    world.place(agents)
    return agents


def run_open_arena(params: ModelParams, config: SweepConfig,
                   rng: np.random.Generator) -> MetricsRow:
    """Polarization and density averaged over the measurement window."""
    world = World.open_torus(config.width, config.height)
    agents = _random_swarm(world, config.n_agents, rng)
    for t in range(config.warmup_steps):
        step(world, agents, params, rng, t + 1)
    pol = dens = 0.0
    for t in range(config.measure_steps):
        tel = step(world, agents, params, rng, config.warmup_steps + t + 1)
        pol += tel.polarization
        dens += tel.density
    return MetricsRow(
        p=params.num_transitions,
        inherent_perturbation=inherent_perturbation(params.num_transitions, config.p_max),
        polarization=pol / config.measure_steps,
        density=dens / config.measure_steps,
        lambda_=params.noise_amplitude,
        seed=config.seed,
    )


def sweep_inherent_perturbation(config: SweepConfig,
                                base: ModelParams | None = None) -> list[MetricsRow]:
    """One row per P, metrics averaged over ``config.trials`` seeded runs, no noise."""
    if not config.p_values:
        raise ValueError("p_values is empty")
    base = base or ModelParams()
    rows = []
    for p in sorted(config.p_values):
        params = replace(base, num_transitions=p, noise_amplitude=0.0, seed=config.seed)
        runs = [run_open_arena(params, config, make_rng(config.seed, t))
                for t in range(config.trials)]
        rows.append(MetricsRow(
            p=p,
            inherent_perturbation=runs[0].inherent_perturbation,
            polarization=float(np.mean([r.polarization for r in runs])),
            density=float(np.mean([r.density for r in runs])),
            lambda_=0.0,
            seed=config.seed,
        ))
    return rows


# -- gate performance ------------------------------------------------------------

def _designated_output(layout: GateLayout, inputs) -> str:
    wanted = [k for k, bit in expected_outputs(layout, inputs).items() if bit]
    if len(wanted) != 1:
        raise ValueError(f"inputs {tuple(inputs)} have no single designated output")
    return wanted[0]


def success_rate(layout: GateLayout, inputs, params: ModelParams,
                 config: SweepConfig) -> PerformanceRow:
    """Fraction of seeded runs whose swarm lands where the truth table says.

    With the fraction rule a run succeeds when the designated output region
    collects enough agents. With the difference rule it succeeds when the
    side-output balance bit equals ``x AND y``.
    """
    inputs = tuple(inputs)
    target = _designated_output(layout, inputs) if config.decision == "fraction" else None
    successes = 0
    for t in range(config.trials):
        result = run_gate(layout, inputs, params, config.max_steps, make_rng(config.seed, t),
                          n_per_input=config.n_agents)
        if target is not None:
            ok = decide_by_fraction(result)[target] == 1
        else:
            ok = decide_by_difference(result) == int(all(inputs))
        successes += ok
    return PerformanceRow(params.num_transitions, params.noise_amplitude,
                          successes, config.trials, successes / config.trials)


def sweep_external_noise(config: SweepConfig, base: ModelParams | None = None,
                         layout: GateLayout | None = None) -> list[PerformanceRow]:
    """Success rate on the full P x lambda grid, ordered by (P, lambda)."""
    if not config.lambda_values:
        raise ValueError("lambda_values is empty")
    if layout is None:
        layout = load_layout(config.layout or "and.map")
    base = base or ModelParams()
    return [
        success_rate(layout, config.inputs,
                     replace(base, num_transitions=p, noise_amplitude=lam, seed=config.seed),
                     config)
        for p in sorted(config.p_values)
        for lam in sorted(config.lambda_values)
    ]


# -- CSV -----------------------------------------------------------------------------

def write_csv(rows, destination, row_type=None) -> None:
    """Header plus one line per row.

    ``destination`` is a path or an open text stream; ``row_type`` names the
    schema when ``rows`` is empty. Floats use their shortest round-trip form.
    """
    rows = list(rows)
    kind = row_type or (type(rows[0]) if rows else None)
    if kind is None:
        raise ValueError("cannot infer the CSV schema of an empty row list")
    if any(type(r) is not kind for r in rows):
        raise TypeError("rows must all be of one type")
    lines = [kind.columns()]
    lines += [[repr(v) if isinstance(v, float) else v for v in row.values()] for row in rows]
    if hasattr(destination, "write"):
        csv.writer(destination, lineterminator="\n").writerows(lines)
        return
    with open(Path(destination), "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(lines)


def read_csv(source, row_type):
    """Parse a file produced by ``write_csv`` back into rows."""
    types = [f.type for f in fields(row_type)]
    casts = [int if t in (int, "int") else float for t in types]
    with open(Path(source), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != row_type.columns():
            raise ValueError(f"unexpected header {header}")
        return [row_type(*(c(v) for c, v in zip(casts, line))) for line in reader]
