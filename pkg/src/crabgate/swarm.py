"""Lattice swarm model with potential transitions and mutual anticipation.

Agents live on a square lattice and move at most one Moore cell per step.
Each step runs a fixed pipeline:

1. velocity matching over the radius-2 Chebyshev neighbourhood (synchronous)
2. sampling of ``P`` potential transitions around the heading
3. popularity map (distinct agents per targeted cell)
4. mutual anticipation: moves onto popular cells
5. following: neighbours step into cells freshly vacated by phase 4
6. free wandering along one randomly chosen potential transition

Coordinates are ``(col, row)`` with ``row`` growing downwards, so "up" is the
heading ``(0, -1)``. A single run consumes one ``numpy.random.Generator`` in
the phase order above, which makes runs bit-reproducible from a seed.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .metrics import density_of, polarization_of

Cell = tuple[int, int]
Vec = tuple[float, float]

# Moore directions indexed by 45-degree sector, counter-clockwise in (col, row)
# space starting at +col.
DIRECTIONS: tuple[Cell, ...] = (
    (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1),
)
_DIRS = np.array(DIRECTIONS, dtype=np.int64)
_SECTOR = math.pi / 4.0
_INV_SQRT2 = 1.0 / math.sqrt(2.0)

BOUNDED = "bounded"
TORUS = "torus"


@dataclass(slots=True)
class Agent:
    id: int
    pos: Cell
    heading: Vec
    transitions: list[Cell] = field(default_factory=list)


@dataclass
class ModelParams:
    """Parameters of the transition rule.

    ``num_transitions`` counts the principal transition, so ``P=1`` means the
    agent only ever considers the cell its heading points at.
    """

    num_transitions: int = 20
    alpha: float = 120.0
    noise_amplitude: float = 0.0
    nm_radius: int = 2
    nf_radius: int = 1
    popularity_threshold: int = 1
    wall_weight: float = 0.7
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_transitions < 1:
            raise ValueError("num_transitions must be >= 1")
        if not 0.0 <= self.alpha <= 360.0:
            raise ValueError("alpha must lie in [0, 360] degrees")
        if self.noise_amplitude < 0:
            raise ValueError("noise_amplitude must be >= 0")
        if not 0.0 <= self.wall_weight <= 1.0:
            raise ValueError("wall_weight must lie in [0, 1]")
        if self.nm_radius < 1 or self.nf_radius < 1:
            raise ValueError("neighbourhood radii must be >= 1")
        if self.popularity_threshold < 0:
            raise ValueError("popularity_threshold must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True, slots=True)
class StepTelemetry:
    step: int
    n_anticipation: int
    n_following: int
    n_wander: int
    n_stayed: int
    polarization: float
    density: float


class World:
    """Occupancy lattice with walls and an optional wall-bias flow field.

    ``walls`` and ``flow`` are indexed ``[row, col]``. Cells outside a bounded
    world behave like walls.
    """

    def __init__(self, walls, topology: str = BOUNDED, flow=None):
        walls = np.asarray(walls, dtype=bool)
        if walls.ndim != 2:
            raise ValueError("walls must be a 2-D grid")
        if topology not in (BOUNDED, TORUS):
            raise ValueError(f"unknown topology {topology!r}")
        self.walls = walls
        self.height, self.width = walls.shape
        self.topology = topology
        if flow is None:
            flow = np.zeros((self.height, self.width, 2))
        self.flow = np.asarray(flow, dtype=float)
        if self.flow.shape != (self.height, self.width, 2):
            raise ValueError("flow must have shape (height, width, 2)")
        self.has_flow = np.any(self.flow != 0.0, axis=2)
        self.occupancy: dict[Cell, int] = {}
        self._build_tables()

    def _build_tables(self) -> None:
        # _nbr[row * width + col, k] is the linear index of the sector-k
        # neighbour, or -1 when that neighbour is a wall / off the lattice
        h, w = self.height, self.width
        rows, cols = np.mgrid[0:h, 0:w]
        nbr = np.full((h * w, 8), -1, dtype=np.int64)
        for k, (dx, dy) in enumerate(DIRECTIONS):
            c, r = cols + dx, rows + dy
            if self.torus:
                c, r = c % w, r % h
            ok = (c >= 0) & (c < w) & (r >= 0) & (r < h)
            cc, rr = np.clip(c, 0, w - 1), np.clip(r, 0, h - 1)
            ok &= ~self.walls[rr, cc]
            nbr[:, k] = np.where(ok, rr * w + cc, -1).ravel()
        self._nbr = nbr
        self._cells = [(int(c), int(r)) for r, c in zip(rows.ravel(), cols.ravel())]

    @classmethod
    def open_torus(cls, width: int, height: int) -> "World":
        return cls(np.zeros((height, width), dtype=bool), topology=TORUS)

    @property
    def torus(self) -> bool:
        return self.topology == TORUS

    def copy(self) -> "World":
        """Share the immutable grids, copy the occupancy."""
        other = object.__new__(World)
        other.__dict__.update(self.__dict__)
        other.occupancy = dict(self.occupancy)
        return other

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def wrap(self, cell: Cell) -> Cell:
        if self.torus:
            return cell[0] % self.width, cell[1] % self.height
        return cell

    def is_free(self, cell: Cell) -> bool:
        """True for a non-wall cell inside the lattice (occupied or not)."""
        if not self.in_bounds(cell):
            return False
        return not self.walls[cell[1], cell[0]]

    def free_cells(self) -> list[Cell]:
        rows, cols = np.nonzero(~self.walls)
        return list(zip(cols.tolist(), rows.tolist()))

    def flow_at(self, cell: Cell) -> Vec | None:
        if not self.has_flow[cell[1], cell[0]]:
            return None
        fx, fy = self.flow[cell[1], cell[0]]
        return float(fx), float(fy)

    def offset(self, a: Cell, b: Cell) -> Cell:
        """Lattice displacement from ``a`` to ``b`` (shortest image on a torus)."""
        dx, dy = b[0] - a[0], b[1] - a[1]
        if self.torus:
            dx = (dx + self.width // 2) % self.width - self.width // 2
            dy = (dy + self.height // 2) % self.height - self.height // 2
        return dx, dy

    def chebyshev(self, a: Cell, b: Cell) -> int:
        dx, dy = self.offset(a, b)
        return max(abs(dx), abs(dy))

    def chebyshev_matrix(self, pos: np.ndarray) -> np.ndarray:
        """Pairwise Chebyshev distances for an ``(N, 2)`` array of cells."""
        dx = np.abs(pos[:, None, 0] - pos[None, :, 0])
        dy = np.abs(pos[:, None, 1] - pos[None, :, 1])
        if self.torus:
            dx = np.minimum(dx, self.width - dx)
            dy = np.minimum(dy, self.height - dy)
        return np.maximum(dx, dy)

    def place(self, agents: Iterable[Agent]) -> None:
        """Register agents in the occupancy map, validating exclusivity."""
        for agent in agents:
            if not self.is_free(agent.pos):
                raise ValueError(f"agent {agent.id} placed on blocked cell {agent.pos}")
            if agent.pos in self.occupancy:
                raise ValueError(f"cell {agent.pos} already occupied")
            self.occupancy[agent.pos] = agent.id

    def remove(self, agent: Agent) -> None:
        del self.occupancy[agent.pos]


def unit(v: Vec) -> Vec:
    n = math.hypot(v[0], v[1])
    return v[0] / n, v[1] / n


def step_heading(delta: Cell) -> Vec:
    """Unit vector of a single Moore step."""
    if delta[0] and delta[1]:
        return delta[0] * _INV_SQRT2, delta[1] * _INV_SQRT2
    return float(delta[0]), float(delta[1])


def sector_index(angle):
    """Nearest 45-degree sector for an angle (radians); works on arrays."""
    return np.mod(np.rint(np.asarray(angle) / _SECTOR).astype(np.int64), 8)


# -- phase 1 -----------------------------------------------------------------

def _matched_headings(world: World, pos: np.ndarray, head: np.ndarray,
                      params: ModelParams, noise: np.ndarray) -> np.ndarray:
    near = world.chebyshev_matrix(pos) <= params.nm_radius
    mean = near @ head / near.sum(axis=1)[:, None]
    if world.has_flow.any():
        flowing = world.has_flow[pos[:, 1], pos[:, 0]]
        if flowing.any():
            w = params.wall_weight
            mean[flowing] = (1.0 - w) * mean[flowing] + w * world.flow[pos[flowing, 1], pos[flowing, 0]]
    raw = mean + noise
    norm = np.hypot(raw[:, 0], raw[:, 1])
    out = head.copy()
    ok = norm >= 1e-9
    out[ok] = raw[ok] / norm[ok, None]
    return out


def _draw_noise(n: int, params: ModelParams, rng: np.random.Generator) -> np.ndarray:
    lam = params.noise_amplitude
    return rng.uniform(-lam, lam, size=(n, 2)) if n else np.zeros((0, 2))


def velocity_matching(agent: Agent, world: World, agents: list[Agent],
                      params: ModelParams, rng: np.random.Generator) -> Vec:
    """Matched heading of a single agent given the current swarm state.

    ``step`` performs the same computation for every agent at once.
    """
    pos = np.array([a.pos for a in agents], dtype=np.int64)
    head = np.array([a.heading for a in agents], dtype=float)
    idx = next(i for i, a in enumerate(agents) if a is agent)
    noise = _draw_noise(1, params, rng)
    near = world.chebyshev_matrix(pos)[idx] <= params.nm_radius
    mean = head[near].mean(axis=0)
    f = world.flow_at(agent.pos)
    if f is not None:
        mean = (1.0 - params.wall_weight) * mean + params.wall_weight * np.asarray(f)
    raw = mean + noise[0]
    n = math.hypot(raw[0], raw[1])
    if n < 1e-9:
        return agent.heading
    return float(raw[0] / n), float(raw[1] / n)


# -- phase 2 -----------------------------------------------------------------

def _sample_sectors(head: np.ndarray, params: ModelParams,
                    rng: np.random.Generator) -> np.ndarray:
    """Sector indices ``(N, P)``; column 0 is the heading's own sector."""
    n, p = len(head), params.num_transitions
    theta = np.arctan2(head[:, 1], head[:, 0])
    half = math.radians(params.alpha) / 2.0
    jitter = rng.uniform(-half, half, size=(n, p - 1))
    angles = np.concatenate([theta[:, None], theta[:, None] + jitter], axis=1)
    return sector_index(angles)


def _targets(world: World, pos: np.ndarray, sectors: np.ndarray) -> list[list[Cell]]:
    lin = world._nbr[(pos[:, 1] * world.width + pos[:, 0])[:, None], sectors]
    cells = world._cells
    return [[cells[i] for i in row if i >= 0] for row in lin.tolist()]


def sample_potential_transitions(agent: Agent, params: ModelParams, world: World,
                                 rng: np.random.Generator) -> list[Cell]:
    """Potential target cells in draw order, wall targets dropped.

    The first transition follows the heading itself; the remaining ``P - 1``
    angles are uniform within ``alpha`` degrees centred on the heading.
    """
    head = np.array([agent.heading], dtype=float)
    sectors = _sample_sectors(head, params, rng)
    return _targets(world, np.array([agent.pos], dtype=np.int64), sectors)[0]


# -- phase 3 -----------------------------------------------------------------

def build_popularity_map(agents: Iterable[Agent]) -> dict[Cell, int]:
    popularity: dict[Cell, int] = defaultdict(int)
    for agent in agents:
        for cell in set(agent.transitions):
            popularity[cell] += 1
    return dict(popularity)


# -- phase 4 -----------------------------------------------------------------

def _move(world: World, agent: Agent, target: Cell) -> Cell:
    delta = world.offset(agent.pos, target)
    del world.occupancy[agent.pos]
    world.occupancy[target] = agent.id
    source = agent.pos
    agent.pos = target
    agent.heading = step_heading(delta)
    return source


def resolve_mutual_anticipation(world: World, agents: list[Agent],
                                popularity: dict[Cell, int], params: ModelParams,
                                rng: np.random.Generator):
    """Move agents onto popular cells.

    Returns ``(moves, vacated)`` where ``moves`` maps agent id to
    ``(source, target)`` and ``vacated`` is the set of source cells.
    """
    threshold = params.popularity_threshold
    occupied = world.occupancy
    candidates = []
    for agent in agents:
        ranked = []
        seen = set()
        for order, cell in enumerate(agent.transitions):
            if cell in seen:
                continue
            seen.add(cell)
            pop = popularity.get(cell, 0)
            if pop > threshold and cell not in occupied:
                ranked.append((-pop, order, cell))
        if ranked:
            ranked.sort()
            candidates.append((agent, [c for _, _, c in ranked]))

    claimed: dict[Cell, Agent] = {}
    if candidates:
        for i in rng.permutation(len(candidates)).tolist():
            agent, ranked = candidates[i]
            for cell in ranked:
                if cell not in claimed:
                    claimed[cell] = agent
                    break

    # targets were empty at phase start and claims are exclusive
    moves = {}
    for target, agent in claimed.items():
        del occupied[agent.pos]
    for target, agent in claimed.items():
        source = agent.pos
        delta = world.offset(source, target)
        occupied[target] = agent.id
        agent.pos = target
        agent.heading = step_heading(delta)
        moves[agent.id] = (source, target)
    vacated = {src for src, _ in moves.values()}
    return moves, vacated


# -- phase 5 -----------------------------------------------------------------

def apply_following(world: World, agents: list[Agent], vacated: set[Cell],
                    rng: np.random.Generator, nf_radius: int = 1):
    """Step into cells vacated by anticipation movers this step.

    A vacated cell is the pre-move position of its mover, so a follower must
    have it within ``nf_radius``. Among several reachable vacancies the one
    best aligned with the follower's heading is taken. No cascading: cells
    emptied by followers are not offered to other followers.
    """
    if not vacated:
        return {}
    by_id = {a.id: a for a in agents}
    reach: dict[int, list[Cell]] = {}
    span = range(-nf_radius, nf_radius + 1)
    for v in sorted(vacated):
        for dy in span:
            for dx in span:
                cell = world.wrap((v[0] + dx, v[1] + dy))
                aid = world.occupancy.get(cell)
                if aid in by_id:
                    reach.setdefault(aid, []).append(v)
    moves = {}
    if not reach:
        return moves
    eligible = [by_id[aid] for aid in sorted(reach)]
    open_cells = set(vacated)
    for i in rng.permutation(len(eligible)).tolist():
        agent = eligible[i]
        best, best_score = None, -math.inf
        hx, hy = agent.heading
        for v in reach[agent.id]:
            if v not in open_cells:
                continue
            dx, dy = world.offset(agent.pos, v)
            score = (hx * dx + hy * dy) / math.hypot(dx, dy)
            if score > best_score:
                best, best_score = v, score
        if best is None:
            continue
        open_cells.discard(best)
        moves[agent.id] = (_move(world, agent, best), best)
    return moves


# -- phase 6 -----------------------------------------------------------------

def apply_free_wander(world: World, agents: list[Agent], rng: np.random.Generator):
    """Each agent tries one uniformly chosen potential transition."""
    moves = {}
    if not agents:
        return moves
    order = rng.permutation(len(agents)).tolist()
    picks = rng.random(len(agents)).tolist()
    occupied = world.occupancy
    for i in order:
        agent = agents[i]
        ts = agent.transitions
        if not ts:
            continue
        target = ts[int(picks[i] * len(ts))]
        if target in occupied:
            continue
        moves[agent.id] = (_move(world, agent, target), target)
    return moves


# -- full step ---------------------------------------------------------------

def step(world: World, agents: list[Agent], params: ModelParams,
         rng: np.random.Generator, step_index: int = 0) -> StepTelemetry:
    """Advance every agent by one synchronous step and report telemetry."""
    n = len(agents)
    if n == 0:
        return StepTelemetry(step_index, 0, 0, 0, 0, 0.0, 0.0)

    pos = np.array([a.pos for a in agents], dtype=np.int64)
    head = np.array([a.heading for a in agents], dtype=float)

    noise = _draw_noise(n, params, rng)
    matched = _matched_headings(world, pos, head, params, noise)
    for agent, h in zip(agents, matched.tolist()):
        agent.heading = (h[0], h[1])

    sectors = _sample_sectors(matched, params, rng)
    for agent, ts in zip(agents, _targets(world, pos, sectors)):
        agent.transitions = ts

    popularity = build_popularity_map(agents)
    anticipated, vacated = resolve_mutual_anticipation(world, agents, popularity, params, rng)

    rest = [a for a in agents if a.id not in anticipated]
    followed = apply_following(world, rest, vacated, rng, params.nf_radius)

    rest = [a for a in rest if a.id not in followed]
    wandered = apply_free_wander(world, rest, rng)

    pos = np.array([a.pos for a in agents], dtype=np.int64)
    head = np.array([a.heading for a in agents], dtype=float)
    return StepTelemetry(
        step=step_index,
        n_anticipation=len(anticipated),
        n_following=len(followed),
        n_wander=len(wandered),
        n_stayed=len(rest) - len(wandered),
        polarization=polarization_of(head),
        density=density_of(world, pos, params.nm_radius),
    )


def make_rng(seed: int, trial: int | None = None) -> np.random.Generator:
    """Generator for a run; trials of one sweep derive from ``(seed, trial)``."""
    entropy = [seed] if trial is None else [seed, trial]
    return np.random.default_rng(np.random.SeedSequence(entropy))
