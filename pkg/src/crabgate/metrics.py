"""Order parameters: polarization, density and inherent perturbation."""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np

P_MAX_DEFAULT = 30


@dataclass(frozen=True)
class MetricsRow:
    p: int
    inherent_perturbation: float
    polarization: float
    density: float
    lambda_: float
    seed: int

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name.rstrip("_") for f in fields(cls)]

    def values(self) -> tuple:
        return astuple(self)


def nm_capacity(nm_radius: int) -> int:
    return (2 * nm_radius + 1) ** 2 - 1


def polarization_of(headings: np.ndarray) -> float:
    n = len(headings)
    if n == 0:
        raise ValueError("polarization is undefined for an empty swarm")
    s = headings.sum(axis=0)
    return min(float(np.hypot(s[0], s[1])) / n, 1.0)


def density_of(world, positions: np.ndarray, nm_radius: int = 2) -> float:
    n = len(positions)
    if n == 0:
        raise ValueError("density is undefined for an empty swarm")
    near = world.chebyshev_matrix(positions) <= nm_radius
    neighbours = near.sum() - n
    return float(neighbours) / (n * nm_capacity(nm_radius))


def polarization(agents) -> float:
    """Norm of the summed headings divided by the number of agents."""
    return polarization_of(np.array([a.heading for a in agents], dtype=float).reshape(-1, 2))


def density(world, agents, nm_radius: int = 2) -> float:
    """Mean count of other agents within ``nm_radius``, over NM capacity."""
    return density_of(world, np.array([a.pos for a in agents], dtype=np.int64).reshape(-1, 2), nm_radius)


def inherent_perturbation(p: int, p_max: int = P_MAX_DEFAULT) -> float:
    if p_max <= 0:
        raise ValueError("p_max must be positive")
    if p < 1:
        raise ValueError("p must be >= 1")
    if p > p_max + 1:
        raise ValueError(f"p={p} exceeds p_max + 1 = {p_max + 1}")
    return (p - 1) / p_max
