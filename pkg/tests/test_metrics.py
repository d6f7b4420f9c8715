import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crabgate.metrics import (MetricsRow, density, density_of, inherent_perturbation,
                              nm_capacity, polarization, polarization_of)
from crabgate.swarm import Agent, World


def test_aligned_swarm_is_fully_polarized():
    agents = [Agent(i, (i, 0), (0.0, 1.0)) for i in range(5)]
    assert polarization(agents) == pytest.approx(1.0)


def test_opposed_pair_has_zero_polarization():
    agents = [Agent(0, (0, 0), (1.0, 0.0)), Agent(1, (3, 0), (-1.0, 0.0))]
    assert polarization(agents) == pytest.approx(0.0)


def test_orthogonal_pair_polarization():
    agents = [Agent(0, (0, 0), (1.0, 0.0)), Agent(1, (3, 0), (0.0, 1.0))]
    assert polarization(agents) == pytest.approx(math.sqrt(2) / 2)


@given(st.lists(st.floats(-math.pi, math.pi), min_size=1, max_size=50))
def test_polarization_is_in_unit_interval(angles):
    head = np.array([(math.cos(t), math.sin(t)) for t in angles])
    assert 0.0 <= polarization_of(head) <= 1.0


def test_empty_swarm_metrics_raise():
    with pytest.raises(ValueError):
        polarization([])
    with pytest.raises(ValueError):
        density(World.open_torus(5, 5), [])


def test_nm_capacity_is_24():
    assert nm_capacity(2) == 24
    assert nm_capacity(1) == 8


def test_single_agent_has_zero_density():
    world = World.open_torus(10, 10)
    assert density(world, [Agent(0, (3, 3), (1.0, 0.0))]) == 0.0


def test_full_block_density():
    # 5x5 block: the centre sees 24 others, so its share is 1; average by hand
    world = World.open_torus(20, 20)
    cells = [(c, r) for r in range(5) for c in range(5)]
    agents = [Agent(i, cell, (1.0, 0.0)) for i, cell in enumerate(cells)]
    brute = 0
    for a in agents:
        brute += sum(1 for b in agents
                     if b is not a and max(abs(a.pos[0] - b.pos[0]), abs(a.pos[1] - b.pos[1])) <= 2)
    assert density(world, agents) == pytest.approx(brute / (25 * 24))


def test_density_wraps_on_torus():
    world = World.open_torus(10, 10)
    pos = np.array([(0, 0), (9, 9)])
    assert density_of(world, pos) == pytest.approx(1 / 24)


@pytest.mark.parametrize("p, expected", [(1, 0.0), (31, 1.0), (16, 0.5), (2, 1 / 30)])
def test_inherent_perturbation(p, expected):
    assert inherent_perturbation(p, 30) == pytest.approx(expected)


@pytest.mark.parametrize("p, p_max", [(0, 30), (32, 30), (5, 0)])
def test_inherent_perturbation_rejects_bad_input(p, p_max):
    with pytest.raises(ValueError):
        inherent_perturbation(p, p_max)


def test_metrics_row_columns():
    assert MetricsRow.columns() == ["p", "inherent_perturbation", "polarization", "density",
                                    "lambda", "seed"]
