import numpy as np
import pytest

from crabgate.gates import bundled_layout, run_gate
from crabgate.render import (AGENT, BACKGROUND, WALL, TrailRecorder, render_frame)
from crabgate.swarm import Agent, ModelParams, World, make_rng


def decode_ppm(data: bytes):
    header, rest = data.split(b"\n", 3)[:3], data.split(b"\n", 3)[3]
    assert header[0] == b"P6" and header[2] == b"255"
    w, h = map(int, header[1].split())
    return np.frombuffer(rest, dtype=np.uint8).reshape(h, w, 3)


def small_world():
    walls = np.zeros((4, 6), dtype=bool)
    walls[0, :] = True
    return World(walls)


def test_walls_only_frame_has_no_agent_pixels():
    img = decode_ppm(render_frame(small_world(), [], scale=1))
    assert img.shape == (4, 6, 3)
    assert (img[0] == WALL).all()
    assert (img[1:] == BACKGROUND).all()
    assert not (img == AGENT).all(axis=2).any()


def test_agent_square_is_scaled():
    world = small_world()
    a = Agent(0, (2, 2), (1.0, 0.0))
    world.place([a])
    img = decode_ppm(render_frame(world, [a], scale=3))
    block = img[6:9, 6:9]
    assert (block == AGENT).all()
    assert (img == AGENT).all(axis=2).sum() == 9


def test_stationary_trail_collapses_to_one_cell():
    world = small_world()
    a = Agent(0, (2, 2), (1.0, 0.0))
    world.place([a])
    rec = TrailRecorder(5)
    for _ in range(5):
        rec.record([a])
    img = decode_ppm(render_frame(world, [a], rec.as_dict(), scale=1))
    marked = ~(img == BACKGROUND).all(axis=2) & ~(img == WALL).all(axis=2)
    assert marked.sum() == 1


def test_moving_trail_fades():
    world = small_world()
    a = Agent(0, (0, 1), (1.0, 0.0))
    world.place([a])
    rec = TrailRecorder(5)
    for c in range(5):
        world.occupancy.clear()
        a.pos = (c, 1)
        world.place([a])
        rec.record([a])
    img = decode_ppm(render_frame(world, [a], rec.as_dict(), scale=1)).astype(int)
    row = img[1, :5]
    assert (row[4] == AGENT).all()
    # pixels get closer to the background the older they are
    dist = [np.abs(row[c] - BACKGROUND).sum() for c in range(5)]
    assert dist == sorted(dist)


def test_trail_recorder_drops_absorbed_agents():
    rec = TrailRecorder(3)
    a, b = Agent(0, (0, 0), (1.0, 0.0)), Agent(1, (1, 1), (1.0, 0.0))
    rec.record([a, b])
    rec.record([a])
    assert set(rec.as_dict()) == {0}
    with pytest.raises(ValueError):
        TrailRecorder(0)


def frames(fmt):
    out = []
    rec = TrailRecorder(5)

    def grab(i, world, agents):
        rec.record(agents)
        if i % 10 == 0:
            out.append(render_frame(world, agents, rec.as_dict(), fmt=fmt, show_flow=True))

    run_gate(bundled_layout("and"), (1, 1), ModelParams(), 30, make_rng(8), on_step=grab)
    return out


@pytest.mark.parametrize("fmt", ["ppm", "svg"])
def test_frames_are_byte_identical_on_rerun(fmt):
    assert frames(fmt) == frames(fmt)


def test_svg_is_well_formed():
    import xml.etree.ElementTree as ET

    root = ET.fromstring(frames("svg")[0])
    assert root.tag.endswith("svg")
    assert len(root) > 80


def test_unknown_format():
    with pytest.raises(ValueError):
        render_frame(small_world(), [], fmt="gif")
