"""Headless frame rendering to binary PPM or SVG.

Output bytes depend only on the world, the agents and the recorded trails,
so re-running a seeded simulation reproduces every frame byte for byte.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .swarm import Agent, World

BACKGROUND = (245, 245, 240)
WALL = (40, 40, 48)
AGENT = (200, 30, 30)
FLOW = (90, 140, 220)
FORMATS = ("ppm", "svg")


class TrailRecorder:
    """Keeps the last ``length`` positions of every agent, newest last."""

    def __init__(self, length: int = 5):
        if length < 1:
            raise ValueError("trail length must be >= 1")
        self.length = length
        self._trails: dict[int, deque] = {}

    def record(self, agents) -> None:
        live = set()
        for a in agents:
            live.add(a.id)
            self._trails.setdefault(a.id, deque(maxlen=self.length)).append(a.pos)
        for aid in [k for k in self._trails if k not in live]:
            del self._trails[aid]

    def trail(self, agent_id: int) -> list:
        return list(self._trails.get(agent_id, ()))

    def as_dict(self) -> dict[int, list]:
        return {k: list(v) for k, v in self._trails.items()}


def _trail_cells(trail, trail_length):
    """Distinct cells of a trail mapped to their age (0 = newest)."""
    ages = {}
    recent = list(trail)[-trail_length:]
    for age, cell in enumerate(reversed(recent)):
        ages.setdefault(tuple(cell), age)
    return ages


def _fade(age: int, trail_length: int):
    t = (age + 1) / (trail_length + 1)
    return tuple(int(round(a + (b - a) * t)) for a, b in zip(AGENT, BACKGROUND))


def render_ppm(world: World, agents, trails=None, trail_length: int = 5,
               scale: int = 4, show_flow: bool = False) -> bytes:
    h, w = world.height, world.width
    img = np.empty((h, w, 3), dtype=np.uint8)
    img[...] = BACKGROUND
    img[world.walls] = WALL
    if show_flow:
        img[world.has_flow & ~world.walls] = FLOW
    trails = trails or {}
    for a in agents:
        ages = _trail_cells(trails.get(a.id, ()), trail_length)
        for (c, r), age in sorted(ages.items(), key=lambda kv: -kv[1]):
            if age:
                img[r, c] = _fade(age, trail_length)
    for a in agents:
        c, r = a.pos
        img[r, c] = AGENT
    big = np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)
    header = f"P6\n{w * scale} {h * scale}\n255\n".encode("ascii")
    return header + big.tobytes()


_ARROW_GLYPH = {(1.0, 0.0): "M1 2h2", (-1.0, 0.0): "M3 2h-2",
                (0.0, 1.0): "M2 1v2", (0.0, -1.0): "M2 3v-2"}


def render_svg(world: World, agents, trails=None, trail_length: int = 5,
               scale: int = 4, show_flow: bool = False) -> bytes:
    h, w = world.height, world.width
    hexc = "#{:02x}{:02x}{:02x}".format
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w * scale}" height="{h * scale}" '
        f'viewBox="0 0 {w} {h}" shape-rendering="crispEdges">',
        f'<rect width="{w}" height="{h}" fill="{hexc(*BACKGROUND)}"/>',
    ]
    # walls as horizontal runs keep the file small
    for r in range(h):
        c = 0
        while c < w:
            if world.walls[r, c]:
                start = c
                while c < w and world.walls[r, c]:
                    c += 1
                out.append(f'<rect x="{start}" y="{r}" width="{c - start}" height="1" '
                           f'fill="{hexc(*WALL)}"/>')
            else:
                c += 1
    if show_flow:
        rows, cols = np.nonzero(world.has_flow)
        for r, c in zip(rows.tolist(), cols.tolist()):
            key = tuple(float(v) for v in world.flow[r, c])
            path = _ARROW_GLYPH.get(key)
            if path:
                out.append(f'<path transform="translate({c} {r}) scale(0.25)" d="{path}" '
                           f'stroke="{hexc(*FLOW)}" stroke-width="0.6" fill="none"/>')
    trails = trails or {}
    for a in agents:
        ages = _trail_cells(trails.get(a.id, ()), trail_length)
        for (c, r), age in sorted(ages.items(), key=lambda kv: -kv[1]):
            if age:
                out.append(f'<rect x="{c}" y="{r}" width="1" height="1" '
                           f'fill="{hexc(*_fade(age, trail_length))}"/>')
    for a in agents:
        c, r = a.pos
        out.append(f'<rect x="{c}" y="{r}" width="1" height="1" fill="{hexc(*AGENT)}"/>')
    out.append("</svg>\n")
    return "\n".join(out).encode("utf-8")


def render_frame(world: World, agents: list[Agent], trails=None, trail_length: int = 5,
                 fmt: str = "ppm", scale: int = 4, show_flow: bool = False) -> bytes:
    """One frame: dark walls, agents as squares, fading trail of recent cells.

    ``trails`` maps agent id to its recent positions, oldest first (see
    :class:`TrailRecorder`).
    """
    if fmt == "ppm":
        return render_ppm(world, agents, trails, trail_length, scale, show_flow)
    if fmt == "svg":
        return render_svg(world, agents, trails, trail_length, scale, show_flow)
    raise ValueError(f"unknown image format {fmt!r}")
