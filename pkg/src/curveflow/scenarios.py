"""Built-in initial configurations for the flow driver and the test suite."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .geometry import ConvexDomain, DiskDomain
from .network import LabeledNetwork

__all__ = ["ScenarioSpec", "builtin_scenarios", "get_scenario", "scenario_names"]


@dataclass
class ScenarioSpec:
    name: str
    domain: ConvexDomain
    network: LabeledNetwork
    params: dict = dc_field(default_factory=dict)
    description: str = ""
    n_anchors: int = 0

    def __post_init__(self):
        self.n_anchors = sum(1 for v in self.network.vertices if v.anchor)


def _arc_polyline(p0, p1, sagitta: float, n: int = 65) -> np.ndarray:
    """Circular arc from p0 to p1 bulging by ``sagitta`` to the left of p0->p1."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    chord = p1 - p0
    L = np.linalg.norm(chord)
    if abs(sagitta) < 1e-14:
        ts = np.linspace(0, 1, n)
        return p0[None, :] + ts[:, None] * chord[None, :]
    mid = 0.5 * (p0 + p1)
    nrm = np.array([-chord[1], chord[0]]) / L
    h = abs(sagitta)
    r = (L * L / 4.0 + h * h) / (2.0 * h)
    sgn = 1.0 if sagitta > 0 else -1.0
    center = mid + sgn * (h - r) * nrm
    a0 = math.atan2(p0[1] - center[1], p0[0] - center[0])
    a1 = math.atan2(p1[1] - center[1], p1[0] - center[0])
    if sgn > 0:
        while a1 <= a0:
            a1 += 2 * math.pi
    else:
        while a1 >= a0:
            a1 -= 2 * math.pi
    th = np.linspace(a0, a1, n)
    return center[None, :] + r * np.stack([np.cos(th), np.sin(th)], axis=-1)


def _chord(bulge: float = 0.0) -> ScenarioSpec:
    dom = DiskDomain()
    net = LabeledNetwork(dom, 2)
    a0 = net.add_vertex([-1.0, 0.0], anchor=True)
    a1 = net.add_vertex([1.0, 0.0], anchor=True)
    pts = _arc_polyline([-1.0, 0.0], [1.0, 0.0], -bulge if bulge else 0.0, n=101)
    # bulge upward: arc to the left of p1->p0, i.e. sagitta < 0 of p0->p1 flips
    if bulge:
        pts = _arc_polyline([-1.0, 0.0], [1.0, 0.0], bulge, n=101)
    net.add_edge(a0, a1, left=1, right=2, points=pts)
    name = "arc-relax" if bulge else "chord"
    params = {
        "eps": 0.02,
        "dt": 2.5e-4,
        "t_end": 0.5,
        "h_max": 0.02,
        "h_quad": 0.01,
        "j": 7.0e10,
        "disp_cap": 1e-9,
        "area_cap": 1e-9,
        "stat_tol": 0.0,
        "cadence": 100,
    }
    desc = "diameter of the unit disk" if not bulge else "chord bulged into a circular arc"
    return ScenarioSpec(name, dom, net, params, desc)


def _square_corner_domain():
    # circumcircle of the side-0.8 square, so the corners sit on the boundary
    return DiskDomain(radius=0.4 * math.sqrt(2.0)), {
        "NE": np.array([0.4, 0.4]),
        "NW": np.array([-0.4, 0.4]),
        "SW": np.array([-0.4, -0.4]),
        "SE": np.array([0.4, -0.4]),
    }


def _cross4() -> ScenarioSpec:
    dom, C = _square_corner_domain()
    net = LabeledNetwork(dom, 4)
    vc = net.add_vertex([0.0, 0.0])
    vne = net.add_vertex(C["NE"], anchor=True)
    vnw = net.add_vertex(C["NW"], anchor=True)
    vsw = net.add_vertex(C["SW"], anchor=True)
    vse = net.add_vertex(C["SE"], anchor=True)
    # sector labels: N=1, W=2, S=3, E=4
    net.add_edge(vc, vne, left=1, right=4)
    net.add_edge(vc, vnw, left=2, right=1)
    net.add_edge(vc, vsw, left=3, right=2)
    net.add_edge(vc, vse, left=4, right=3)
    params = {
        "eps": 0.03,
        "dt": 5.0e-4,
        "t_end": 2.0,
        "h_max": 0.02,
        "h_quad": 6e-3,
        "j": 1.2e11,
        "disp_cap": 0.45,
        "area_cap": 0.2,
        "stat_tol": 2e-3,
        "stat_window": 60,
        "cadence": 200,
    }
    return ScenarioSpec(
        "cross4", dom, net, params, "two diagonals between four corner anchors"
    )


def _steiner4() -> ScenarioSpec:
    dom, C = _square_corner_domain()
    net = LabeledNetwork(dom, 4)
    jl = net.add_vertex([-0.15, 0.0])
    jr = net.add_vertex([0.15, 0.0])
    vne = net.add_vertex(C["NE"], anchor=True)
    vnw = net.add_vertex(C["NW"], anchor=True)
    vsw = net.add_vertex(C["SW"], anchor=True)
    vse = net.add_vertex(C["SE"], anchor=True)
    net.add_edge(jl, jr, left=1, right=3)  # bar
    net.add_edge(jl, vnw, left=2, right=1)
    net.add_edge(jl, vsw, left=3, right=2)
    net.add_edge(jr, vne, left=1, right=4)
    net.add_edge(jr, vse, left=4, right=3)
    params = {
        "eps": 0.03,
        "dt": 5.0e-4,
        "t_end": 2.0,
        "h_max": 0.02,
        "h_quad": 6e-3,
        "j": 1.2e11,
        "disp_cap": 1e-9,
        "area_cap": 1e-9,
        "stat_tol": 2e-3,
        "stat_window": 60,
        "cadence": 200,
    }
    return ScenarioSpec("steiner4", dom, net, params, "H-shaped network on four corner anchors")


def _circle() -> ScenarioSpec:
    dom = DiskDomain()
    net = LabeledNetwork(dom, 2)
    R = 0.5
    n = 316
    th = np.linspace(0.0, 2 * math.pi, n + 1)
    pts = R * np.stack([np.cos(th), np.sin(th)], axis=-1)
    v0 = net.add_vertex(pts[0])
    v1 = net.add_vertex(pts[n // 2])
    net.add_edge(v0, v1, left=2, right=1, points=pts[: n // 2 + 1])
    net.add_edge(v1, v0, left=2, right=1, points=pts[n // 2 :])
    params = {
        "eps": 0.02,
        "dt": 1.0e-4,
        "t_end": 0.1135,
        "h_max": 0.01,
        "h_quad": 5e-3,
        "j": 7.0e10,
        "disp_cap": 1e-9,
        "area_cap": 1e-9,
        "stat_tol": 0.0,
        "cadence": 100,
    }
    return ScenarioSpec("circle", dom, net, params, "closed interior circle, no anchors")


def _two_arcs() -> ScenarioSpec:
    dom = DiskDomain()
    net = LabeledNetwork(dom, 3)
    A = net.add_vertex([math.cos(2 * math.pi / 3), math.sin(2 * math.pi / 3)], anchor=True)
    B = net.add_vertex([math.cos(math.pi / 3), math.sin(math.pi / 3)], anchor=True)
    Cv = net.add_vertex([math.cos(-math.pi / 3), math.sin(-math.pi / 3)], anchor=True)
    D = net.add_vertex([math.cos(-2 * math.pi / 3), math.sin(-2 * math.pi / 3)], anchor=True)
    upper = _arc_polyline(net.vertices[A].pos, net.vertices[B].pos, -0.15, n=65)
    lower = _arc_polyline(net.vertices[Cv].pos, net.vertices[D].pos, -0.15, n=65)
    net.add_edge(A, B, left=1, right=2, points=upper)
    net.add_edge(Cv, D, left=3, right=2, points=lower)
    params = {
        "eps": 0.02,
        "dt": 2.5e-4,
        "t_end": 0.3,
        "h_max": 0.02,
        "h_quad": 0.01,
        "j": 7.0e10,
        "disp_cap": 1e-9,
        "area_cap": 1e-9,
        "stat_tol": 0.0,
        "cadence": 100,
    }
    return ScenarioSpec(
        "two-arcs", dom, net, params, "two anchored arcs separating three phases"
    )


_BUILDERS = {
    "chord": lambda: _chord(0.0),
    "arc-relax": lambda: _chord(0.3),
    "cross4": _cross4,
    "steiner4": _steiner4,
    "circle": _circle,
    "two-arcs": _two_arcs,
}


def scenario_names() -> list[str]:
    return list(_BUILDERS)


def builtin_scenarios() -> list[ScenarioSpec]:
    return [b() for b in _BUILDERS.values()]


def get_scenario(name: str, overrides: dict | None = None) -> ScenarioSpec:
    if name not in _BUILDERS:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(_BUILDERS)}")
    spec = _BUILDERS[name]()
    if overrides:
        spec.params.update(overrides)
    return spec
