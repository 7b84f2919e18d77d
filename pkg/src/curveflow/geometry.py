"""Convex host domains and the scale-indexed region system.

The domain classes provide exact signed distances (positive inside), outward
normals through nearest-point projection, boundary parameterization (used to
close faces of anchored networks), and the shrunken-core / near-boundary
region tests that the stepping logic relies on.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConvexDomain",
    "DiskDomain",
    "EllipseDomain",
    "PolygonDomain",
    "DomainError",
    "RegionIndex",
    "RegionFlags",
    "region_classify",
    "anchor_distance",
    "segment_distance",
    "convex_hull",
    "hull_contains",
    "hull_margin",
    "make_domain",
]


class DomainError(ValueError):
    """Raised for queries outside a domain's validity region."""


def _as_points(p) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    if a.shape[-1] != 2:
        raise ValueError("points must have trailing dimension 2")
    return a


class ConvexDomain:
    """Strictly convex bounded planar domain.

    Subclasses supply signed distance (positive inside, zero on the boundary,
    negative outside), nearest-point projection with the classical outward
    normal, a CCW boundary parameterization, and exact area. ``s0`` is the
    tubular width within which the projection is guaranteed well defined.
    """

    s0: float

    def signed_distance(self, p):
        raise NotImplementedError

    def boundary_projection(self, p):
        """Return (nearest boundary point, outward unit normal there)."""
        raise NotImplementedError

    def outward_normal(self, p):
        """Outward unit normal on the tubular neighborhood of the boundary."""
        p = _as_points(p)
        if p.ndim == 1:
            if abs(float(self.signed_distance(p))) > self.s0 + 1e-12:
                raise DomainError("point outside the tubular neighborhood of the boundary")
        elif np.any(np.abs(np.asarray(self.signed_distance(p))) > self.s0 + 1e-12):
            raise DomainError("point outside the tubular neighborhood of the boundary")
        _, nu = self.boundary_projection(p)
        return nu

    def contains(self, p, tol: float = 0.0):
        return np.asarray(self.signed_distance(p)) > -tol

    def area(self) -> float:
        raise NotImplementedError

    def perimeter_param(self, p) -> float:
        """Monotone CCW boundary parameter of a (near-)boundary point."""
        raise NotImplementedError

    def boundary_point(self, s: float) -> np.ndarray:
        raise NotImplementedError

    def param_period(self) -> float:
        raise NotImplementedError

    def arc_points(self, s0: float, s1: float, max_step: float) -> np.ndarray:
        """Polyline along the boundary from parameter ``s0`` CCW to ``s1``."""
        raise NotImplementedError

    def arc_chord_area(self, s0: float, s1: float) -> float:
        """Exact area between the boundary arc s0->s1 (CCW) and its chord."""
        raise NotImplementedError

    def interior_point(self) -> np.ndarray:
        raise NotImplementedError

    def boundary_samples(self, n: int) -> np.ndarray:
        period = self.param_period()
        ss = np.linspace(0.0, period, n, endpoint=False)
        return np.array([self.boundary_point(float(s)) for s in ss])


class DiskDomain(ConvexDomain):
    def __init__(self, center=(0.0, 0.0), radius: float = 1.0):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.s0 = 0.5 * self.radius

    def signed_distance(self, p):
        p = _as_points(p)
        r = np.linalg.norm(p - self.center, axis=-1)
        return self.radius - r

    def boundary_projection(self, p):
        p = _as_points(p)
        v = p - self.center
        r = np.linalg.norm(v, axis=-1, keepdims=True)
        fallback = np.broadcast_to(np.array([1.0, 0.0]), v.shape)
        nu = np.where(r > 1e-300, v / np.maximum(r, 1e-300), fallback)
        return self.center + self.radius * nu, nu

    def area(self) -> float:
        return math.pi * self.radius**2

    def perimeter_param(self, p) -> float:
        v = _as_points(p) - self.center
        return float(math.atan2(v[1], v[0]) % (2 * math.pi))

    def boundary_point(self, s: float) -> np.ndarray:
        return self.center + self.radius * np.array([math.cos(s), math.sin(s)])

    def param_period(self) -> float:
        return 2 * math.pi

    def arc_points(self, s0, s1, max_step):
        span = (s1 - s0) % (2 * math.pi)
        if span == 0.0:
            span = 2 * math.pi
        n = max(2, int(math.ceil(span * self.radius / max_step)) + 1)
        ss = s0 + np.linspace(0.0, span, n)
        return self.center + self.radius * np.stack([np.cos(ss), np.sin(ss)], axis=-1)

    def arc_chord_area(self, s0, s1):
        span = (s1 - s0) % (2 * math.pi)
        return 0.5 * self.radius**2 * (span - math.sin(span))

    def interior_point(self) -> np.ndarray:
        return self.center.copy()


class EllipseDomain(ConvexDomain):
    def __init__(self, center=(0.0, 0.0), a: float = 1.0, b: float = 1.0):
        if a <= 0 or b <= 0:
            raise ValueError("semi-axes must be positive")
        self.center = np.asarray(center, dtype=float)
        self.a = float(a)
        self.b = float(b)
        # minimal radius of curvature of the ellipse is min(b^2/a, a^2/b)
        self.s0 = 0.5 * min(self.b**2 / self.a, self.a**2 / self.b)

    def _nearest_first_quadrant(self, x: float, y: float) -> tuple[float, float]:
        """Nearest ellipse point to (x, y) with x, y >= 0.

        Generic case solves, by bisection, the monotone nearest-point equation
        F(t) = (a x/(t+a^2))^2 + (b y/(t+b^2))^2 - 1 = 0 on t > -min(a,b)^2;
        the foot is (a^2 x/(t+a^2), b^2 y/(t+b^2)). On-axis queries inside the
        evolute are handled by the closed-form off-axis candidates.
        """
        a, b = self.a, self.b

        def d2(q):
            return (q[0] - x) ** 2 + (q[1] - y) ** 2

        if x < 1e-15 and y < 1e-15:
            return (a, 0.0) if a <= b else (0.0, b)
        if y < 1e-15:
            cands = [(a, 0.0)]
            if a > b and a * x < a * a - b * b:
                c = a * x / (a * a - b * b)
                cands.append((a * c, b * math.sqrt(1.0 - c * c)))
            return min(cands, key=d2)
        if x < 1e-15:
            cands = [(0.0, b)]
            if b > a and b * y < b * b - a * a:
                s = b * y / (b * b - a * a)
                cands.append((a * math.sqrt(1.0 - s * s), b * s))
            return min(cands, key=d2)

        def f(t):
            return (a * x / (t + a * a)) ** 2 + (b * y / (t + b * b)) ** 2 - 1.0

        tmin = -min(a, b) ** 2
        delta = 0.5 * min(a, b) ** 2
        lo = tmin + delta
        while f(lo) <= 0.0:
            delta *= 0.5
            lo = tmin + delta
            if delta < 1e-300:
                break
        hi = max(a, b) * math.hypot(x, y) + max(a, b) ** 2
        while f(hi) > 0.0:
            hi *= 2.0
        for _ in range(160):
            mid = 0.5 * (lo + hi)
            if f(mid) > 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-16 * (abs(mid) + 1.0):
                break
        t = 0.5 * (lo + hi)
        return (a * a * x / (t + a * a), b * b * y / (t + b * b))

    def _project_one(self, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        v = p - self.center
        sx = 1.0 if v[0] >= 0 else -1.0
        sy = 1.0 if v[1] >= 0 else -1.0
        qx, qy = self._nearest_first_quadrant(abs(v[0]), abs(v[1]))
        q = np.array([sx * qx, sy * qy])
        grad = np.array([q[0] / self.a**2, q[1] / self.b**2])
        nu = grad / np.linalg.norm(grad)
        return self.center + q, nu

    def boundary_projection(self, p):
        p = _as_points(p)
        if p.ndim == 1:
            return self._project_one(p)
        out_q = np.empty_like(p)
        out_n = np.empty_like(p)
        for i in range(p.shape[0]):
            out_q[i], out_n[i] = self._project_one(p[i])
        return out_q, out_n

    def signed_distance(self, p):
        p = _as_points(p)
        if p.ndim == 1:
            q, _ = self._project_one(p)
            d = float(np.linalg.norm(p - q))
            v = p - self.center
            inside = (v[0] / self.a) ** 2 + (v[1] / self.b) ** 2 <= 1.0
            return d if inside else -d
        return np.array([self.signed_distance(pi) for pi in p])

    def area(self) -> float:
        return math.pi * self.a * self.b

    def perimeter_param(self, p) -> float:
        v = _as_points(p) - self.center
        return float(math.atan2(v[1] / self.b, v[0] / self.a) % (2 * math.pi))

    def boundary_point(self, s: float) -> np.ndarray:
        return self.center + np.array([self.a * math.cos(s), self.b * math.sin(s)])

    def param_period(self) -> float:
        return 2 * math.pi

    def arc_points(self, s0, s1, max_step):
        span = (s1 - s0) % (2 * math.pi)
        if span == 0.0:
            span = 2 * math.pi
        n = max(2, int(math.ceil(span * max(self.a, self.b) / max_step)) + 1)
        ss = s0 + np.linspace(0.0, span, n)
        return self.center + np.stack([self.a * np.cos(ss), self.b * np.sin(ss)], axis=-1)

    def arc_chord_area(self, s0, s1):
        span = (s1 - s0) % (2 * math.pi)
        return 0.5 * self.a * self.b * (span - math.sin(span))

    def interior_point(self) -> np.ndarray:
        return self.center.copy()


class PolygonDomain(ConvexDomain):
    """Convex polygon with many vertices, used as a smooth-boundary stand-in.

    The C^2 boundary assumption is only approximated; construction warns below
    32 vertices and rejects non-strictly-convex rings.
    """

    def __init__(self, vertices):
        V = np.asarray(vertices, dtype=float)
        if V.ndim != 2 or V.shape[1] != 2 or len(V) < 3:
            raise ValueError("vertices must be an (m,2) array, m >= 3")
        area2 = float(np.sum(V[:, 0] * np.roll(V[:, 1], -1) - np.roll(V[:, 0], -1) * V[:, 1]))
        if area2 < 0:
            V = V[::-1].copy()
            area2 = -area2
        nxt = np.roll(V, -1, axis=0)
        prv = np.roll(V, 1, axis=0)
        cross = (V[:, 0] - prv[:, 0]) * (nxt[:, 1] - V[:, 1]) - (V[:, 1] - prv[:, 1]) * (
            nxt[:, 0] - V[:, 0]
        )
        if np.any(cross <= 0):
            raise ValueError("polygon must be strictly convex")
        if len(V) < 32:
            warnings.warn(
                "polygon domains approximate a C2 boundary; use >= 32 vertices",
                stacklevel=2,
            )
        self.vertices = V
        self._area = 0.5 * area2
        e = nxt - V
        self._edge = e
        self._elen = np.linalg.norm(e, axis=1)
        self._cum = np.concatenate([[0.0], np.cumsum(self._elen)])
        t = e / self._elen[:, None]
        # CCW polygon: outward normal is the edge direction rotated by -90 degrees
        self._enormal = np.stack([t[:, 1], -t[:, 0]], axis=1)
        self.s0 = 0.5 * self._chebyshev_radius()

    def _chebyshev_radius(self) -> float:
        from scipy.optimize import linprog

        # maximize r subject to n_i . x + r <= n_i . v_i
        A = np.concatenate([self._enormal, np.ones((len(self.vertices), 1))], axis=1)
        bvec = np.sum(self._enormal * self.vertices, axis=1)
        res = linprog(c=[0.0, 0.0, -1.0], A_ub=A, b_ub=bvec, bounds=[(None, None)] * 3)
        if not res.success:
            raise ValueError("failed to compute polygon inradius")
        return float(res.x[2])

    def _project_all(self, p: np.ndarray):
        V = self.vertices
        e = self._edge
        d = p[:, None, :] - V[None, :, :]
        t = np.einsum("pmk,mk->pm", d, e) / (self._elen**2)[None, :]
        t = np.clip(t, 0.0, 1.0)
        foot = V[None, :, :] + t[:, :, None] * e[None, :, :]
        dist = np.linalg.norm(p[:, None, :] - foot, axis=2)
        imin = np.argmin(dist, axis=1)
        rows = np.arange(len(p))
        return foot[rows, imin], dist[rows, imin], imin, t[rows, imin]

    def signed_distance(self, p):
        p = _as_points(p)
        single = p.ndim == 1
        P = p[None, :] if single else p
        _, dist, _, _ = self._project_all(P)
        inside = np.all(
            np.einsum("pmk,mk->pm", P[:, None, :] - self.vertices[None, :, :], self._enormal)
            <= 0.0,
            axis=1,
        )
        sd = np.where(inside, dist, -dist)
        return float(sd[0]) if single else sd

    def boundary_projection(self, p):
        p = _as_points(p)
        single = p.ndim == 1
        P = p[None, :] if single else p
        foot, _, imin, t = self._project_all(P)
        nu = self._enormal[imin].copy()
        # projections onto a vertex: use the query direction, oriented outward
        atv = (t <= 0.0) | (t >= 1.0)
        if np.any(atv):
            v = P[atv] - foot[atv]
            nrm = np.linalg.norm(v, axis=1, keepdims=True)
            ok = nrm[:, 0] > 1e-14
            sgn = np.where(np.einsum("ik,ik->i", v, nu[atv]) >= 0, 1.0, -1.0)[:, None]
            cand = np.where(ok[:, None], sgn * v / np.maximum(nrm, 1e-300), nu[atv])
            nu[atv] = cand
        if single:
            return foot[0], nu[0]
        return foot, nu

    def area(self) -> float:
        return self._area

    def perimeter_param(self, p) -> float:
        P = _as_points(p)[None, :]
        _, _, imin, t = self._project_all(P)
        return float(self._cum[imin[0]] + t[0] * self._elen[imin[0]])

    def boundary_point(self, s: float) -> np.ndarray:
        s = s % self._cum[-1]
        i = int(np.searchsorted(self._cum, s, side="right") - 1)
        i = min(i, len(self.vertices) - 1)
        t = (s - self._cum[i]) / self._elen[i]
        return self.vertices[i] + t * self._edge[i]

    def param_period(self) -> float:
        return float(self._cum[-1])

    def _arc_param_breaks(self, s0: float, span: float) -> list[float]:
        breaks = [0.0]
        for c in self._cum[:-1]:
            u = (c - s0) % self.param_period()
            if 1e-12 < u < span - 1e-12:
                breaks.append(u)
        breaks.append(span)
        return sorted(breaks)

    def arc_points(self, s0, s1, max_step):
        period = self.param_period()
        span = (s1 - s0) % period
        if span == 0.0:
            span = period
        pts = []
        breaks = self._arc_param_breaks(s0, span)
        for u0, u1 in zip(breaks[:-1], breaks[1:]):
            n = max(1, int(math.ceil((u1 - u0) / max_step)))
            for k in range(n):
                pts.append(self.boundary_point(s0 + u0 + (u1 - u0) * k / n))
        pts.append(self.boundary_point(s0 + span))
        return np.array(pts)

    def arc_chord_area(self, s0, s1):
        period = self.param_period()
        span = (s1 - s0) % period
        if span == 0.0:
            span = period
        breaks = self._arc_param_breaks(s0, span)
        ring = np.array([self.boundary_point(s0 + u) for u in breaks])
        x, y = ring[:, 0], ring[:, 1]
        # closed shoelace of [arc points..., chord back to the start]
        return 0.5 * float(
            np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        )

    def interior_point(self) -> np.ndarray:
        return self.vertices.mean(axis=0)


def make_domain(spec: dict) -> ConvexDomain:
    """Build a domain from a config table, e.g. {"shape": "disk", "radius": 1.0}."""
    shape = spec.get("shape")
    if shape == "disk":
        return DiskDomain(center=spec.get("center", (0.0, 0.0)), radius=spec.get("radius", 1.0))
    if shape == "ellipse":
        return EllipseDomain(
            center=spec.get("center", (0.0, 0.0)), a=spec.get("a", 1.0), b=spec.get("b", 1.0)
        )
    if shape == "polygon":
        return PolygonDomain(spec["vertices"])
    raise ValueError(f"unknown domain shape: {shape!r}")


def domain_to_spec(domain: ConvexDomain) -> dict:
    if isinstance(domain, DiskDomain):
        return {"shape": "disk", "center": list(domain.center), "radius": domain.radius}
    if isinstance(domain, EllipseDomain):
        return {"shape": "ellipse", "center": list(domain.center), "a": domain.a, "b": domain.b}
    if isinstance(domain, PolygonDomain):
        return {"shape": "polygon", "vertices": domain.vertices.tolist()}
    raise ValueError("unknown domain type")


# ---------------------------------------------------------------------------
# scale-indexed regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegionIndex:
    """Scheme scale j and epoch counter k."""

    j: float
    k: int = 0

    def __post_init__(self):
        if self.j < 1:
            raise ValueError("j must be >= 1")
        if self.k < 0:
            raise ValueError("k must be >= 0")

    @property
    def core_margin(self) -> float:
        """Boundary clearance 2/j^(1/4) of the deformation core."""
        return 2.0 * self.j ** (-0.25)

    @property
    def epoch_margin(self) -> float:
        """Boundary clearance 1/j^(1/4) - k exp(-j^(1/8)) of the epoch core."""
        return self.j ** (-0.25) - self.k * math.exp(-(self.j ** 0.125))

    @property
    def near_radius(self) -> float:
        return self.j ** (-0.25)

    @property
    def mid_radius(self) -> float:
        return 2.0 * self.j ** (-0.25)

    @property
    def far_radius(self) -> float:
        return 3.0 * self.j ** (-0.125)


@dataclass(frozen=True)
class RegionFlags:
    """Membership in D_j / D_{j,k} / K_j / K~_j / K^_j, in that order."""

    in_core: bool
    in_epoch_core: bool
    in_near: bool
    in_mid: bool
    in_far: bool


def segment_distance(p, seg_a: np.ndarray, seg_b: np.ndarray):
    """Distance from point(s) p to a finite set of segments [a_i, b_i]."""
    P = _as_points(p)
    single = P.ndim == 1
    if single:
        P = P[None, :]
    if len(seg_a) == 0:
        out = np.full(len(P), np.inf)
        return float(out[0]) if single else out
    e = seg_b - seg_a
    ee = np.maximum(np.einsum("mk,mk->m", e, e), 1e-300)
    d = P[:, None, :] - seg_a[None, :, :]
    t = np.clip(np.einsum("pmk,mk->pm", d, e) / ee[None, :], 0.0, 1.0)
    foot = seg_a[None, :, :] + t[:, :, None] * e[None, :, :]
    dist = np.min(np.linalg.norm(P[:, None, :] - foot, axis=2), axis=1)
    return float(dist[0]) if single else dist


def anchor_distance(anchor, p):
    """Distance to an anchor segment set given as a (seg_a, seg_b) pair."""
    seg_a, seg_b = anchor
    return segment_distance(p, seg_a, seg_b)


def region_classify(domain: ConvexDomain, anchor, idx: RegionIndex, p) -> RegionFlags:
    """Membership flags of a point in the D/K region system at scale idx.

    ``anchor`` is the frozen trace of the initial network outside the core
    D_j, supplied as a (seg_a, seg_b) pair of (m,2) arrays.
    """
    sd = float(np.asarray(domain.signed_distance(p)))
    da = float(np.asarray(anchor_distance(anchor, p)))
    return RegionFlags(
        in_core=sd >= idx.core_margin,
        in_epoch_core=sd >= idx.epoch_margin,
        in_near=da < idx.near_radius,
        in_mid=da < idx.mid_radius,
        in_far=da < idx.far_radius,
    )


# ---------------------------------------------------------------------------
# convex hull
# ---------------------------------------------------------------------------


def convex_hull(points) -> np.ndarray:
    """Convex hull by monotone chain; returns CCW vertices without repeats."""
    P = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(P) == 0:
        raise ValueError("need at least one point")
    if len(P) == 1:
        return P.copy()
    order = np.lexsort((P[:, 1], P[:, 0]))
    P = P[order]

    def half(points_iter):
        chain: list[np.ndarray] = []
        for q in points_iter:
            while len(chain) >= 2:
                o, a = chain[-2], chain[-1]
                if (a[0] - o[0]) * (q[1] - o[1]) - (a[1] - o[1]) * (q[0] - o[0]) <= 0:
                    chain.pop()
                else:
                    break
            chain.append(q)
        return chain

    lower = half(P)
    upper = half(P[::-1])
    hull = lower[:-1] + upper[:-1]
    return np.array(hull)


def hull_contains(hull: np.ndarray, p, tol: float = 1e-12):
    """Containment test against a CCW hull, inclusive within ``tol``."""
    P = _as_points(p)
    single = P.ndim == 1
    if single:
        P = P[None, :]
    if len(hull) == 1:
        res = np.linalg.norm(P - hull[0], axis=1) <= tol
        return bool(res[0]) if single else res
    if len(hull) == 2:
        d = segment_distance(P, hull[:1], hull[1:2])
        res = np.asarray(d) <= tol
        return bool(res[0]) if single else res
    a = hull
    b = np.roll(hull, -1, axis=0)
    elen = np.linalg.norm(b - a, axis=1)
    cross = (b[None, :, 0] - a[None, :, 0]) * (P[:, 1, None] - a[None, :, 1]) - (
        b[None, :, 1] - a[None, :, 1]
    ) * (P[:, 0, None] - a[None, :, 0])
    res = np.all(cross >= -tol * np.maximum(1.0, elen)[None, :], axis=1)
    return bool(res[0]) if single else res


def hull_margin(hull: np.ndarray, p):
    """Min over hull edges of the inward distance of p (negative outside)."""
    P = _as_points(p)
    single = P.ndim == 1
    if single:
        P = P[None, :]
    if len(hull) < 3:
        if len(hull) == 1:
            d = np.linalg.norm(P - hull[0], axis=1)
        else:
            d = np.asarray(segment_distance(P, hull[:1], hull[1:2]))
        out = -d
        return float(out[0]) if single else out
    a = hull
    b = np.roll(hull, -1, axis=0)
    e = b - a
    elen = np.linalg.norm(e, axis=1)
    cross = (
        e[None, :, 0] * (P[:, 1, None] - a[None, :, 1])
        - e[None, :, 1] * (P[:, 0, None] - a[None, :, 0])
    ) / elen[None, :]
    m = np.min(cross, axis=1)
    return float(m[0]) if single else m
