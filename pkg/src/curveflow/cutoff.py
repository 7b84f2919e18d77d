"""Boundary damping field built from mollified tube distances.

The field equals 1 away from the frozen near-boundary trace of the initial
network and decays exponentially (in the scale parameter j) inside a shell
around it, which is what keeps boundary anchors effectively pinned during
the flow while never hard-constraining them.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import segment_distance

__all__ = ["DampingField", "glue_psi"]


def glue_psi(t):
    """Monotone C^2 glue profile: identity on (0, 1/2], 1 from 3/2 on.

    The blend on [1/2, 3/2] is the unique quintic matching value/slope and a
    vanishing second derivative at both ends:
    p(u) = 1/2 + u - u^3 + u^4/2 with u = t - 1/2.
    """
    scalar = np.isscalar(t) or np.asarray(t).ndim == 0
    tt = np.asarray(t, dtype=float)
    if np.any(tt <= 0.0):
        raise ValueError("glue_psi requires t > 0")
    u = np.clip(tt - 0.5, 0.0, 1.0)
    blend = 0.5 + u + u**3 * (u / 2.0 - 1.0)
    out = np.where(tt <= 0.5, tt, np.where(tt >= 1.5, 1.0, blend))
    return float(out) if scalar else out


def _mollifier_weights(rho: float, subdiv: int = 8):
    """Tensor quadrature nodes/weights for the standard bump on B_rho.

    Weights are renormalized to sum to one so the discrete convolution is an
    average (constants stay exact, bounds are inherited).
    """
    h = rho / subdiv
    g = (np.arange(-subdiv, subdiv) + 0.5) * h
    X, Y = np.meshgrid(g, g, indexing="ij")
    r2 = (X**2 + Y**2) / rho**2
    inside = r2 < 1.0
    w = np.zeros_like(X)
    w[inside] = np.exp(1.0 / (r2[inside] - 1.0))
    w /= w.sum()
    pts = np.stack([X[inside], Y[inside]], axis=-1)
    return pts, w[inside]


# -- exact intersection primitives for stadium boundaries -------------------


def _seg_seg(p1, p2, q1, q2):
    d1 = p2 - p1
    d2 = q2 - q1
    den = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(den) < 1e-15:
        return []
    r = q1 - p1
    t = (r[0] * d2[1] - r[1] * d2[0]) / den
    u = (r[0] * d1[1] - r[1] * d1[0]) / den
    if -1e-12 <= t <= 1 + 1e-12 and -1e-12 <= u <= 1 + 1e-12:
        return [p1 + t * d1]
    return []


def _seg_circle(p1, p2, c, s):
    d = p2 - p1
    f = p1 - c
    A = float(d @ d)
    if A < 1e-30:
        return []
    B = 2.0 * float(f @ d)
    C = float(f @ f) - s * s
    disc = B * B - 4 * A * C
    if disc < 0:
        return []
    sq = math.sqrt(disc)
    out = []
    for t in ((-B - sq) / (2 * A), (-B + sq) / (2 * A)):
        if -1e-12 <= t <= 1 + 1e-12:
            out.append(p1 + t * d)
    return out


def _circle_circle(c1, c2, s):
    d = float(np.linalg.norm(c2 - c1))
    if d < 1e-14 or d > 2 * s:
        return []
    mid = 0.5 * (c1 + c2)
    h2 = s * s - (d / 2) ** 2
    if h2 < 0:
        return []
    h = math.sqrt(h2)
    u = (c2 - c1) / d
    n = np.array([-u[1], u[0]])
    return [mid + h * n, mid - h * n]


def _stadium_elements(a: np.ndarray, b: np.ndarray, s: float):
    """Offset-boundary elements of segment [a,b]: side segments and cap circles."""
    segs = []
    circles = [(a, s)]
    L = float(np.linalg.norm(b - a))
    if L > 1e-14:
        t = (b - a) / L
        n = np.array([-t[1], t[0]])
        segs.append((a + s * n, b + s * n))
        segs.append((a - s * n, b - s * n))
        circles.append((b, s))
    return segs, circles


class DampingField:
    """Cut-off eta_j around the frozen anchor trace (initial network minus core).

    Parameters: scale ``j`` and the anchor segment set (arrays seg_a, seg_b of
    shape (m,2)). The tube radius is 2/j^(1/8) and the mollification radius
    rho = 1/j^(1/4). Immutable after construction; evaluation is reentrant.
    """

    def __init__(self, j: float, seg_a, seg_b, mollify_subdiv: int = 8):
        if j < 1:
            raise ValueError("j must be >= 1")
        self.j = float(j)
        self.seg_a = np.asarray(seg_a, dtype=float).reshape(-1, 2)
        self.seg_b = np.asarray(seg_b, dtype=float).reshape(-1, 2)
        if self.seg_a.shape != self.seg_b.shape:
            raise ValueError("anchor segment arrays must have matching shapes")
        self.rho = self.j ** (-0.25)
        self.tube_radius = 2.0 * self.j ** (-0.125)
        self._j14 = self.j**0.25
        self._offsets, self._weights = _mollifier_weights(self.rho, mollify_subdiv)
        self._corners = self._boundary_corners()
        self._eseg = self.seg_b - self.seg_a
        self._elen2 = np.maximum(np.einsum("mk,mk->m", self._eseg, self._eseg), 1e-300)

    # -- exact tube-complement distance -----------------------------------

    def _boundary_corners(self) -> np.ndarray:
        """Crossings of pairs of tube boundaries that lie on the union boundary.

        In the plane, the nearest complement point is either the projection
        onto a single tube boundary or one of these corners; keeping only
        uncovered crossings makes the per-query candidate search exact.
        """
        s = self.tube_radius
        m = len(self.seg_a)
        pts: list[np.ndarray] = []
        elems = [_stadium_elements(self.seg_a[i], self.seg_b[i], s) for i in range(m)]
        for i in range(m):
            segs_i, circ_i = elems[i]
            for k in range(i + 1, m):
                segs_k, circ_k = elems[k]
                for p1, p2 in segs_i:
                    for q1, q2 in segs_k:
                        pts.extend(_seg_seg(p1, p2, q1, q2))
                    for c, r in circ_k:
                        pts.extend(_seg_circle(p1, p2, c, r))
                for c, r in circ_i:
                    for q1, q2 in segs_k:
                        pts.extend(_seg_circle(q1, q2, c, r))
                    for c2, r2 in circ_k:
                        pts.extend(_circle_circle(c, c2, s))
        if not pts:
            return np.zeros((0, 2))
        P = np.array(pts)
        d = np.asarray(segment_distance(P, self.seg_a, self.seg_b))
        keep = d >= s - 1e-9
        return P[keep]

    def anchor_dist(self, x):
        return segment_distance(x, self.seg_a, self.seg_b)

    def raw_distance_many(self, X) -> np.ndarray:
        """Distance to the complement of the open anchor tube, batched.

        Zero outside the tube; positive and 1-Lipschitz inside. For each query
        the candidates are its projections onto every single tube boundary
        (kept when not covered by another tube) plus the precomputed corners.
        """
        X = np.asarray(X, dtype=float).reshape(-1, 2)
        B = len(X)
        if len(self.seg_a) == 0:
            return np.zeros(B)
        s = self.tube_radius
        da = np.asarray(segment_distance(X, self.seg_a, self.seg_b))
        out = np.zeros(B)
        act = np.nonzero(da < s)[0]
        if len(act) == 0:
            return out
        P = X[act]
        d = P[:, None, :] - self.seg_a[None, :, :]
        t = np.clip(np.einsum("pmk,mk->pm", d, self._eseg) / self._elen2[None, :], 0.0, 1.0)
        foot = self.seg_a[None, :, :] + t[:, :, None] * self._eseg[None, :, :]
        v = P[:, None, :] - foot
        dist = np.linalg.norm(v, axis=2)
        ok = dist > 1e-13
        u = np.where(ok[:, :, None], v / np.maximum(dist, 1e-300)[:, :, None], 0.0)
        cands = foot + s * u
        # coverage check for all candidates at once
        flat = cands.reshape(-1, 2)
        cover = np.asarray(segment_distance(flat, self.seg_a, self.seg_b)).reshape(cands.shape[:2])
        visible = ok & (cover >= s - 1e-9)
        cdist = np.where(visible, np.linalg.norm(P[:, None, :] - cands, axis=2), np.inf)
        best = np.min(cdist, axis=1)
        # queries sitting exactly on a segment: probe both perpendiculars
        degenerate = np.nonzero((~ok).any(axis=1))[0]
        for q in degenerate:
            for i in np.nonzero(~ok[q])[0]:
                e = self._eseg[i]
                L = math.sqrt(self._elen2[i])
                if L < 1e-14:
                    perps = (np.array([1.0, 0.0]), np.array([0.0, 1.0]))
                else:
                    tv = e / L
                    perps = (np.array([-tv[1], tv[0]]), np.array([tv[1], -tv[0]]))
                for w in perps:
                    cand = foot[q, i] + s * w
                    if float(segment_distance(cand, self.seg_a, self.seg_b)) >= s - 1e-9:
                        best[q] = min(best[q], float(np.linalg.norm(cand - P[q])))
        if len(self._corners):
            cd = np.linalg.norm(P[:, None, :] - self._corners[None, :, :], axis=2)
            best = np.minimum(best, np.min(cd, axis=1))
        # numerical fallback: the 1-Lipschitz lower bound
        best = np.where(np.isfinite(best), best, s - da[act])
        out[act] = best
        return out

    def raw_distance(self, x) -> float:
        return float(self.raw_distance_many(np.asarray(x, dtype=float)[None, :])[0])

    # -- mollification and the damping value -------------------------------

    def mollified_distance(self, x) -> float:
        """Bump-averaged tube distance over the ball of radius rho around x."""
        x = np.asarray(x, dtype=float)
        if len(self.seg_a) == 0:
            return 0.0
        da = float(self.anchor_dist(x))
        if da >= self.tube_radius + self.rho:
            return 0.0
        vals = self.raw_distance_many(x[None, :] + self._offsets)
        return float(np.dot(self._weights, vals))

    def eta(self, x) -> float:
        """Damping value in (0, 1]; exactly 1 away from the anchor tube."""
        x = np.asarray(x, dtype=float)
        if len(self.seg_a) == 0:
            return 1.0
        da = float(self.anchor_dist(x))
        if da >= self.tube_radius + self.rho:
            # mollified distance vanishes there, so psi saturates at psi(e) = 1
            return 1.0
        d = self.mollified_distance(x)
        t = math.exp(-self._j14 * (d - 1.0 / self._j14))
        return float(glue_psi(t))

    def eta_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, 2)
        out = np.ones(len(X))
        if len(self.seg_a) == 0 or len(X) == 0:
            return out
        da = np.asarray(segment_distance(X, self.seg_a, self.seg_b))
        todo = np.nonzero(da < self.tube_radius + self.rho)[0]
        if len(todo) == 0:
            return out
        # batch the mollification stencils of the active points, chunked to
        # keep the candidate arrays small
        offs = self._offsets
        chunk = max(1, 200_000 // max(len(offs) * len(self.seg_a), 1))
        for lo in range(0, len(todo), chunk):
            idx = todo[lo : lo + chunk]
            Q = (X[idx][:, None, :] + offs[None, :, :]).reshape(-1, 2)
            vals = self.raw_distance_many(Q).reshape(len(idx), len(offs))
            dmoll = vals @ self._weights
            t = np.exp(-self._j14 * (dmoll - 1.0 / self._j14))
            out[idx] = glue_psi(t)
        return out
