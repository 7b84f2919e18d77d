"""Labeled curve networks: the discrete open-partition state.

A network is a set of vertices (interior points, junctions, boundary anchors)
joined by polyline edges carrying a phase label on each side. Faces of the
induced planar subdivision (closed up along the domain boundary between
anchors) recover the open partition; their labels and areas drive the
phase-volume diagnostics.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ConvexDomain

__all__ = ["Vertex", "Edge", "LabeledNetwork", "Violation", "NetworkError"]

ANCHOR_TOL = 1e-9


class NetworkError(ValueError):
    """Raised when an operation requires a valid network but got violations."""


@dataclass
class Vertex:
    pos: np.ndarray
    anchor: bool = False

    def copy(self) -> "Vertex":
        return Vertex(self.pos.copy(), self.anchor)


@dataclass
class Edge:
    """Polyline edge from vertex ``va`` to ``vb`` with side labels.

    ``points`` includes both endpoints; traversing points[0] -> points[-1],
    ``left`` is the phase label on the left side and ``right`` on the right.
    """

    va: int
    vb: int
    points: np.ndarray
    left: int
    right: int

    def copy(self) -> "Edge":
        return Edge(self.va, self.vb, self.points.copy(), self.left, self.right)

    @property
    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))


@dataclass(frozen=True)
class Violation:
    rule: str
    element: str
    detail: str = ""


@dataclass
class Face:
    label: int
    area: float
    loops: list  # list of (kind, payload) descriptors used for rendering/sampling
    polygon: np.ndarray  # polygonized outline (approximate for arc pieces)


class LabeledNetwork:
    """Curve network partitioning a convex domain into labeled phases."""

    def __init__(
        self,
        domain: ConvexDomain,
        n_phases: int,
        vertices: list[Vertex] | None = None,
        edges: list[Edge] | None = None,
        background_label: int = 1,
    ):
        if n_phases < 1:
            raise ValueError("n_phases must be >= 1")
        self.domain = domain
        self.n_phases = int(n_phases)
        self.vertices: list[Vertex] = vertices or []
        self.edges: list[Edge] = edges or []
        # label given to faces no edge borders (only relevant for sparse networks)
        self.background_label = int(background_label)

    # -- construction helpers ---------------------------------------------

    def add_vertex(self, pos, anchor: bool = False) -> int:
        self.vertices.append(Vertex(np.asarray(pos, dtype=float), anchor))
        return len(self.vertices) - 1

    def add_edge(self, va: int, vb: int, left: int, right: int, points=None) -> int:
        if points is None:
            points = np.array([self.vertices[va].pos, self.vertices[vb].pos])
        else:
            points = np.asarray(points, dtype=float)
        self.edges.append(Edge(va, vb, points, left, right))
        return len(self.edges) - 1

    def copy(self) -> "LabeledNetwork":
        return LabeledNetwork(
            self.domain,
            self.n_phases,
            [v.copy() for v in self.vertices],
            [e.copy() for e in self.edges],
            self.background_label,
        )

    # -- basic queries ------------------------------------------------------

    def total_length(self) -> float:
        return float(sum(e.length for e in self.edges))

    def vertex_degree(self, vi: int) -> int:
        return sum(1 for e in self.edges for end in (e.va, e.vb) if end == vi)

    def vertex_kind(self, vi: int) -> str:
        if self.vertices[vi].anchor:
            return "boundary-anchor"
        return "junction" if self.vertex_degree(vi) >= 3 else "interior"

    def all_points(self) -> np.ndarray:
        if not self.edges:
            return np.array([v.pos for v in self.vertices]).reshape(-1, 2)
        return np.concatenate([e.points for e in self.edges], axis=0)

    def segments(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All polyline segments as (starts, ends, edge index) arrays."""
        a_list, b_list, idx = [], [], []
        for i, e in enumerate(self.edges):
            a_list.append(e.points[:-1])
            b_list.append(e.points[1:])
            idx.append(np.full(len(e.points) - 1, i))
        if not a_list:
            z = np.zeros((0, 2))
            return z, z.copy(), np.zeros(0, dtype=int)
        return np.concatenate(a_list), np.concatenate(b_list), np.concatenate(idx)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.int64(self.n_phases).tobytes())
        for v in self.vertices:
            h.update(v.pos.tobytes())
            h.update(b"1" if v.anchor else b"0")
        for e in self.edges:
            h.update(np.int64([e.va, e.vb, e.left, e.right]).tobytes())
            h.update(np.ascontiguousarray(e.points).tobytes())
        return h.hexdigest()

    # -- validation ----------------------------------------------------------

    def validate(self, check_faces: bool = True) -> list[Violation]:
        out: list[Violation] = []
        for i, e in enumerate(self.edges):
            if e.left == e.right:
                out.append(Violation("phase separation", f"edge {i}"))
            if not (1 <= e.left <= self.n_phases and 1 <= e.right <= self.n_phases):
                out.append(Violation("label range", f"edge {i}"))
            if len(e.points) < 2:
                out.append(Violation("degenerate edge", f"edge {i}"))
                continue
            if np.linalg.norm(e.points[0] - self.vertices[e.va].pos) > 1e-12:
                out.append(Violation("endpoint mismatch", f"edge {i} start"))
            if np.linalg.norm(e.points[-1] - self.vertices[e.vb].pos) > 1e-12:
                out.append(Violation("endpoint mismatch", f"edge {i} end"))
            seglen = np.linalg.norm(np.diff(e.points, axis=0), axis=1)
            if np.any(seglen < 1e-14):
                out.append(Violation("zero-length segment", f"edge {i}"))
        for vi, v in enumerate(self.vertices):
            sd = float(np.asarray(self.domain.signed_distance(v.pos)))
            if v.anchor:
                if abs(sd) > ANCHOR_TOL:
                    out.append(Violation("anchor off boundary", f"vertex {vi}", f"sd={sd:.2e}"))
            elif sd <= 0:
                out.append(Violation("vertex outside domain", f"vertex {vi}", f"sd={sd:.2e}"))
        if self.edges:
            out.extend(self._check_embedded())
            out.extend(self._check_vertex_labels())
            if self.total_length() <= 0:
                out.append(Violation("empty length", "network"))
        if check_faces and not out:
            out.extend(self._check_faces())
        return out

    def require_valid(self):
        v = self.validate()
        if v:
            raise NetworkError("; ".join(f"{x.rule} at {x.element}" for x in v[:5]))

    def _check_embedded(self) -> list[Violation]:
        """Segment-pair sweep: no two segments may cross except at shared nodes."""
        A, B, eidx = self.segments()
        n = len(A)
        if n < 2:
            return []
        out: list[Violation] = []
        # consecutive segments of the same edge share a point by construction
        d1 = B - A
        tol = 1e-12
        for i in range(n - 1):
            js = np.arange(i + 1, n)
            r = A[js] - A[i]
            den = d1[i, 0] * d1[js, 1] - d1[i, 1] * d1[js, 0]
            num_t = r[:, 0] * d1[js, 1] - r[:, 1] * d1[js, 0]
            num_u = r[:, 0] * d1[i, 1] - r[:, 1] * d1[i, 0]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = num_t / den
                u = num_u / den
            cross = (np.abs(den) > tol) & (t > tol) & (t < 1 - tol) & (u > tol) & (u < 1 - tol)
            # endpoint-interior touches (T-junctions) are also violations
            for j in js[cross]:
                out.append(
                    Violation(
                        "embeddedness", f"edges {eidx[i]} and {eidx[j]}", "segments cross"
                    )
                )
                if len(out) >= 10:
                    return out
            # touching: interior of one segment hits an endpoint of the other
            par = np.abs(den) <= tol
            if np.any(par):
                # parallel overlap check via projections
                for j in js[par]:
                    if self._overlap(A[i], B[i], A[j], B[j]):
                        out.append(
                            Violation("embeddedness", f"edges {eidx[i]} and {eidx[j]}", "overlap")
                        )
                        if len(out) >= 10:
                            return out
        return out

    @staticmethod
    def _overlap(a1, b1, a2, b2) -> bool:
        d = b1 - a1
        L = np.linalg.norm(d)
        if L < 1e-14:
            return False
        t = d / L
        n = np.array([-t[1], t[0]])
        off2 = abs(float((a2 - a1) @ n))
        off3 = abs(float((b2 - a1) @ n))
        if off2 > 1e-12 or off3 > 1e-12:
            return False
        s2, s3 = float((a2 - a1) @ t), float((b2 - a1) @ t)
        lo, hi = min(s2, s3), max(s2, s3)
        return hi > 1e-12 and lo < L - 1e-12 and hi - max(lo, 0.0) > 1e-12

    def _outgoing(self) -> dict[int, list[tuple[float, int, int]]]:
        """Per vertex: outgoing half-edges as (angle, edge index, +1/-1 direction)."""
        table: dict[int, list[tuple[float, int, int]]] = {i: [] for i in range(len(self.vertices))}
        for ei, e in enumerate(self.edges):
            d0 = e.points[1] - e.points[0]
            table[e.va].append((math.atan2(d0[1], d0[0]), ei, +1))
            d1 = e.points[-2] - e.points[-1]
            table[e.vb].append((math.atan2(d1[1], d1[0]), ei, -1))
        for vi in table:
            table[vi].sort()
        return table

    def _half_edge_labels(self, ei: int, direction: int) -> tuple[int, int]:
        """(left, right) labels of edge ei as seen when traversed in ``direction``."""
        e = self.edges[ei]
        return (e.left, e.right) if direction > 0 else (e.right, e.left)

    def _check_vertex_labels(self) -> list[Violation]:
        out: list[Violation] = []
        table = self._outgoing()
        for vi, items in table.items():
            if not items:
                continue
            k = len(items)
            for q in range(k):
                _, ei, di = items[q]
                _, ej, dj = items[(q + 1) % k]
                # sector between outgoing edge q and q+1 (CCW): left of q must
                # match right of q+1
                left_i = self._half_edge_labels(ei, di)[0]
                right_j = self._half_edge_labels(ej, dj)[1]
                if left_i != right_j:
                    out.append(
                        Violation(
                            "label consistency",
                            f"vertex {vi}",
                            f"edges {ei}/{ej} disagree ({left_i} vs {right_j})",
                        )
                    )
                    if len(out) >= 10:
                        return out
        return out

    # -- faces ----------------------------------------------------------------

    def faces(self, arc_step: float = 5e-3) -> list[Face]:
        """Faces of the subdivision of the domain induced by the network.

        Anchored networks are closed up with boundary arcs between consecutive
        anchors; the outline of each face is polygonized (arc pieces at
        ``arc_step``) and its area corrected exactly with chord-arc areas.
        """
        if not self.edges:
            return [
                Face(
                    self.background_label,
                    self.domain.area(),
                    [("full-boundary", None)],
                    self.domain.arc_points(0.0, 0.0, arc_step),
                )
            ]
        anchors = [i for i, v in enumerate(self.vertices) if v.anchor]
        if anchors:
            return self._faces_anchored(anchors, arc_step)
        return self._faces_interior(arc_step)

    def _faces_interior(self, arc_step: float) -> list[Face]:
        """Faces when the network has no boundary anchors (closed curves)."""
        loops, labels = self._trace_network_faces()
        faces: list[Face] = []
        outer_area = self.domain.area()
        outer_label = None
        for loop, label in zip(loops, labels):
            poly = self._loop_polygon(loop)
            area = _shoelace(poly)
            if area > 0:
                faces.append(Face(label, area, [("network", loop)], poly))
                outer_area -= area
            else:
                outer_label = label
        if outer_label is None:
            outer_label = self.background_label
        faces.append(
            Face(
                outer_label,
                outer_area,
                [("outer", None)],
                self.domain.arc_points(0.0, 0.0, arc_step),
            )
        )
        return faces

    def _trace_network_faces(self):
        """Orbit decomposition of network half-edges (next = cw-rotated twin)."""
        table = self._outgoing()
        # position of each half-edge in its vertex's rotational order
        pos: dict[tuple[int, int], int] = {}
        for vi, items in table.items():
            for q, (_, ei, di) in enumerate(items):
                pos[(ei, di)] = q
        visited: set[tuple[int, int]] = set()
        loops = []
        labels = []
        for ei0 in range(len(self.edges)):
            for di0 in (+1, -1):
                if (ei0, di0) in visited:
                    continue
                loop = []
                ei, di = ei0, di0
                label = self._half_edge_labels(ei, di)[0]
                ok = True
                for _ in range(4 * len(self.edges) + 4):
                    loop.append((ei, di))
                    visited.add((ei, di))
                    e = self.edges[ei]
                    head = e.vb if di > 0 else e.va
                    items = table[head]
                    q = pos[(ei, -di)]
                    # faces on the left: take the next outgoing edge clockwise
                    nq = (q - 1) % len(items)
                    _, ei, di = items[nq]
                    if (ei, di) == (ei0, di0):
                        break
                else:
                    ok = False
                if ok:
                    loops.append(loop)
                    labels.append(label)
        return loops, labels

    def _loop_polygon(self, loop) -> np.ndarray:
        pts = []
        for ei, di in loop:
            p = self.edges[ei].points
            p = p if di > 0 else p[::-1]
            pts.append(p[:-1])
        return np.concatenate(pts, axis=0)

    def _faces_anchored(self, anchors: list[int], arc_step: float) -> list[Face]:
        """Faces for anchored networks, with boundary arcs closing the loops."""
        dom = self.domain
        params = sorted((dom.perimeter_param(self.vertices[a].pos), a) for a in anchors)
        arcs = []  # (anchor_from, anchor_to, s0, s1) CCW
        for q in range(len(params)):
            s0, a0 = params[q]
            s1, a1 = params[(q + 1) % len(params)]
            arcs.append((a0, a1, s0, s1))

        # half-edge tables: network half-edges plus arc half-edges (arc, +1)
        # traverses CCW (domain on its left), (arc, -1) CW.
        table: dict[int, list[tuple[float, str, int, int]]] = {
            i: [] for i in range(len(self.vertices))
        }
        for ei, e in enumerate(self.edges):
            d0 = e.points[1] - e.points[0]
            table[e.va].append((math.atan2(d0[1], d0[0]), "net", ei, +1))
            d1 = e.points[-2] - e.points[-1]
            table[e.vb].append((math.atan2(d1[1], d1[0]), "net", ei, -1))
        arc_pts = {}
        for ai, (a0, a1, s0, s1) in enumerate(arcs):
            pts = dom.arc_points(s0, s1, arc_step)
            # snap endpoints to the stored anchor positions
            pts[0] = self.vertices[a0].pos
            pts[-1] = self.vertices[a1].pos
            arc_pts[ai] = pts
            d0 = pts[1] - pts[0]
            table[a0].append((math.atan2(d0[1], d0[0]), "arc", ai, +1))
            d1 = pts[-2] - pts[-1]
            table[a1].append((math.atan2(d1[1], d1[0]), "arc", ai, -1))
        for vi in table:
            table[vi].sort(key=lambda z: z[0])
        pos = {}
        for vi, items in table.items():
            for q, (_, kind, idx, di) in enumerate(items):
                pos[(kind, idx, di)] = q

        def head_of(kind, idx, di):
            if kind == "net":
                e = self.edges[idx]
                return e.vb if di > 0 else e.va
            a0, a1, _, _ = arcs[idx]
            return a1 if di > 0 else a0

        visited = set()
        faces: list[Face] = []
        all_half = [("net", ei, di) for ei in range(len(self.edges)) for di in (+1, -1)]
        all_half += [("arc", ai, +1) for ai in range(len(arcs))]
        for start in all_half:
            if start in visited:
                continue
            loop = []
            cur = start
            for _ in range(4 * len(all_half) + 4):
                loop.append(cur)
                visited.add(cur)
                head = head_of(*cur)
                items = table[head]
                q = pos[(cur[0], cur[1], -cur[2])]
                nq = (q - 1) % len(items)
                _, kind, idx, di = items[nq]
                cur = (kind, idx, di)
                if cur == start:
                    break
            # assemble outline and exact area
            pts = []
            area_corr = 0.0
            labels = set()
            for kind, idx, di in loop:
                if kind == "net":
                    p = self.edges[idx].points
                    p = p if di > 0 else p[::-1]
                    labels.add(self._half_edge_labels(idx, di)[0])
                else:
                    p = arc_pts[idx]
                    p = p if di > 0 else p[::-1]
                    _, _, s0, s1 = arcs[idx]
                    corr = self.domain.arc_chord_area(s0, s1)
                    area_corr += corr if di > 0 else -corr
                pts.append(p[:-1])
            poly = np.concatenate(pts, axis=0)
            area = _shoelace(poly) + area_corr
            if area <= 0:
                continue  # outer orbit
            if not labels:
                label = self.background_label
            elif len(labels) == 1:
                label = labels.pop()
            else:
                label = -1  # inconsistent; flagged by _check_faces
            faces.append(Face(label, area, [("loop", loop)], poly))
        return faces

    def _check_faces(self) -> list[Violation]:
        out: list[Violation] = []
        try:
            faces = self.faces()
        except Exception as exc:  # traversal blow-ups are structural violations
            return [Violation("face traversal", "network", repr(exc))]
        for fi, f in enumerate(faces):
            if f.label == -1:
                out.append(Violation("face label consistency", f"face {fi}"))
            if f.area < -1e-10:
                out.append(Violation("negative face area", f"face {fi}", f"area={f.area:.2e}"))
        total = sum(f.area for f in faces)
        if abs(total - self.domain.area()) > 1e-6 * max(1.0, self.domain.area()):
            out.append(
                Violation(
                    "faces partition domain",
                    "network",
                    f"sum={total!r} vs {self.domain.area()!r}",
                )
            )
        return out

    # -- measurements -----------------------------------------------------

    def phase_areas(self) -> np.ndarray:
        """Face areas accumulated by label; sums to the domain area."""
        violations = self.validate(check_faces=False)
        if violations:
            raise NetworkError(f"invalid network: {violations[0].rule}")
        out = np.zeros(self.n_phases)
        for f in self.faces():
            if f.label == -1:
                raise NetworkError("inconsistent face labels")
            out[f.label - 1] += f.area
        return out

    def phase_border_lengths(self) -> np.ndarray:
        """Total edge length bordering each phase (each edge counts twice)."""
        out = np.zeros(self.n_phases)
        for e in self.edges:
            out[e.left - 1] += e.length
            out[e.right - 1] += e.length
        return out

    # -- refinement ---------------------------------------------------------

    def resample(self, h_max: float) -> "LabeledNetwork":
        """Arc-length subdivision so every polyline segment is at most h_max.

        Only inserts points; geometry, labels, junctions, anchors, and total
        length are preserved exactly.
        """
        if h_max <= 0:
            raise ValueError("h_max must be positive")
        net = self.copy()
        for e in net.edges:
            pts = [e.points[0]]
            for k in range(len(e.points) - 1):
                a, b = e.points[k], e.points[k + 1]
                L = float(np.linalg.norm(b - a))
                n = max(1, int(math.ceil(L / h_max - 1e-12)))
                for q in range(1, n):
                    pts.append(a + (b - a) * (q / n))
                pts.append(b)
            e.points = np.array(pts)
        return net

    def coalesce(self, h_min: float) -> "LabeledNetwork":
        """Drop interior polyline points closer than h_min to their predecessor.

        Counters tangential point bunching during the flow; never touches
        endpoints and never increases length.
        """
        net = self.copy()
        for e in net.edges:
            pts = [e.points[0]]
            for k in range(1, len(e.points) - 1):
                if np.linalg.norm(e.points[k] - pts[-1]) >= h_min:
                    pts.append(e.points[k])
            pts.append(e.points[-1])
            if len(pts) == 2 and np.linalg.norm(pts[1] - pts[0]) < 1e-14:
                pts = [e.points[0], e.points[-1]]
            e.points = np.array(pts)
        return net


def _shoelace(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
