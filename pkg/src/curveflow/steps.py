"""The three epoch operations: area reduction, retraction, damped motion.

Reduction applies a greedy pass of a finite move catalog (edge collapse,
vertex merge, junction split, chain straighten) restricted to the shrunken
core; retraction projects stray points back onto the core boundary; the
motion step displaces every polyline point by the damped smoothed mean
curvature times the step size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .cutoff import DampingField
from .geometry import ConvexDomain, RegionIndex, anchor_distance
from .kernel import SmoothingKernel
from .network import LabeledNetwork, NetworkError
from .varifold import CurvatureField

__all__ = [
    "MoveRecord",
    "ExcessEstimate",
    "DeformationCaps",
    "reduce_network",
    "retract",
    "flow_step",
    "motion_bound_check",
    "StepSizeError",
]


class StepSizeError(RuntimeError):
    """Motion step kept violating embeddedness after halving retries."""


@dataclass
class MoveRecord:
    kind: str
    length_delta: float = 0.0
    max_displacement: float = 0.0
    area_deltas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    accepted: bool = True
    detail: str = ""


@dataclass
class DeformationCaps:
    disp: float
    area: float

    @classmethod
    def paper(cls, j: float) -> "DeformationCaps":
        return cls(disp=1.0 / j**2, area=1.0 / j)


@dataclass
class ExcessEstimate:
    """Achieved length reduction (<= 0); an upper bound on the true excess."""

    achieved_reduction: float
    region: str


def _points_in_core(domain: ConvexDomain, idx: RegionIndex, pts: np.ndarray) -> bool:
    if len(pts) == 0:
        return True
    sd = np.asarray(domain.signed_distance(pts))
    return bool(np.all(sd >= idx.core_margin))


def _measure(before: LabeledNetwork, after: LabeledNetwork):
    dlen = after.total_length() - before.total_length()
    try:
        d_area = after.phase_areas() - before.phase_areas()
    except NetworkError:
        return dlen, None
    return dlen, d_area


def _attempt(
    current: LabeledNetwork,
    candidate: LabeledNetwork,
    moved_before: np.ndarray,
    moved_after: np.ndarray,
    caps: DeformationCaps,
    domain: ConvexDomain,
    idx: RegionIndex,
    kind: str,
    records: list[MoveRecord],
) -> LabeledNetwork | None:
    """Validate a candidate move against the admissibility budget; commit or log a rejection."""
    disp = (
        float(np.max(np.linalg.norm(moved_after - moved_before, axis=1)))
        if len(moved_before)
        else 0.0
    )
    rec = MoveRecord(kind=kind, max_displacement=disp, accepted=False)
    if disp > caps.disp + 1e-15:
        rec.detail = "displacement cap"
        records.append(rec)
        return None
    if not (_points_in_core(domain, idx, moved_before) and _points_in_core(domain, idx, moved_after)):
        rec.detail = "outside core"
        records.append(rec)
        return None
    if candidate.validate():
        rec.detail = "validation"
        records.append(rec)
        return None
    dlen, d_area = _measure(current, candidate)
    rec.length_delta = dlen
    if d_area is None:
        rec.detail = "area measurement"
        records.append(rec)
        return None
    rec.area_deltas = d_area
    if dlen >= -1e-14:
        rec.detail = "no reduction"
        records.append(rec)
        return None
    if np.any(np.abs(d_area) > caps.area + 1e-12):
        rec.detail = "area cap"
        records.append(rec)
        return None
    rec.accepted = True
    records.append(rec)
    return candidate


def _remove_edge_collapse(net: LabeledNetwork, ei: int) -> tuple[LabeledNetwork, np.ndarray, np.ndarray]:
    """Collapse edge ei to the midpoint of its endpoints."""
    out = net.copy()
    e = out.edges[ei]
    va, vb = e.va, e.vb
    mid = 0.5 * (out.vertices[va].pos + out.vertices[vb].pos)
    moved_before = np.concatenate([e.points, [out.vertices[va].pos], [out.vertices[vb].pos]])
    moved_after = np.broadcast_to(mid, moved_before.shape).copy()
    out.vertices[va] = out.vertices[va].copy()
    out.vertices[va].pos = mid.copy()
    del out.edges[ei]
    for other in out.edges:
        if other.va == vb:
            other.va = va
        if other.vb == vb:
            other.vb = va
        if other.va == va:
            other.points = other.points.copy()
            other.points[0] = mid
        if other.vb == va:
            other.points = other.points.copy()
            other.points[-1] = mid
    _drop_orphans(out)
    return out, moved_before, moved_after


def _merge_vertices(net: LabeledNetwork, va: int, vb: int) -> tuple[LabeledNetwork, np.ndarray, np.ndarray]:
    out = net.copy()
    pa, pb = out.vertices[va].pos, out.vertices[vb].pos
    mid = 0.5 * (pa + pb)
    moved_before = np.array([pa, pb])
    moved_after = np.array([mid, mid])
    out.vertices[va].pos = mid.copy()
    for e in out.edges:
        if e.va == vb:
            e.va = va
        if e.vb == vb:
            e.vb = va
        if e.va == va:
            e.points = e.points.copy()
            e.points[0] = mid
        if e.vb == va:
            e.points = e.points.copy()
            e.points[-1] = mid
    _drop_orphans(out)
    return out, moved_before, moved_after


def _drop_orphans(net: LabeledNetwork):
    used = sorted({e.va for e in net.edges} | {e.vb for e in net.edges})
    remap = {old: new for new, old in enumerate(used)}
    net.vertices = [net.vertices[i] for i in used]
    for e in net.edges:
        e.va = remap[e.va]
        e.vb = remap[e.vb]


def _incident_cyclic(net: LabeledNetwork, vi: int):
    """Incident half-edges of a vertex sorted CCW by outgoing direction."""
    items = []
    for ei, e in enumerate(net.edges):
        if e.va == vi:
            d = e.points[1] - e.points[0]
            items.append((math.atan2(d[1], d[0]), ei, +1))
        if e.vb == vi:
            d = e.points[-2] - e.points[-1]
            items.append((math.atan2(d[1], d[0]), ei, -1))
    items.sort()
    return items


def _local_targets(net: LabeledNetwork, items):
    """The nearest polyline point of each incident edge beyond the vertex."""
    out = []
    for _, ei, di in items:
        p = net.edges[ei].points
        out.append(p[1] if di > 0 else p[-2])
    return np.array(out)


def _split_junction(
    net: LabeledNetwork, vi: int, pair_start: int, caps: DeformationCaps
) -> tuple[LabeledNetwork, np.ndarray, np.ndarray] | None:
    """Split two cyclically adjacent edges off a degree >= 4 vertex.

    New positions solve the local two-point Steiner problem among the nearest
    polyline targets of the incident edges, derivative-free.
    """
    items = _incident_cyclic(net, vi)
    d = len(items)
    if d < 4:
        return None
    x0 = net.vertices[vi].pos
    targets = _local_targets(net, items)
    group_u = [pair_start % d, (pair_start + 1) % d]
    group_v = [q for q in range(d) if q not in group_u]
    tu = targets[group_u]
    tv = targets[group_v]

    def cost(z):
        u = z[:2]
        v = z[2:]
        return (
            float(np.sum(np.linalg.norm(tu - u, axis=1)))
            + float(np.sum(np.linalg.norm(tv - v, axis=1)))
            + float(np.linalg.norm(u - v))
        )

    bis = tu.mean(axis=0) - x0
    nb = np.linalg.norm(bis)
    step = min(0.25 * caps.disp, 0.25 * nb) if nb > 1e-12 else 0.0
    z0 = np.concatenate([x0 + (bis / nb * step if nb > 1e-12 else 0.0), x0])
    res = minimize(cost, z0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-10, "maxiter": 4000})
    u, v = res.x[:2], res.x[2:]
    # clamp to the displacement cap ball around the old junction
    for z in (u, v):
        dvec = z - x0
        n = np.linalg.norm(dvec)
        if n > caps.disp:
            z[:] = x0 + dvec * (caps.disp / n)

    out = net.copy()
    out.vertices[vi].pos = v.copy()
    ui = out.add_vertex(u)
    for q in range(d):
        _, ei, di = items[q]
        e = out.edges[ei]
        e.points = e.points.copy()
        if q in group_u:
            if di > 0:
                e.va = ui
                e.points[0] = u
            else:
                e.vb = ui
                e.points[-1] = u
        else:
            if di > 0:
                e.points[0] = v
            else:
                e.points[-1] = v
    # sector labels around the old vertex: the sector between cyclic items q
    # and q+1 carries the left label of item q
    def sector_labels(q):
        _, ei, di = items[q % d]
        return (net.edges[ei].left, net.edges[ei].right) if di > 0 else (
            net.edges[ei].right,
            net.edges[ei].left,
        )

    after = sector_labels((pair_start + 1) % d)[0]
    before = sector_labels(pair_start)[1]
    out.add_edge(ui, vi, left=before, right=after)
    if out.validate():
        # insurance against a flipped orientation convention
        out.edges[-1].left, out.edges[-1].right = after, before
    moved_before = np.array([x0, x0])
    moved_after = np.array([u, v])
    return out, moved_before, moved_after


def _straighten_runs(net: LabeledNetwork, ei: int, caps: DeformationCaps, max_window: int = 8):
    """Candidate chord replacements of interior polyline runs of edge ei."""
    e = net.edges[ei]
    n = len(e.points)
    cands = []
    k = 1
    while k < n - 1:
        best = None
        for w in range(2, min(max_window, n - k)):
            a, b = e.points[k - 1], e.points[k + w]
            seg = e.points[k : k + w]
            ts = np.linspace(1.0 / (w + 1), w / (w + 1), w)
            chord = a[None, :] + ts[:, None] * (b - a)[None, :]
            disp = float(np.max(np.linalg.norm(chord - seg, axis=1)))
            if disp > caps.disp:
                break
            old_len = float(
                np.sum(np.linalg.norm(np.diff(e.points[k - 1 : k + w + 1], axis=0), axis=1))
            )
            new_len = float(np.linalg.norm(b - a))
            if new_len < old_len - 1e-13:
                best = (k, w, chord)
        if best is not None:
            cands.append(best)
            k += best[1] + 1
        else:
            k += 1
    return cands


def reduce_network(
    net: LabeledNetwork,
    domain: ConvexDomain,
    idx: RegionIndex,
    caps: DeformationCaps,
) -> tuple[LabeledNetwork, ExcessEstimate, list[MoveRecord]]:
    """One greedy pass of the area-reducing move catalog restricted to the core.

    Every committed move keeps the network valid, moves points at most
    ``caps.disp``, changes each phase area at most ``caps.area``, and strictly
    reduces total length. The cumulative reduction is an upper bound on the
    region's deformation excess.
    """
    records: list[MoveRecord] = []
    current = net
    start_len = net.total_length()

    # (a) collapse short edges
    changed = True
    while changed:
        changed = False
        for ei, e in enumerate(current.edges):
            if e.va == e.vb:
                continue
            if e.length >= caps.disp:
                continue
            cand, mb, ma = _remove_edge_collapse(current, ei)
            nxt = _attempt(current, cand, mb, ma, caps, domain, idx, "edge-collapse", records)
            if nxt is not None:
                current = nxt
                changed = True
                break

    # (b) merge close vertex pairs
    changed = True
    while changed:
        changed = False
        nv = len(current.vertices)
        adj = {(e.va, e.vb) for e in current.edges} | {(e.vb, e.va) for e in current.edges}
        for va in range(nv):
            for vb in range(va + 1, nv):
                if (va, vb) in adj:
                    continue
                dist = float(
                    np.linalg.norm(current.vertices[va].pos - current.vertices[vb].pos)
                )
                if dist >= caps.disp:
                    continue
                cand, mb, ma = _merge_vertices(current, va, vb)
                nxt = _attempt(current, cand, mb, ma, caps, domain, idx, "vertex-merge", records)
                if nxt is not None:
                    current = nxt
                    changed = True
                    break
            if changed:
                break

    # (c) split junctions of degree >= 4 (best adjacent pairing)
    changed = True
    while changed:
        changed = False
        for vi in range(len(current.vertices)):
            if current.vertex_degree(vi) < 4 or current.vertices[vi].anchor:
                continue
            best = None
            best_len = current.total_length() - 1e-14
            deg = current.vertex_degree(vi)
            for pair_start in range(deg):
                trial = _split_junction(current, vi, pair_start, caps)
                if trial is None:
                    continue
                cand, mb, ma = trial
                tmp_records: list[MoveRecord] = []
                nxt = _attempt(
                    current, cand, mb, ma, caps, domain, idx, "junction-split", tmp_records
                )
                if nxt is not None and nxt.total_length() < best_len:
                    best = (nxt, tmp_records)
                    best_len = nxt.total_length()
            if best is not None:
                current = best[0]
                records.extend(best[1])
                changed = True
                break

    # (d) straighten wiggly chains (recompute candidates after each commit:
    # indices refer to the live polyline)
    for ei in range(len(current.edges)):
        while True:
            applied = False
            for k, w, chord in _straighten_runs(current, ei, caps):
                cand = current.copy()
                e = cand.edges[ei]
                pts = e.points.copy()
                before_seg = pts[k : k + w].copy()
                pts[k : k + w] = chord
                e.points = pts
                nxt = _attempt(
                    current, cand, before_seg, chord, caps, domain, idx, "chain-straighten", records
                )
                if nxt is not None:
                    current = nxt
                    applied = True
                    break
            if not applied:
                break

    reduction = current.total_length() - start_len
    return current, ExcessEstimate(achieved_reduction=min(reduction, 0.0), region="core"), records


def retract(
    net: LabeledNetwork,
    domain: ConvexDomain,
    idx: RegionIndex,
    anchor,
    mode: str = "desk",
) -> tuple[LabeledNetwork, list[MoveRecord]]:
    """Project points that strayed out of the epoch core back onto its boundary.

    Points inside the near-boundary anchor zone are exempt (they are handled
    by damping instead). In paper mode only the thin band within j^-10 of the
    core is retracted; desk mode retracts everything outside the core.
    """
    margin = idx.epoch_margin
    records: list[MoveRecord] = []
    if margin <= 0:
        return net, records
    out = net.copy()
    moved = 0
    max_disp = 0.0
    band = idx.j ** (-10.0) if mode == "paper" else math.inf
    len_before = net.total_length()

    def retract_points(P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        sd = np.asarray(domain.signed_distance(P))
        near_anchor = np.asarray(anchor_distance(anchor, P)) < idx.near_radius
        mask = (sd < margin) & (~near_anchor) & (margin - sd <= band)
        if not np.any(mask):
            return P, mask
        Q = P.copy()
        foot, nu = domain.boundary_projection(P[mask])
        Q[mask] = foot - margin * nu
        return Q, mask

    vp = np.array([v.pos for v in out.vertices]).reshape(-1, 2)
    vq, vmask = retract_points(vp)
    for i, v in enumerate(out.vertices):
        if vmask[i]:
            v.pos = vq[i]
            moved += 1
            max_disp = max(max_disp, float(np.linalg.norm(vq[i] - vp[i])))
    for e in out.edges:
        P = e.points.copy()
        if len(P) > 2:
            Q, mask = retract_points(P[1:-1])
            if np.any(mask):
                moved += int(np.sum(mask))
                max_disp = max(
                    max_disp, float(np.max(np.linalg.norm(Q - P[1:-1], axis=1)))
                )
            P[1:-1] = Q
        P[0] = out.vertices[e.va].pos
        P[-1] = out.vertices[e.vb].pos
        e.points = P
    if moved:
        records.append(
            MoveRecord(
                kind="retract",
                length_delta=out.total_length() - len_before,
                max_displacement=max_disp,
                detail=f"{moved} points",
            )
        )
        return out, records
    return net, records


def flow_step(
    net: LabeledNetwork,
    fld: CurvatureField,
    damping: DampingField,
    dt: float,
    h_max: float,
    hard_pin_anchors: bool = False,
    max_retries: int = 4,
) -> tuple[LabeledNetwork, list[MoveRecord], np.ndarray]:
    """Move every point by the damped smoothed mean curvature for time dt.

    Returns the stepped network (resampled back to ``h_max``), move records,
    and the per-point displacement magnitudes actually applied. Retries with
    halved dt (up to ``max_retries``) if embeddedness breaks.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    vpos = np.array([v.pos for v in net.vertices]).reshape(-1, 2)
    interiors = [e.points[1:-1] for e in net.edges]
    counts = [len(p) for p in interiors]
    allpts = (
        np.concatenate([vpos] + [p for p in interiors if len(p)], axis=0)
        if sum(counts)
        else vpos.copy()
    )
    eta = damping.eta_many(allpts)
    H = fld.h_eps(allpts)
    vel = eta[:, None] * H
    if hard_pin_anchors:
        for i, v in enumerate(net.vertices):
            if v.anchor:
                vel[i] = 0.0

    records: list[MoveRecord] = []
    scale = 1.0
    len_before = net.total_length()
    for attempt in range(max_retries + 1):
        disp = vel * (dt * scale)
        out = net.copy()
        for i, v in enumerate(out.vertices):
            v.pos = v.pos + disp[i]
        ofs = len(vpos)
        for e, cnt in zip(out.edges, counts):
            P = e.points.copy()
            if cnt:
                P[1:-1] = P[1:-1] + disp[ofs : ofs + cnt]
                ofs += cnt
            P[0] = out.vertices[e.va].pos
            P[-1] = out.vertices[e.vb].pos
            e.points = P
        out = out.coalesce(h_max / 8.0).resample(h_max)
        violations = out.validate()
        if not violations:
            mags = np.linalg.norm(disp, axis=1)
            records.append(
                MoveRecord(
                    kind="flow",
                    length_delta=out.total_length() - len_before,
                    max_displacement=float(mags.max()) if len(mags) else 0.0,
                    detail=f"dt_scale={scale}",
                )
            )
            return out, records, mags
        if not any(v.rule == "embeddedness" for v in violations):
            raise NetworkError(
                f"flow step broke invariant {violations[0].rule} at {violations[0].element}"
            )
        scale *= 0.5
    raise StepSizeError(f"embeddedness violations persisted after {max_retries} halvings")


def motion_bound_check(
    displacements: np.ndarray,
    kernel: SmoothingKernel,
    kappa: float,
    dt: float,
    mode: str = "desk",
    desk_cap: float | None = None,
) -> dict:
    """Check recorded flow displacements against the motion bound.

    Paper mode asserts the 2 eps^(kappa-2) bound; desk mode reports the
    histogram and counts exceedances of the configured cap without clamping.
    """
    d = np.asarray(displacements, dtype=float)
    eps = kernel.eps
    if mode == "paper":
        cap = 2.0 * eps ** (kappa - 2.0)
    else:
        cap = desk_cap if desk_cap is not None else 2.0 * eps**-2.0 * dt
    n_exceed = int(np.sum(d > cap)) if len(d) else 0
    hist, edges = (
        np.histogram(d, bins=10) if len(d) else (np.zeros(10, dtype=int), np.linspace(0, 1, 11))
    )
    report = {
        "mode": mode,
        "cap": float(cap),
        "max": float(d.max()) if len(d) else 0.0,
        "exceedances": n_exceed,
        "histogram": hist.tolist(),
        "bin_edges": edges.tolist(),
        "ok": n_exceed == 0,
    }
    if mode == "paper" and n_exceed:
        raise AssertionError(
            f"paper-mode displacement bound violated: max={report['max']} > cap={cap}"
        )
    return report
