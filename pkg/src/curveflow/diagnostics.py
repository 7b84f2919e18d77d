"""Per-epoch measurements and inequality checks along a trajectory.

Records are computed from a snapshot state (network + its slice and damped
curvature values); dissipation-type inequalities and residuals are then pure
arithmetic over the record stream, so they can be recomputed and audited
offline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import hull_margin as hull_margin_fn
from .network import LabeledNetwork
from .testfuncs import TestFunctionFamily
from .varifold import VarifoldSlice

__all__ = [
    "DiagnosticsRecord",
    "compute_record",
    "junction_angles",
    "brakke_residual",
    "dissipation_report",
    "volume_continuity",
    "confinement_and_boundary",
    "barrier_mass",
    "quadrature_budget",
]


@dataclass
class DiagnosticsRecord:
    epoch: int
    t: float
    length: float
    masses: dict[str, float]
    dissipation: dict[str, float]  # sum of w * eta * phi * |h|^2 per test function
    transport: dict[str, float]  # sum of w * eta * (h . grad phi) per test function
    dissipation_raw: float  # sum of w * eta * |h|^2
    max_eta_h: float
    junction_angles: list[float]
    areas: list[float]
    hull_margin: float
    boundary_drift: float
    move_counts: dict[str, int] = field(default_factory=dict)
    surgery_count: int = 0
    exceedances: int = 0
    reduction: float = 0.0

    def as_flat_dict(self) -> dict:
        out = {
            "epoch": self.epoch,
            "t": self.t,
            "length": self.length,
            "dissipation_raw": self.dissipation_raw,
            "max_eta_h": self.max_eta_h,
            "hull_margin": self.hull_margin,
            "boundary_drift": self.boundary_drift,
            "surgery_count": self.surgery_count,
            "exceedances": self.exceedances,
            "reduction": self.reduction,
            "junction_angles": list(self.junction_angles),
            "areas": list(self.areas),
            "move_counts": dict(self.move_counts),
        }
        for k, v in self.masses.items():
            out[f"mass:{k}"] = v
        for k, v in self.dissipation.items():
            out[f"diss:{k}"] = v
        for k, v in self.transport.items():
            out[f"cross:{k}"] = v
        return out

    @classmethod
    def from_flat_dict(cls, d: dict) -> "DiagnosticsRecord":
        masses = {k[5:]: v for k, v in d.items() if k.startswith("mass:")}
        diss = {k[5:]: v for k, v in d.items() if k.startswith("diss:")}
        cross = {k[6:]: v for k, v in d.items() if k.startswith("cross:")}
        return cls(
            epoch=int(d["epoch"]),
            t=float(d["t"]),
            length=float(d["length"]),
            masses=masses,
            dissipation=diss,
            transport=cross,
            dissipation_raw=float(d["dissipation_raw"]),
            max_eta_h=float(d["max_eta_h"]),
            junction_angles=[float(x) for x in d["junction_angles"]],
            areas=[float(x) for x in d["areas"]],
            hull_margin=float(d["hull_margin"]),
            boundary_drift=float(d["boundary_drift"]),
            move_counts={k: int(v) for k, v in d.get("move_counts", {}).items()},
            surgery_count=int(d.get("surgery_count", 0)),
            exceedances=int(d.get("exceedances", 0)),
            reduction=float(d.get("reduction", 0.0)),
        )


def junction_angles(net: LabeledNetwork) -> list[float]:
    """Sorted angles (degrees) between consecutive incident edge directions
    at every junction vertex."""
    out: list[float] = []
    for vi in range(len(net.vertices)):
        dirs = []
        for e in net.edges:
            if e.va == vi:
                d = e.points[1] - e.points[0]
                dirs.append(math.atan2(d[1], d[0]))
            if e.vb == vi:
                d = e.points[-2] - e.points[-1]
                dirs.append(math.atan2(d[1], d[0]))
        if len(dirs) < 3:
            continue
        dirs.sort()
        gaps = [
            math.degrees((dirs[(q + 1) % len(dirs)] - dirs[q]) % (2 * math.pi))
            for q in range(len(dirs))
        ]
        out.extend(sorted(gaps))
    return out


def compute_record(
    net: LabeledNetwork,
    slc: VarifoldSlice,
    eta_s: np.ndarray,
    h_s: np.ndarray,
    family: TestFunctionFamily,
    hull: np.ndarray,
    anchor_ref: np.ndarray,
    t: float,
    epoch: int,
) -> DiagnosticsRecord:
    """Assemble the per-epoch record from slice-level damped curvature data.

    ``eta_s`` and ``h_s`` are the damping values and smoothed mean curvature
    at the slice samples; ``anchor_ref`` holds the fixed initial anchor
    positions (for drift measurement).
    """
    masses: dict[str, float] = {}
    diss: dict[str, float] = {}
    cross: dict[str, float] = {}
    h2 = np.einsum("mi,mi->m", h_s, h_s) if len(slc) else np.zeros(0)
    for fn in family:
        phi = np.asarray(fn.f(slc.x)) if len(slc) else np.zeros(0)
        gphi = np.asarray(fn.grad(slc.x)) if len(slc) else np.zeros((0, 2))
        masses[fn.name] = float(np.dot(slc.w, phi)) if len(slc) else 0.0
        diss[fn.name] = float(np.dot(slc.w, eta_s * phi * h2)) if len(slc) else 0.0
        cross[fn.name] = (
            float(np.dot(slc.w, eta_s * np.einsum("mi,mi->m", h_s, gphi))) if len(slc) else 0.0
        )
    diss_raw = float(np.dot(slc.w, eta_s * h2)) if len(slc) else 0.0
    eta_h = eta_s * np.sqrt(h2) if len(slc) else np.zeros(0)
    pts = net.all_points()
    margin = float(np.min(hull_margin_fn(hull, pts))) if len(pts) else 0.0
    anchors_now = np.array([v.pos for v in net.vertices if v.anchor]).reshape(-1, 2)
    if len(anchors_now) and len(anchor_ref):
        dmat = np.linalg.norm(anchors_now[:, None, :] - anchor_ref[None, :, :], axis=2)
        drift = float(np.max(np.min(dmat, axis=1)))
    else:
        drift = 0.0
    return DiagnosticsRecord(
        epoch=epoch,
        t=t,
        length=net.total_length(),
        masses=masses,
        dissipation=diss,
        transport=cross,
        dissipation_raw=diss_raw,
        max_eta_h=float(np.max(eta_h)) if len(eta_h) else 0.0,
        junction_angles=junction_angles(net),
        areas=[float(a) for a in net.phase_areas()],
        hull_margin=margin,
        boundary_drift=drift,
    )


def quadrature_budget(h_quad: float, h_max: float, length: float, dt_span: float) -> float:
    """Declared discretization allowance per residual assertion."""
    return 10.0 * (h_quad + h_max**2) * length * dt_span


def brakke_residual(
    records: list[DiagnosticsRecord],
    phi_name: str,
    t1: float,
    t2: float,
    dt: float,
    eps: float,
    h_quad: float,
    h_max: float,
    schedule=None,
) -> dict:
    """Mass change minus the time-integrated damped dissipation pairing.

    The inequality direction predicts residual <= slack where slack combines
    the scheme's eps^(1/8) per-epoch allowance and the declared quadrature
    budget. ``schedule`` optionally supplies (a(t), a'(t)) for a separable
    time-dependent test function a(t) * phi(x).
    """
    recs = [r for r in records if t1 - 1e-12 <= r.t <= t2 + 1e-12]
    if len(recs) < 2:
        raise ValueError("need at least two records in [t1, t2]")
    r1, r2 = recs[0], recs[-1]
    if phi_name not in r1.masses:
        raise KeyError(f"{phi_name!r} not recorded")
    a = (lambda t: 1.0) if schedule is None else schedule[0]
    ap = (lambda t: 0.0) if schedule is None else schedule[1]
    mass_change = a(r2.t) * r2.masses[phi_name] - a(r1.t) * r1.masses[phi_name]
    integral = 0.0
    for r in recs[:-1]:
        integrand = a(r.t) * (-r.dissipation[phi_name] + r.transport[phi_name])
        integrand += ap(r.t) * r.masses[phi_name]
        integral += dt * integrand
    residual = mass_change - integral
    span = r2.t - r1.t
    budget = quadrature_budget(h_quad, h_max, max(r.length for r in recs), span)
    slack = span * eps ** (1.0 / 8.0) + budget
    return {
        "phi": phi_name,
        "t1": r1.t,
        "t2": r2.t,
        "residual": residual,
        "slack": slack,
        "budget": budget,
        "ok": residual <= slack,
        "dissipation_magnitude": sum(dt * r.dissipation[phi_name] for r in recs[:-1]),
    }


def dissipation_report(records: list[DiagnosticsRecord], dt: float, eps: float) -> dict:
    """Final mass plus cumulative damped dissipation against the initial mass."""
    if not records:
        raise ValueError("empty trajectory")
    cum = sum(dt * r.dissipation_raw for r in records[:-1])
    initial = records[0].length
    final = records[-1].length
    span = records[-1].t - records[0].t
    slack = span * eps ** (1.0 / 6.0)
    return {
        "initial": initial,
        "final": final,
        "cumulative_dissipation": cum,
        "lhs": final + cum,
        "rhs": initial + slack,
        "slack": slack,
        "ok": final + cum <= initial + slack,
    }


def volume_continuity(records: list[DiagnosticsRecord], window_start: float = 0.0) -> dict:
    """Empirical 1/2-Hoelder constants of the per-phase areas."""
    recs = [r for r in records if r.t >= window_start]
    if len(recs) < 3:
        raise ValueError("need at least three records")
    areas = np.array([r.areas for r in recs])
    ts = np.array([r.t for r in recs])
    n_phase = areas.shape[1]
    consts = np.zeros(n_phase)
    idx = np.arange(len(recs))
    for i in range(n_phase):
        best = 0.0
        for q in idx:
            dt_ = np.abs(ts - ts[q])
            ok = dt_ > 1e-15
            ratios = np.abs(areas[ok, i] - areas[q, i]) / np.sqrt(dt_[ok])
            if len(ratios):
                best = max(best, float(np.max(ratios)))
        consts[i] = best
    return {"constants": consts.tolist(), "window_start": window_start}


def confinement_and_boundary(
    records: list[DiagnosticsRecord], h_max: float, drift_bound: float
) -> dict:
    """Hull containment (inflated by h_max) and anchor drift along the run."""
    margins = [r.hull_margin for r in records]
    drifts = [r.boundary_drift for r in records]
    viol = sum(1 for m in margins if m < -h_max)
    return {
        "min_hull_margin": min(margins),
        "hull_violations": viol,
        "max_boundary_drift": max(drifts),
        "drift_bound": drift_bound,
        "ok": viol == 0 and max(drifts) <= drift_bound,
    }


def barrier_mass(slc: VarifoldSlice, line_point, line_normal, offset: float = 0.0) -> float:
    """Slice mass beyond the barrier line by at least ``offset``."""
    n = np.asarray(line_normal, dtype=float)
    n = n / np.linalg.norm(n)
    if len(slc) == 0:
        return 0.0
    side = np.einsum("mk,k->m", slc.x - np.asarray(line_point, dtype=float), n)
    return float(np.sum(slc.w[side > offset]))
