"""Epoch scheduler: parameter gates, the reduce/retract/flow loop, and
stationarity detection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .cutoff import DampingField
from .diagnostics import DiagnosticsRecord, compute_record
from .geometry import ConvexDomain, RegionIndex, convex_hull
from .kernel import make_kernel
from .network import LabeledNetwork
from .steps import (
    DeformationCaps,
    StepSizeError,
    flow_step,
    motion_bound_check,
    reduce_network,
    retract,
)
from .testfuncs import default_family
from .varifold import CurvatureField, make_slice

__all__ = [
    "FlowConfig",
    "Trajectory",
    "ConfigError",
    "validate_params",
    "build_anchor",
    "run",
    "detect_stationarity",
]


class ConfigError(ValueError):
    pass


@dataclass
class FlowConfig:
    j: float = 7.0e10
    eps: float = 0.02
    dt: float = 2.5e-4
    kappa: int = 23  # 3n + 20 with n = 1
    t_end: float = 0.5
    mode: str = "desk"
    h_max: float = 0.02
    h_quad: float = 5.0e-3
    disp_cap: float = 1.0e-9
    area_cap: float = 1.0e-9
    cadence: int = 50
    stat_tol: float = 5.0e-3
    stat_window: int = 40
    seed: int = 0
    hard_pin: bool = False
    check_every: int = 1  # epochs between reduce/retract surgery passes

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if not (0 < self.eps < 1):
            raise ConfigError("eps must lie in (0, 1)")
        if self.j < 1:
            raise ConfigError("j must be >= 1")
        if self.t_end <= 0:
            raise ConfigError("t_end must be positive")
        if self.h_max <= 0 or self.h_quad <= 0:
            raise ConfigError("h_max and h_quad must be positive")
        if self.mode not in ("desk", "paper"):
            raise ConfigError("mode must be 'desk' or 'paper'")
        if self.cadence < 1:
            raise ConfigError("cadence must be >= 1")
        if self.stat_window < 2:
            raise ConfigError("stationarity window must be >= 2")
        if self.disp_cap < 0 or self.area_cap < 0:
            raise ConfigError("caps must be non-negative")

    def caps(self) -> DeformationCaps:
        if self.mode == "paper":
            return DeformationCaps.paper(self.j)
        return DeformationCaps(disp=self.disp_cap, area=self.area_cap)

    def to_dict(self) -> dict:
        return asdict(self)


def validate_params(config: FlowConfig, n: int = 1) -> dict:
    """Evaluate the scheme's parameter conditions, in log space.

    Paper mode turns any failure into a configuration error; desk mode returns
    the report for information only.
    """
    j = config.j
    eps = config.eps
    kappa = config.kappa
    ln_eps = math.log(eps)
    conds = []
    conds.append(("eps in (0,1) [stand-in for eps < eps_*]", 0.0 < eps < 1.0, f"eps={eps}"))
    ok_b = ln_eps / 6.0 <= -math.log(2.0 * j)
    conds.append(("eps^(1/6) <= 1/(2j)", ok_b, f"eps^(1/6)={eps ** (1 / 6):.6g}, 1/(2j)={1 / (2 * j):.6g}"))
    ok_c = math.log(2.0) + (kappa - 2.0) * ln_eps <= -10.0 * math.log(j)
    conds.append(("2 eps^(kappa-2) <= j^-10", ok_c, "log-space comparison"))
    lhs_d = math.log(2.0) + math.log(j) - kappa * ln_eps - j**0.125
    rhs_d = -math.log(4.0) - 0.25 * math.log(j)
    ok_d = lhs_d <= rhs_d
    conds.append(
        (
            "2 j eps^-kappa exp(-j^(1/8)) <= 1/(4 j^(1/4))",
            ok_d,
            f"log lhs={lhs_d:.6g}, log rhs={rhs_d:.6g}",
        )
    )
    if config.dt > 0:
        ln_dt = math.log(config.dt)
        ok_t = kappa * ln_eps - math.log(2.0) < ln_dt <= kappa * ln_eps
        detail = f"log dt={ln_dt:.6g}, log eps^kappa={kappa * ln_eps:.6g}"
    else:
        ok_t, detail = False, "dt not representable"
    conds.append(("dt in (eps^kappa/2, eps^kappa]", ok_t, detail))
    report = {
        "mode": config.mode,
        "conditions": [{"name": n_, "ok": o, "detail": d} for n_, o, d in conds],
        "ok": all(o for _, o, _ in conds),
    }
    if config.mode == "paper" and not report["ok"]:
        bad = ", ".join(c["name"] for c in report["conditions"] if not c["ok"])
        raise ConfigError(f"paper-mode parameter conditions failed: {bad}")
    return report


def build_anchor(net: LabeledNetwork, domain: ConvexDomain, idx: RegionIndex, h_sub: float | None = None):
    """Frozen anchor trace: initial-network segments outside the core D_j.

    Segments are subdivided at a fraction of the boundary band so membership
    by midpoint is accurate.
    """
    band = idx.core_margin
    if h_sub is None:
        h_sub = max(band / 4.0, 1e-6)
    fine = net.resample(h_sub)
    A, B, _ = fine.segments()
    if len(A) == 0:
        z = np.zeros((0, 2))
        return z, z.copy()
    mid = 0.5 * (A + B)
    sd = np.asarray(domain.signed_distance(mid))
    keep = sd < band
    return A[keep].copy(), B[keep].copy()


@dataclass
class Trajectory:
    records: list[DiagnosticsRecord]
    snapshots: list[tuple[float, LabeledNetwork]]
    config: FlowConfig
    scenario_name: str = ""
    status: str = "completed"
    stationary_time: float | None = None

    @property
    def final_network(self) -> LabeledNetwork:
        return self.snapshots[-1][1]

    def record_times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])


def detect_stationarity(
    records: list[DiagnosticsRecord], window: int, tol: float
) -> dict:
    """Declare stationarity when the damped curvature and relative length
    change both stay below tol across the trailing window."""
    if window < 2:
        raise ValueError("window must be >= 2")
    if len(records) < window:
        return {"stationary": False}
    recs = records[-window:]
    max_field = max(r.max_eta_h for r in recs)
    lengths = [r.length for r in recs]
    ref = max(records[0].length, 1e-300)
    rel_change = (max(lengths) - min(lengths)) / ref
    if max_field < tol and rel_change < tol:
        return {
            "stationary": True,
            "time": recs[-1].t,
            "max_eta_h": max_field,
            "rel_length_change": rel_change,
        }
    return {"stationary": False, "max_eta_h": max_field, "rel_length_change": rel_change}


def a4_check(net: LabeledNetwork) -> dict:
    """Each boundary anchor must touch at least two distinct phase closures
    along the domain boundary."""
    anchors = [i for i, v in enumerate(net.vertices) if v.anchor]
    if not anchors:
        return {"ok": True, "anchors": 0, "failures": []}
    faces = net.faces()
    arc_label: dict[int, int] = {}
    for f in faces:
        for kind, payload in f.loops:
            if kind != "loop":
                continue
            for k2, idx2, di2 in payload:
                if k2 == "arc" and di2 > 0:
                    arc_label[idx2] = f.label
    n_arc = len(arc_label)
    failures = []
    if n_arc:
        for q in range(n_arc):
            prev = arc_label.get((q - 1) % n_arc)
            nxt = arc_label.get(q)
            if prev is not None and nxt is not None and prev == nxt:
                failures.append(q)
    return {"ok": not failures, "anchors": len(anchors), "failures": failures}


def run(config: FlowConfig, scenario) -> Trajectory:
    """Execute the epoch loop on a scenario (object with .domain, .network, .name).

    Epochs follow reduce -> retract -> record -> flow; records land at epoch
    start (after surgery), one extra record captures the final state.
    Deterministic for a fixed config and scenario.
    """
    domain = scenario.domain
    net = scenario.network.copy()
    net.require_valid()
    validate_params(config)
    a4 = a4_check(net)
    if not a4["ok"]:
        if config.mode == "paper":
            raise ConfigError(f"anchor admissibility failed at boundary arcs {a4['failures']}")
        import warnings

        warnings.warn(f"anchor admissibility advisory failed: arcs {a4['failures']}", stacklevel=2)

    kernel = make_kernel(config.eps, 2)
    idx0 = RegionIndex(config.j, 0)
    seg_a, seg_b = build_anchor(net, domain, idx0)
    damping = DampingField(config.j, seg_a, seg_b)
    anchor = (seg_a, seg_b)
    family = default_family(domain)
    pts0 = net.all_points()
    anchors_ref = np.array([v.pos for v in net.vertices if v.anchor]).reshape(-1, 2)
    hull = convex_hull(np.concatenate([pts0, anchors_ref.reshape(-1, 2)], axis=0))
    family.tag_all(domain, hull, seed=config.seed)
    caps = config.caps()

    records: list[DiagnosticsRecord] = []
    snapshots: list[tuple[float, LabeledNetwork]] = [(0.0, net.copy())]
    status = "completed"
    stationary_time = None
    n_epochs = int(round(config.t_end / config.dt))
    desk_cap = 2.0 * config.eps**-2 * config.dt

    def make_record(state: LabeledNetwork, t: float, epoch: int):
        slc = make_slice(state, config.h_quad)
        fld = CurvatureField(slc, kernel)
        eta_s = damping.eta_many(slc.x)
        h_s = fld.h_eps(slc.x)
        rec = compute_record(
            state, slc, eta_s, h_s, family, hull, anchors_ref, t=t, epoch=epoch
        )
        return rec, fld

    k = 0
    try:
        for k in range(1, n_epochs + 1):
            net, excess, mv1 = reduce_network(net, domain, idx0, caps)
            net, mv2 = retract(net, domain, RegionIndex(config.j, k - 1), anchor, config.mode)
            rec, fld = make_record(net, t=(k - 1) * config.dt, epoch=k - 1)
            rec.reduction = excess.achieved_reduction
            counts: dict[str, int] = {}
            for mv in mv1 + mv2:
                if mv.accepted:
                    counts[mv.kind] = counts.get(mv.kind, 0) + 1
            rec.move_counts = counts
            rec.surgery_count = sum(counts.values())
            records.append(rec)
            if (k - 1) % config.cadence == 0 and k > 1:
                snapshots.append(((k - 1) * config.dt, net.copy()))
            st = detect_stationarity(records, config.stat_window, config.stat_tol)
            if st["stationary"]:
                status = "stationary"
                stationary_time = st["time"]
                break
            net, mvf, disps = flow_step(
                net, fld, damping, config.dt, config.h_max, hard_pin_anchors=config.hard_pin
            )
            bound = motion_bound_check(
                disps, kernel, config.kappa, config.dt, config.mode, desk_cap
            )
            rec.exceedances = bound["exceedances"]
        if status != "stationary":
            rec, _ = make_record(net, t=n_epochs * config.dt, epoch=n_epochs)
            records.append(rec)
        snapshots.append((records[-1].t, net.copy()))
    except StepSizeError as exc:
        status = f"failed:step-size:{exc}"
        snapshots.append((records[-1].t if records else 0.0, net.copy()))
    return Trajectory(
        records=records,
        snapshots=snapshots,
        config=config,
        scenario_name=getattr(scenario, "name", ""),
        status=status,
        stationary_time=stationary_time,
    )
