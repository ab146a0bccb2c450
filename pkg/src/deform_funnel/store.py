"""Dataset of probed Jacobians and the funnel controller that reuses them.

Every probed Jacobian is stored with the absolute sensor state and the
deformation state it was acquired at. At the start of an execution the
nearest stored tuple (Euclidean distance on the concatenated sensor and
deformation vectors) supplies the working Jacobian; whenever progress stalls
a fresh Jacobian is probed at the current state and added to the set. The
growing set tiles the funnel: diverse start states reach one target.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .control import (
    ControlTarget,
    DeformationJacobian,
    ProbeConfig,
    control_error,
    control_tick,
    cost,
    probe_jacobian,
)
from .errors import EmptyStore


@dataclass
class JacobianRecord:
    record_id: int
    key_sensor: np.ndarray
    key_deformation: np.ndarray
    jacobian: DeformationJacobian
    use_count: int = 0
    last_improved_tick: int = -1

    def __post_init__(self):
        self.key_sensor = np.asarray(self.key_sensor, dtype=np.float64).copy()
        self.key_deformation = np.asarray(self.key_deformation, dtype=np.float64).copy()
        self.key_sensor.setflags(write=False)
        self.key_deformation.setflags(write=False)


class JacobianStore:
    """Append-only record set with brute-force nearest-neighbor retrieval."""

    def __init__(self):
        self.records: list[JacobianRecord] = []

    def __len__(self) -> int:
        return len(self.records)

    def insert(self, key_sensor, key_deformation,
               jacobian: DeformationJacobian) -> int:
        if self.records:
            first = self.records[0]
            if (len(key_sensor) != len(first.key_sensor)
                    or len(key_deformation) != len(first.key_deformation)):
                raise ValueError("record key dimensions differ from the store")
        rid = len(self.records)
        self.records.append(JacobianRecord(rid, key_sensor, key_deformation, jacobian))
        return rid

    def nearest(self, s, ds) -> JacobianRecord:
        """Record minimizing Euclidean distance on the stacked (s, ds) key.

        Ties break toward the lowest id.
        """
        if not self.records:
            raise EmptyStore("nearest-neighbor query on an empty store")
        s = np.asarray(getattr(s, "values", s), dtype=np.float64)
        ds = np.asarray(getattr(ds, "values", ds), dtype=np.float64)
        query = np.concatenate([s, ds])
        best, best_d = None, np.inf
        for rec in self.records:  # id order, strict < keeps the lowest id on ties
            key = np.concatenate([rec.key_sensor, rec.key_deformation])
            d = float(np.linalg.norm(query - key))
            if d < best_d:
                best, best_d = rec, d
        return best

    def copy(self) -> "JacobianStore":
        out = JacobianStore()
        for rec in self.records:
            out.insert(rec.key_sensor, rec.key_deformation, rec.jacobian)
        return out

    # -- persistence -----------------------------------------------------------

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        if self.records:
            n_s = len(self.records[0].key_sensor)
            n_d = len(self.records[0].key_deformation)
        else:
            n_s = n_d = 0
        with open(directory / "manifest.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["id"] + [f"s_{i}" for i in range(n_s)]
                       + [f"ds_{i}" for i in range(n_d)] + ["use_count"])
            for rec in self.records:
                w.writerow([rec.record_id]
                           + [f"{v:.17g}" for v in rec.key_sensor]
                           + [f"{v:.17g}" for v in rec.key_deformation]
                           + [rec.use_count])
        for rec in self.records:
            rec.jacobian.save_csv(directory / f"jacobian_{rec.record_id:03d}.csv")

    @classmethod
    def load(cls, directory) -> "JacobianStore":
        directory = Path(directory)
        store = cls()
        with open(directory / "manifest.csv", newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            n_s = sum(1 for h in header if h.startswith("s_"))
            n_d = sum(1 for h in header if h.startswith("ds_"))
            for row in reader:
                if not row:
                    continue
                rid = int(row[0])
                key_s = np.array([float(v) for v in row[1:1 + n_s]])
                key_d = np.array([float(v) for v in row[1 + n_s:1 + n_s + n_d]])
                jac = DeformationJacobian.load_csv(
                    directory / f"jacobian_{rid:03d}.csv")
                got = store.insert(key_s, key_d, jac)
                if got != rid:
                    raise ValueError(f"store manifest ids are not contiguous at {rid}")
                store.records[rid].use_count = int(row[1 + n_s + n_d])
        return store


@dataclass
class FunnelPolicy:
    max_distinct_jacobians: int = 5
    stall_ticks: int = 3
    success_threshold: float | None = None   # None: use the target's threshold
    tick_budget: int = 200
    progress_epsilon: float = 1e-4
    pace_seconds: float = 0.0

    def threshold_for(self, target: ControlTarget) -> float:
        return (target.success_threshold if self.success_threshold is None
                else self.success_threshold)


@dataclass
class FunnelOutcome:
    success: bool
    ticks: int
    probes: int
    distinct_jacobians_used: int
    final_error_norm: float
    initial_error_norm: float
    reason: str
    trace: list[dict] = field(default_factory=list)


def write_funnel_trace(path, trace: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["tick", "kind", "cost", "err_norm", "alpha",
                    "jacobian_id", "improved"])
        for row in trace:
            w.writerow([row["tick"], row["kind"],
                        f"{row['cost']:.12g}" if row["cost"] is not None else "",
                        f"{row['err_norm']:.12g}" if row["err_norm"] is not None else "",
                        f"{row['alpha']:.12g}" if row["alpha"] is not None else "",
                        row["jacobian_id"],
                        "" if row["improved"] is None else int(row["improved"])])


def run_funnel(plant, target: ControlTarget, store: JacobianStore,
               policy: FunnelPolicy | None = None,
               probe: ProbeConfig | None = None) -> FunnelOutcome:
    """Drive the plant's deformation to the target, reusing stored Jacobians.

    Reuse policy: keep applying the working Jacobian while the cost improves;
    after `stall_ticks` non-improving ticks probe a fresh one at the current
    state and add it to the store. Success is an error norm at or below the
    threshold; failure is declared when a fresh Jacobian would exceed the
    distinct-Jacobian cap or the tick budget runs out. Failure is an outcome,
    not an exception.
    """
    policy = policy or FunnelPolicy()
    probe = probe or ProbeConfig()
    trace: list[dict] = []

    if policy.max_distinct_jacobians < 1 and len(store) == 0:
        return FunnelOutcome(False, 0, 0, 0, np.nan, np.nan,
                             "distinct-Jacobian cap forbids any probe", trace)

    threshold = policy.threshold_for(target)
    ds = plant.deformation()
    e = control_error(ds, target)
    c = cost(e)
    e0 = float(np.linalg.norm(e))
    trace.append({"tick": 0, "kind": "start", "cost": c, "err_norm": e0,
                  "alpha": None, "jacobian_id": "", "improved": None})
    if e0 <= threshold:
        return FunnelOutcome(True, 0, 0, 0, e0, e0, "already at target", trace)

    def acquire(tick: int) -> JacobianRecord:
        jac = probe_jacobian(plant, probe, target)
        rid = store.insert(jac.acquired_sensor, jac.acquired_deformation, jac)
        trace.append({"tick": tick, "kind": "probe", "cost": None,
                      "err_norm": None, "alpha": None, "jacobian_id": rid,
                      "improved": None})
        return store.records[rid]

    probes = 0
    distinct: list[int] = []
    if len(store) == 0:
        record = acquire(0)
        probes += 1
    else:
        s_now = plant.sensors()
        record = store.nearest(s_now, ds)
    distinct.append(record.record_id)

    stall = 0
    ticks = 0
    err_norm = e0
    while ticks < policy.tick_budget:
        result = control_tick(plant, target, record.jacobian, c,
                              policy.progress_epsilon)
        ticks += 1
        record.use_count += 1
        err_norm = float(np.linalg.norm(result.error))
        trace.append({"tick": ticks, "kind": "tick", "cost": result.cost,
                      "err_norm": err_norm, "alpha": result.alpha,
                      "jacobian_id": record.record_id,
                      "improved": result.improved})
        if policy.pace_seconds > 0:
            time.sleep(policy.pace_seconds)
        if err_norm <= threshold:
            return FunnelOutcome(True, ticks, probes, len(distinct), err_norm,
                                 e0, "reached target", trace)
        if result.improved:
            stall = 0
            record.last_improved_tick = ticks
        else:
            stall += 1
        c = result.cost
        if stall >= policy.stall_ticks:
            if len(distinct) + 1 > policy.max_distinct_jacobians:
                return FunnelOutcome(False, ticks, probes, len(distinct),
                                     err_norm, e0,
                                     "distinct-Jacobian cap reached", trace)
            record = acquire(ticks)
            probes += 1
            distinct.append(record.record_id)
            stall = 0
            ds = plant.deformation()
            c = cost(control_error(ds, target))
    return FunnelOutcome(False, ticks, probes, len(distinct), err_norm, e0,
                         "tick budget exhausted", trace)
