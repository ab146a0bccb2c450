"""Deformation-Jacobian control: probing, error, step size, actuation update.

The controller treats the plant as a black box behind a small protocol
(actuation / apply / sensors / deformation / free_motion_jacobian_full).
A Jacobian column is estimated from a three-sample probe: read s1, apply a
small actuation change and read s2, invert the change and read s3, then

    ds/da ~= (2 s2 - s1 - s3) / (2 da).

For an actuator's own sensor block the free-motion derivative is subtracted,
so the matrix relates actuation changes to deformation changes; cross blocks
carry the raw sensor response.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BoundsHit, ChannelMismatch, InvalidChannels, ProbeDestabilized
from .sensing import ActuationVector, DeformationState


@dataclass
class ProbeConfig:
    delta_a: float = 0.02
    settle: bool = True          # re-settle before reading the baseline
    destabilization_factor: float = 10.0


@dataclass
class ControlTarget:
    """Deformation target on selected channels, driven through selected columns."""

    values: np.ndarray
    rows: tuple[str, ...]            # deformation channels that define the error
    cols: tuple[str, ...]            # actuation channels the controller may move
    success_threshold: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.rows = tuple(self.rows)
        self.cols = tuple(self.cols)
        if self.values.shape != (len(self.rows),):
            raise ChannelMismatch("target values do not match selected rows")
        if not self.rows:
            raise InvalidChannels("a control target needs at least one row")
        if not self.cols:
            raise InvalidChannels("a control target needs at least one column")


@dataclass
class DeformationJacobian:
    """Finite-difference actuation-to-deformation matrix.

    Rows span every tracked deformation channel, columns the probed actuation
    channels. The sensor and deformation state at acquisition time are kept so
    a store can key the matrix by where it was probed.
    """

    matrix: np.ndarray
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    acquired_sensor: np.ndarray
    acquired_deformation: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("Jacobian contains non-finite entries")
        if len(set(self.row_labels)) != len(self.row_labels) or \
                len(set(self.col_labels)) != len(self.col_labels):
            raise ValueError("Jacobian labels must be unique")
        if self.matrix.shape != (len(self.row_labels), len(self.col_labels)):
            raise ChannelMismatch("Jacobian shape does not match labels")

    def submatrix(self, rows: tuple[str, ...]) -> np.ndarray:
        ridx = {lab: i for i, lab in enumerate(self.row_labels)}
        try:
            sel = [ridx[r] for r in rows]
        except KeyError as exc:
            raise ChannelMismatch(f"Jacobian has no row {exc}") from exc
        return self.matrix[sel, :]

    def save_csv(self, path) -> None:
        """Dump with a header of column labels and sidecar acquisition lines."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write("# acquired_sensor," +
                     ",".join(f"{v:.17g}" for v in self.acquired_sensor) + "\n")
            fh.write("# acquired_deformation," +
                     ",".join(f"{v:.17g}" for v in self.acquired_deformation) + "\n")
            w = csv.writer(fh)
            w.writerow(["row"] + list(self.col_labels))
            for lab, row in zip(self.row_labels, self.matrix):
                w.writerow([lab] + [f"{v:.17g}" for v in row])

    @classmethod
    def load_csv(cls, path) -> "DeformationJacobian":
        sensor = deformation = None
        rows, labels = [], []
        with open(path, newline="", encoding="utf-8") as fh:
            header = None
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("# acquired_sensor,"):
                    sensor = np.array([float(v) for v in line.split(",")[1:]])
                    continue
                if line.startswith("# acquired_deformation,"):
                    deformation = np.array([float(v) for v in line.split(",")[1:]])
                    continue
                cells = line.split(",")
                if header is None:
                    header = cells
                    continue
                labels.append(cells[0])
                rows.append([float(v) for v in cells[1:]])
        return cls(np.array(rows), tuple(labels), tuple(header[1:]),
                   sensor, deformation)


@dataclass
class StepResult:
    actuation: ActuationVector
    deformation: DeformationState
    error: np.ndarray
    cost: float
    alpha: float
    improved: bool


def control_error(current: DeformationState, target: ControlTarget) -> np.ndarray:
    """Error vector on the target's selected rows: current minus target."""
    return current.select(target.rows) - target.values


def cost(e: np.ndarray) -> float:
    """Quadratic control cost, half the squared error norm."""
    e = np.asarray(e, dtype=np.float64)
    return 0.5 * float(e @ e)


def adaptive_step_size(jac: np.ndarray, e: np.ndarray,
                       eps_denom: float = 1e-12) -> float:
    """Step size <e, JJt e> / <JJt e, JJt e>; zero when the update is degenerate."""
    jjte = jac @ (jac.T @ e)
    denom = float(jjte @ jjte)
    if denom <= eps_denom:
        return 0.0
    return float(e @ jjte) / denom


def update_actuation(a: ActuationVector, jac: np.ndarray, e: np.ndarray,
                     alpha: float, cols: tuple[str, ...]) -> ActuationVector:
    """Transpose-rule update a - alpha * Jt e on the controlled columns.

    The result is clamped to bounds; disabled channels never move.
    """
    if jac.shape[1] != len(cols):
        raise ChannelMismatch("Jacobian columns do not match controlled channels")
    step = alpha * (jac.T @ e)
    values = a.values.copy()
    for lab, d in zip(cols, step):
        values[a.index_of(lab)] -= d
    return a.updated(values)


def _signed_delta(a: ActuationVector, idx: int, delta: float) -> float:
    """Probe delta that stays inside bounds, flipped once if needed."""
    v = a.values[idx]
    if v + delta <= a.upper[idx] + 1e-12:
        return delta
    if v - delta >= a.lower[idx] - 1e-12:
        return -delta
    raise BoundsHit(
        f"probe delta {delta:g} does not fit inside bounds on {a.labels[idx]!r}"
    )


def probe_jacobian(plant, probe: ProbeConfig, target: ControlTarget) -> DeformationJacobian:
    """Estimate the deformation Jacobian by sequential three-sample probes.

    One controlled column at a time: read s1, step the channel by a small
    delta and settle, read s2, step back and settle, read s3. The actuation
    is restored to its entry value before returning. Raises ProbeDestabilized
    when a round trip more than destabilization_factor-folds the cost, which
    is the slip signature.
    """
    a0 = plant.actuation()
    for lab in target.cols:
        if a0.disabled[a0.index_of(lab)]:
            raise InvalidChannels(f"controlled channel {lab!r} is disabled")
    if probe.settle:
        plant.apply(a0.values)
    s_base = plant.sensors()
    ds_base = plant.deformation()
    free_block = plant.free_motion_jacobian_full()
    row_labels = s_base.labels

    n = len(row_labels)
    raw = np.zeros((n, len(target.cols)))
    col_idx = [a0.index_of(lab) for lab in target.cols]
    for j, idx in enumerate(col_idx):
        s1 = plant.sensors()
        ds1 = plant.deformation()
        cost1 = cost(control_error(ds1, target))
        delta = _signed_delta(a0, idx, probe.delta_a)
        stepped = a0.values.copy()
        stepped[idx] += delta
        plant.apply(stepped)
        s2 = plant.sensors()
        plant.apply(a0.values)
        s3 = plant.sensors()
        raw[:, j] = (2.0 * s2.values - s1.values - s3.values) / (2.0 * delta)
        cost3 = cost(control_error(plant.deformation(), target))
        if cost3 > probe.destabilization_factor * max(cost1, 1e-12):
            raise ProbeDestabilized(
                f"cost grew from {cost1:.3e} to {cost3:.3e} probing "
                f"{target.cols[j]!r}"
            )
    matrix = raw - free_block[:, col_idx]
    return DeformationJacobian(matrix, row_labels, target.cols,
                               s_base.values.copy(), ds_base.values.copy())


def control_tick(plant, target: ControlTarget, jac: DeformationJacobian,
                 prev_cost: float, progress_epsilon: float = 1e-4) -> StepResult:
    """One feedback step: update actuation, settle, re-read deformation."""
    ds = plant.deformation()
    e = control_error(ds, target)
    j_sel = jac.submatrix(target.rows)
    alpha = adaptive_step_size(j_sel, e)
    a_new = update_actuation(plant.actuation(), j_sel, e, alpha, target.cols)
    plant.apply(a_new.values)
    ds_new = plant.deformation()
    e_new = control_error(ds_new, target)
    c_new = cost(e_new)
    return StepResult(
        actuation=plant.actuation(), deformation=ds_new, error=e_new,
        cost=c_new, alpha=alpha,
        improved=bool(c_new < prev_cost - progress_epsilon),
    )


class TickLog:
    """Controller tick log CSV: tick, cost, error norm, alpha, Jacobian id, improved."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="", encoding="utf-8")
        self._w = csv.writer(self._fh)
        self._w.writerow(["tick", "kind", "cost", "err_norm", "alpha",
                          "jacobian_id", "improved"])

    def tick(self, tick, cost_val, err_norm, alpha, jac_id, improved):
        self._w.writerow([tick, "tick", f"{cost_val:.12g}", f"{err_norm:.12g}",
                          f"{alpha:.12g}", jac_id, int(improved)])

    def probe(self, tick, jac_id):
        self._w.writerow([tick, "probe", "", "", "", jac_id, ""])

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
