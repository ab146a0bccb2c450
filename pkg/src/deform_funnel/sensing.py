"""Sensor and actuation value types, normalization, deformation state.

All controller-facing quantities live in normalized sensor space: a
calibration sweep defines per-channel [min, max] which maps to [0, 1].
Contact loading may push normalized readings outside that range; that is
expected and not clamped.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ChannelMismatch, DegenerateChannel


def _as_f64(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float64)


@dataclass(frozen=True)
class SensorVector:
    """Normalized sensor readings plus their channel labels."""

    values: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", _as_f64(self.values))
        if self.values.shape != (len(self.labels),):
            raise ChannelMismatch(
                f"{self.values.shape[0]} values for {len(self.labels)} labels"
            )

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class DeformationState:
    """Sensor reading minus the free-motion prediction, channel by channel."""

    values: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", _as_f64(self.values))
        if self.values.shape != (len(self.labels),):
            raise ChannelMismatch(
                f"{self.values.shape[0]} values for {len(self.labels)} labels"
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def select(self, labels: tuple[str, ...] | list[str]) -> np.ndarray:
        index = {lab: i for i, lab in enumerate(self.labels)}
        try:
            idx = [index[lab] for lab in labels]
        except KeyError as exc:
            raise ChannelMismatch(f"unknown deformation channel {exc}") from exc
        return self.values[idx]


@dataclass(frozen=True)
class ActuationVector:
    """Per-channel actuation values with bounds and a disabled mask.

    Disabled channels are frozen: `updated` never moves them, whatever the
    requested values say. Enabled values are clamped to their bounds.
    """

    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    labels: tuple[str, ...]
    disabled: np.ndarray = field(default=None)  # bool mask

    def __post_init__(self):
        object.__setattr__(self, "values", _as_f64(self.values))
        object.__setattr__(self, "lower", _as_f64(self.lower))
        object.__setattr__(self, "upper", _as_f64(self.upper))
        if self.disabled is None:
            object.__setattr__(self, "disabled", np.zeros(len(self.labels), dtype=bool))
        else:
            object.__setattr__(self, "disabled", np.asarray(self.disabled, dtype=bool))
        m = len(self.labels)
        for name in ("values", "lower", "upper", "disabled"):
            if getattr(self, name).shape != (m,):
                raise ChannelMismatch(f"{name} has wrong length for {m} channels")
        if np.any(self.upper <= self.lower):
            raise ValueError("actuation bounds require upper > lower on every channel")
        enabled = ~self.disabled
        if np.any(self.values[enabled] < self.lower[enabled] - 1e-12) or np.any(
            self.values[enabled] > self.upper[enabled] + 1e-12
        ):
            raise ValueError("enabled actuation value outside its bounds")

    def __len__(self) -> int:
        return len(self.labels)

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError as exc:
            raise ChannelMismatch(f"unknown actuation channel {label!r}") from exc

    def updated(self, new_values: np.ndarray) -> "ActuationVector":
        """Return a copy with enabled channels set to clamp(new_values)."""
        new_values = _as_f64(new_values)
        out = self.values.copy()
        enabled = ~self.disabled
        out[enabled] = np.clip(new_values[enabled], self.lower[enabled], self.upper[enabled])
        return ActuationVector(out, self.lower, self.upper, self.labels, self.disabled)

    def with_disabled(self, labels) -> "ActuationVector":
        mask = self.disabled.copy()
        for lab in labels:
            mask[self.index_of(lab)] = True
        return ActuationVector(self.values, self.lower, self.upper, self.labels, mask)

    def enabled_labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, d in zip(self.labels, self.disabled) if not d)


@dataclass(frozen=True)
class NormalizationTable:
    """Per-channel linear map from raw readings to [0, 1]."""

    lo: np.ndarray
    hi: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", _as_f64(self.lo))
        object.__setattr__(self, "hi", _as_f64(self.hi))
        if np.any(self.hi <= self.lo):
            raise DegenerateChannel("normalization requires max > min on every channel")

    def normalize(self, raw: np.ndarray) -> np.ndarray:
        return (np.asarray(raw, dtype=np.float64) - self.lo) / (self.hi - self.lo)

    def denormalize(self, normed: np.ndarray) -> np.ndarray:
        return np.asarray(normed, dtype=np.float64) * (self.hi - self.lo) + self.lo

    def slice(self, idx) -> "NormalizationTable":
        labs = tuple(self.labels[i] for i in idx)
        return NormalizationTable(self.lo[idx], self.hi[idx], labs)


def calibrate_normalization(samples, labels=None) -> NormalizationTable:
    """Build a NormalizationTable from raw calibration samples.

    `samples` is an iterable of raw sensor rows (arrays or SensorVector-like).
    Raises DegenerateChannel when a channel is constant across the sweep.
    """
    rows = []
    for s in samples:
        rows.append(np.asarray(getattr(s, "values", s), dtype=np.float64))
        if labels is None and hasattr(s, "labels"):
            labels = s.labels
    if len(rows) < 2:
        raise ValueError("calibration needs at least 2 samples")
    data = np.stack(rows)
    lo = data.min(axis=0)
    hi = data.max(axis=0)
    if labels is None:
        labels = tuple(f"ch{i}" for i in range(data.shape[1]))
    flat = np.nonzero(hi - lo < 1e-12)[0]
    if flat.size:
        names = ", ".join(labels[i] for i in flat)
        raise DegenerateChannel(f"constant channel(s) in calibration sweep: {names}")
    return NormalizationTable(lo, hi, tuple(labels))


def compute_deformation(s: SensorVector, model, a: np.ndarray) -> DeformationState:
    """Deformation state: measured sensors minus the free-motion prediction.

    `s` must be normalized with the same table the model was fit with; `a`
    is the local actuation vector of the model's actuator group.
    """
    pred = model.predict(np.asarray(a, dtype=np.float64))
    if pred.shape != s.values.shape:
        raise ChannelMismatch(
            f"model predicts {pred.shape[0]} channels, sensor has {s.values.shape[0]}"
        )
    return DeformationState(s.values - pred, s.labels)


def write_sample_csv(path, act_rows: np.ndarray, sensor_rows: np.ndarray) -> None:
    """Calibration sample file: header a_0..a_{m-1}, s_0..s_{n-1}."""
    act_rows = np.atleast_2d(_as_f64(act_rows))
    sensor_rows = np.atleast_2d(_as_f64(sensor_rows))
    if act_rows.shape[0] != sensor_rows.shape[0]:
        raise ValueError("actuation and sensor row counts differ")
    m, n = act_rows.shape[1], sensor_rows.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"a_{i}" for i in range(m)] + [f"s_{i}" for i in range(n)])
        for a, s in zip(act_rows, sensor_rows):
            w.writerow([f"{v:.17g}" for v in a] + [f"{v:.17g}" for v in s])


def read_sample_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a calibration sample file; returns (actuations, sensors)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        m = sum(1 for h in header if h.startswith("a_"))
        n = sum(1 for h in header if h.startswith("s_"))
        if m + n != len(header):
            raise ValueError(f"unexpected sample header in {path}")
        acts, sens = [], []
        for row in reader:
            if not row:
                continue
            vals = [float(v) for v in row]
            acts.append(vals[:m])
            sens.append(vals[m:])
    return np.array(acts, dtype=np.float64), np.array(sens, dtype=np.float64)
