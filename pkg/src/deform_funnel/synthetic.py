"""Synthetic plants implementing the controller protocol.

Useful as oracles: an affine sensor map makes the three-sample probe exact,
so probed Jacobians, gradient identities, and funnel convergence can be
checked against closed forms.
"""

from __future__ import annotations

import numpy as np

from .sensing import ActuationVector, DeformationState, SensorVector


class AffinePlant:
    """Instant-settling plant with sensors s = M a + b.

    An optional free-motion block F (with offset c) defines the deformation
    s - (F a + c), mirroring how a learned free-motion model enters the
    deformation of a real plant.
    """

    def __init__(self, matrix: np.ndarray, offset: np.ndarray | None = None,
                 free_block: np.ndarray | None = None,
                 free_offset: np.ndarray | None = None,
                 bounds: tuple[float, float] = (-10.0, 10.0),
                 labels: tuple[str, ...] | None = None,
                 sensor_labels: tuple[str, ...] | None = None,
                 initial: np.ndarray | None = None):
        self.matrix = np.asarray(matrix, dtype=np.float64)
        n, m = self.matrix.shape
        self.offset = np.zeros(n) if offset is None else np.asarray(offset, float)
        self.free_block = (np.zeros((n, m)) if free_block is None
                           else np.asarray(free_block, float))
        self.free_offset = (np.zeros(n) if free_offset is None
                            else np.asarray(free_offset, float))
        act_labels = labels or tuple(f"a{i}" for i in range(m))
        self.sensor_label_tuple = sensor_labels or tuple(f"s{i}" for i in range(n))
        lo, hi = bounds
        values = np.zeros(m) if initial is None else np.asarray(initial, float)
        self._act = ActuationVector(values, np.full(m, lo), np.full(m, hi),
                                    tuple(act_labels))
        self.apply_count = 0

    def actuation(self) -> ActuationVector:
        return self._act

    def apply(self, values: np.ndarray) -> None:
        self._act = self._act.updated(np.asarray(values, dtype=np.float64))
        self.apply_count += 1

    def sensors(self) -> SensorVector:
        vals = self.matrix @ self._act.values + self.offset
        return SensorVector(vals, self.sensor_label_tuple)

    def deformation(self) -> DeformationState:
        s = self.sensors()
        pred = self.free_block @ self._act.values + self.free_offset
        return DeformationState(s.values - pred, s.labels)

    def free_motion_jacobian_full(self) -> np.ndarray:
        return self.free_block.copy()

    def deformation_matrix(self) -> np.ndarray:
        """The exact actuation-to-deformation Jacobian, M - F."""
        return self.matrix - self.free_block


class CallablePlant:
    """Instant-settling plant with sensors given by an arbitrary function."""

    def __init__(self, fn, m: int, n: int,
                 bounds: tuple[float, float] = (-10.0, 10.0),
                 initial: np.ndarray | None = None):
        self.fn = fn
        values = np.zeros(m) if initial is None else np.asarray(initial, float)
        lo, hi = bounds
        self._act = ActuationVector(values, np.full(m, lo), np.full(m, hi),
                                    tuple(f"a{i}" for i in range(m)))
        self._labels = tuple(f"s{i}" for i in range(n))

    def actuation(self) -> ActuationVector:
        return self._act

    def apply(self, values: np.ndarray) -> None:
        self._act = self._act.updated(np.asarray(values, dtype=np.float64))

    def sensors(self) -> SensorVector:
        return SensorVector(np.atleast_1d(np.asarray(
            self.fn(self._act.values), dtype=np.float64)), self._labels)

    def deformation(self) -> DeformationState:
        s = self.sensors()
        return DeformationState(s.values.copy(), s.labels)

    def free_motion_jacobian_full(self) -> np.ndarray:
        return np.zeros((len(self._labels), len(self._act)))
