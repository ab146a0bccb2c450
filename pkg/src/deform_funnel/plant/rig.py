"""Controller-facing plant: normalized sensors, deformation, free-motion blocks.

A SensorizedPlant bundles the physics plant with a normalization table and
one free-motion model per actuator group. Groups follow the sensing
hardware: a finger's scaffold joints (bend-sensed) form one group, its
compartments (strain-sensed) another, so every sensor channel depends on
exactly one group's actuation in free motion.

The rig is the plant protocol the Jacobian controller expects:

    actuation() -> ActuationVector          current values, bounds, disabled mask
    apply(values)                           clamp, settle, update state
    sensors() -> SensorVector               normalized absolute readings
    deformation() -> DeformationState       sensors minus free-motion prediction
    free_motion_jacobian_full() -> ndarray  block-diagonal model derivative
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass

import numpy as np

from ..errors import AllDisabled, ChannelMismatch
from ..freemotion import FitConfig, FreeMotionModel, fit_free_motion_model
from ..sensing import (
    ActuationVector,
    DeformationState,
    NormalizationTable,
    SensorVector,
    calibrate_normalization,
)
from .config import PlantConfig
from .core import Plant
from .mechanics import Wrench


@dataclass(frozen=True)
class ModelGroup:
    """One free-motion model unit: an actuator set and the sensors it drives."""

    name: str
    act_labels: tuple[str, ...]
    sensor_labels: tuple[str, ...]


def model_groups(config: PlantConfig) -> list[ModelGroup]:
    layout = config.sensor_layout()
    groups = []
    for f in config.fingers:
        bend_sensors = tuple(
            lab for lab in layout.labels
            if lab.startswith(f.name + "/b"))
        strain_sensors = tuple(
            lab for lab in layout.labels
            if lab.startswith(f.name + "/s"))
        scaffold_acts = tuple(f"{f.name}/sj{i}" for i in range(len(f.scaffold)))
        comp_acts = tuple(f"{f.name}/c{i}" for i in range(len(f.compartments)))
        if bend_sensors:
            if not scaffold_acts:
                raise ChannelMismatch(
                    f"finger {f.name!r} has bend sensors but no scaffold joints")
            groups.append(ModelGroup(f"{f.name}:bend", scaffold_acts, bend_sensors))
        if strain_sensors:
            if not comp_acts:
                raise ChannelMismatch(
                    f"finger {f.name!r} has strain sensors but no compartments")
            groups.append(ModelGroup(f"{f.name}:strain", comp_acts, strain_sensors))
    return groups


class SensorizedPlant:
    def __init__(self, plant: Plant, models: dict[str, FreeMotionModel],
                 table: NormalizationTable):
        self.plant = plant
        self.models = models
        self.table = table
        self.sensor_labels = tuple(plant.layout.labels)
        if tuple(table.labels) != self.sensor_labels:
            raise ChannelMismatch("normalization table does not match sensor layout")
        labels = plant.act_labels
        lo, hi = plant.config.actuation_bounds
        lower = np.full(len(labels), lo)
        upper = np.full(len(labels), hi)
        if plant.config.carrier.enabled:
            clo, chi = plant.config.carrier.bounds
            for i, lab in enumerate(labels):
                if lab.startswith("carrier/"):
                    lower[i], upper[i] = clo, chi
        self._act = ActuationVector(plant.state.actuation, lower, upper, labels)
        self.groups = model_groups(plant.config)
        self._group_sidx: dict[str, np.ndarray] = {}
        self._group_aidx: dict[str, np.ndarray] = {}
        for grp in self.groups:
            if grp.name not in models:
                raise ChannelMismatch(f"no free-motion model for group {grp.name!r}")
            m = models[grp.name]
            if m.n_inputs != len(grp.act_labels) or m.n_outputs != len(grp.sensor_labels):
                raise ChannelMismatch(f"model shape mismatch for group {grp.name!r}")
            self._group_sidx[grp.name] = np.array(
                [self.sensor_labels.index(lab) for lab in grp.sensor_labels],
                dtype=np.intp)
            self._group_aidx[grp.name] = np.array(
                [labels.index(lab) for lab in grp.act_labels], dtype=np.intp)

    # -- controller protocol -----------------------------------------------------

    def actuation(self) -> ActuationVector:
        return self._act

    def apply(self, values: np.ndarray) -> None:
        """Clamp to bounds (disabled channels stay put) and settle."""
        self._act = self._act.updated(np.asarray(values, dtype=np.float64))
        self.plant.step_to_equilibrium(self._act.values)

    def sensors(self) -> SensorVector:
        raw = self.plant.read_raw()
        return SensorVector(self.table.normalize(raw), self.sensor_labels)

    def raw_sensors(self) -> np.ndarray:
        return self.plant.read_raw()

    def free_motion_prediction(self, act_values: np.ndarray | None = None) -> np.ndarray:
        a = self._act.values if act_values is None else np.asarray(act_values)
        pred = np.zeros(len(self.sensor_labels))
        for name, sidx in self._group_sidx.items():
            pred[sidx] = self.models[name].predict(a[self._group_aidx[name]])
        return pred

    def deformation(self) -> DeformationState:
        s = self.sensors()
        return DeformationState(s.values - self.free_motion_prediction(), s.labels)

    def free_motion_jacobian_full(self) -> np.ndarray:
        """Block-diagonal d f_free / d a over all channels; zero cross blocks."""
        jac = np.zeros((len(self.sensor_labels), len(self._act)))
        for name, sidx in self._group_sidx.items():
            aidx = self._group_aidx[name]
            block = self.models[name].input_jacobian(self._act.values[aidx])
            jac[np.ix_(sidx, aidx)] = block
        return jac

    # -- plant passthroughs --------------------------------------------------------

    def settle(self, external: Wrench | np.ndarray | None = None) -> None:
        self.plant.step_to_equilibrium(self._act.values, external=external)

    def apply_demonstration_wrench(self, wrenches) -> list[tuple[SensorVector, DeformationState]]:
        """One equilibrium per wrench sample with actuation frozen throughout."""
        out = []
        for w in wrenches:
            self.plant.step_to_equilibrium(self._act.values, external=w)
            s = self.sensors()
            out.append((s, DeformationState(s.values - self.free_motion_prediction(),
                                            s.labels)))
        return out

    def set_disabled(self, labels) -> None:
        """Freeze channels at their current values."""
        act = self._act.with_disabled(labels)
        if act.disabled.all():
            raise AllDisabled("every actuation channel is disabled")
        self._act = act

    def set_gravity(self, angle: float, magnitude: float | None = None) -> None:
        self.plant.set_gravity(angle, magnitude)

    def object_pose(self) -> np.ndarray | None:
        return self.plant.object_pose()

    def total_contact_force(self) -> np.ndarray:
        return self.plant.total_contact_force()


# -- calibration ------------------------------------------------------------------


def _grid_points(dims: int, points_small: int, points_large: int) -> int:
    if dims == 1:
        return 25
    return points_small if dims == 2 else points_large


def free_motion_sweep(config: PlantConfig, points_small: int = 5,
                      points_large: int = 5) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Contact-free actuation sweep, one grid per actuator group.

    Returns per-group (local actuation grid, raw sensor rows over ALL
    channels). One-channel groups get a 25-point line so every fit sees at
    least 25 samples.
    """
    free_cfg = config.without_object()
    plant = Plant(free_cfg)
    labels = plant.act_labels
    lo, hi = config.actuation_bounds
    base_act = plant.state.actuation.copy()
    out = {}
    for grp in model_groups(config):
        aidx = [labels.index(lab) for lab in grp.act_labels]
        pts = _grid_points(len(aidx), points_small, points_large)
        axes = [np.linspace(lo, hi, pts)] * len(aidx)
        grid = np.array(list(itertools.product(*axes)))
        rows = []
        for sample in grid:
            act = base_act.copy()
            act[aidx] = sample
            plant.step_to_equilibrium(act)
            rows.append(plant.read_raw())
        out[grp.name] = (grid, np.array(rows))
    return out


def calibrate_rig(config: PlantConfig, fit_config: FitConfig | None = None,
                  seed: int = 0, points_small: int = 5, points_large: int = 5):
    """Run the free-motion calibration for a scene.

    Returns (models, table, sweep) where sweep holds the raw per-group grids
    for report output. Model fits are seeded per group for reproducibility.
    """
    sweep = free_motion_sweep(config, points_small, points_large)
    all_rows = np.vstack([rows for _, rows in sweep.values()])
    layout_labels = config.sensor_layout().labels
    table = calibrate_normalization(all_rows, labels=layout_labels)
    models = {}
    base = fit_config or FitConfig()
    for idx, grp in enumerate(model_groups(config)):
        grid, rows = sweep[grp.name]
        sidx = [layout_labels.index(lab) for lab in grp.sensor_labels]
        targets = table.normalize(rows)[:, sidx]
        cfg = FitConfig(target_rmse=base.target_rmse, max_iters=base.max_iters,
                        refine_iters=base.refine_iters,
                        learning_rate=base.learning_rate, momentum=base.momentum,
                        seed=seed + 101 * idx, restarts=base.restarts,
                        min_samples=base.min_samples)
        models[grp.name] = fit_free_motion_model(
            grid, targets, cfg,
            input_labels=grp.act_labels, output_labels=grp.sensor_labels)
    return models, table, sweep


def build_rig(config: PlantConfig, models, table) -> SensorizedPlant:
    return SensorizedPlant(Plant(config), models, table)


# -- trace output -------------------------------------------------------------------


class TraceWriter:
    """Per-tick plant trace CSV (documented schema, see README)."""

    def __init__(self, path, rig: SensorizedPlant):
        self.rig = rig
        self._fh = open(path, "w", newline="", encoding="utf-8")
        self._w = csv.writer(self._fh)
        act = [f"a:{lab}" for lab in rig.actuation().labels]
        raw = [f"raw:{lab}" for lab in rig.sensor_labels]
        norm = [f"s:{lab}" for lab in rig.sensor_labels]
        def_ = [f"ds:{lab}" for lab in rig.sensor_labels]
        self._w.writerow(["tick"] + act + raw + norm + def_
                         + ["obj_x", "obj_y", "obj_theta", "force_x", "force_y"])

    def write(self, tick: int) -> None:
        rig = self.rig
        raw = rig.raw_sensors()
        s = rig.table.normalize(raw)
        ds = s - rig.free_motion_prediction()
        pose = rig.object_pose()
        pose = [np.nan, np.nan, np.nan] if pose is None else list(pose)
        force = rig.total_contact_force()
        row = ([tick] + [f"{v:.12g}" for v in rig.actuation().values]
               + [f"{v:.12g}" for v in raw] + [f"{v:.12g}" for v in s]
               + [f"{v:.12g}" for v in ds] + [f"{v:.12g}" for v in pose]
               + [f"{v:.12g}" for v in force])
        self._w.writerow(row)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
