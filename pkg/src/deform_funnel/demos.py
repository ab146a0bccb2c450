"""Demonstrations, skill extraction, and skill sequencing.

A demonstration is a wrench trajectory applied to the held object while the
actuation stays frozen; the deformation trace is recorded and the control
target is the final time step restricted to chosen channels. A skill bundles
that target with the controlled actuation channels, a success threshold, and
its own Jacobian store.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .control import ControlTarget, ProbeConfig
from .errors import ConfigError, EmptyDemonstration, InvalidChannels
from .plant.mechanics import Wrench
from .sensing import DeformationState, SensorVector
from .store import FunnelPolicy, JacobianStore, run_funnel


@dataclass
class DemoTick:
    time: float
    sensor: SensorVector
    deformation: DeformationState
    object_pose: np.ndarray | None   # ground truth, diagnostics only


@dataclass
class DemonstrationTrajectory:
    ticks: list[DemoTick]
    actuation_values: np.ndarray

    def __post_init__(self):
        times = [t.time for t in self.ticks]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("demonstration time stamps must strictly increase")

    def final_deformation(self) -> DeformationState:
        return self.ticks[-1].deformation

    def save(self, path) -> None:
        """Persist as a trace CSV: time, sensors, deformation, pose."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            labels = self.ticks[0].sensor.labels
            w.writerow(["time"] + [f"s:{lab}" for lab in labels]
                       + [f"ds:{lab}" for lab in labels]
                       + ["obj_x", "obj_y", "obj_theta"])
            for t in self.ticks:
                pose = ([np.nan] * 3 if t.object_pose is None
                        else list(t.object_pose))
                w.writerow([f"{t.time:.12g}"]
                           + [f"{v:.12g}" for v in t.sensor.values]
                           + [f"{v:.12g}" for v in t.deformation.values]
                           + [f"{v:.12g}" for v in pose])


def read_wrench_trajectory(path) -> list[tuple[float, Wrench]]:
    """Wrench trajectory CSV with header t, fx, fy, torque."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyDemonstration(f"wrench trajectory {path} is empty")
        expected = ["t", "fx", "fy", "torque"]
        if [h.strip() for h in header] != expected:
            raise ConfigError(f"wrench trajectory header must be {expected}")
        for row in reader:
            if not row:
                continue
            t, fx, fy, tau = (float(v) for v in row)
            out.append((t, Wrench(fx, fy, tau)))
    if not out:
        raise EmptyDemonstration(f"wrench trajectory {path} has no samples")
    return out


def write_wrench_trajectory(path, samples: list[tuple[float, Wrench]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "fx", "fy", "torque"])
        for t, wr in samples:
            w.writerow([f"{t:.12g}", f"{wr.fx:.12g}", f"{wr.fy:.12g}",
                        f"{wr.torque:.12g}"])


def record_demonstration(rig, wrench_trajectory_file,
                         release: bool = True) -> DemonstrationTrajectory:
    """Replay a wrench trajectory with frozen actuation and record the response.

    One equilibrium per sample. When `release` is set the wrench is removed
    afterwards and the plant settles once more, like an operator letting go.
    """
    samples = read_wrench_trajectory(wrench_trajectory_file)
    frozen = rig.actuation().values.copy()
    ticks = []
    for t, wrench in samples:
        pairs = rig.apply_demonstration_wrench([wrench])
        s, ds = pairs[0]
        pose = rig.object_pose()
        ticks.append(DemoTick(t, s, ds, None if pose is None else pose.copy()))
        if not np.array_equal(rig.actuation().values, frozen):
            raise RuntimeError("actuation drifted during a demonstration")
    if release:
        rig.settle(external=None)
    return DemonstrationTrajectory(ticks, frozen)


def extract_target(demo: DemonstrationTrajectory, rows) -> np.ndarray:
    """Target values: the demonstrated deformation's last time step on `rows`."""
    if not demo.ticks:
        raise EmptyDemonstration("demonstration has no ticks")
    return demo.final_deformation().select(tuple(rows))


@dataclass
class SkillSpec:
    name: str
    mode: str = "feedback"                     # 'feedback' or 'open_loop'
    target_rows: tuple[str, ...] = ()
    target_values: tuple[float, ...] = ()
    controlled_cols: tuple[str, ...] = ()
    success_threshold: float | None = None     # None: 25% of the start error
    relative_threshold: float = 0.25
    store_ref: str | None = None
    actuation_delta: dict[str, float] = field(default_factory=dict)
    open_loop_steps: int = 5

    def validate(self, sensor_labels, act_labels) -> None:
        if self.mode not in ("feedback", "open_loop"):
            raise ConfigError(f"unknown skill mode {self.mode!r}")
        if self.mode == "feedback":
            if not self.target_rows:
                raise InvalidChannels(f"skill {self.name!r} selects no target rows")
            if not self.controlled_cols:
                raise InvalidChannels(f"skill {self.name!r} controls no channels")
            bad = [r for r in self.target_rows if r not in sensor_labels]
            if bad:
                raise InvalidChannels(f"skill {self.name!r}: unknown rows {bad}")
            bad = [c for c in self.controlled_cols if c not in act_labels]
            if bad:
                raise InvalidChannels(f"skill {self.name!r}: unknown columns {bad}")
            if len(self.target_values) != len(self.target_rows):
                raise InvalidChannels(
                    f"skill {self.name!r}: {len(self.target_values)} values for "
                    f"{len(self.target_rows)} rows")
        else:
            bad = [c for c in self.actuation_delta if c not in act_labels]
            if bad:
                raise InvalidChannels(f"skill {self.name!r}: unknown columns {bad}")

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "name": self.name,
            "mode": self.mode,
            "target_rows": list(self.target_rows),
            "target_values": [float(v) for v in self.target_values],
            "controlled_cols": list(self.controlled_cols),
            "success_threshold": self.success_threshold,
            "relative_threshold": self.relative_threshold,
            "store_ref": self.store_ref,
            "actuation_delta": dict(self.actuation_delta),
            "open_loop_steps": self.open_loop_steps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SkillSpec":
        if d.get("version") != 1:
            raise ConfigError(f"unsupported skill file version {d.get('version')!r}")
        return cls(
            name=d["name"], mode=d.get("mode", "feedback"),
            target_rows=tuple(d.get("target_rows", ())),
            target_values=tuple(d.get("target_values", ())),
            controlled_cols=tuple(d.get("controlled_cols", ())),
            success_threshold=d.get("success_threshold"),
            relative_threshold=float(d.get("relative_threshold", 0.25)),
            store_ref=d.get("store_ref"),
            actuation_delta=dict(d.get("actuation_delta", {})),
            open_loop_steps=int(d.get("open_loop_steps", 5)),
        )

    def save(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False),
                              encoding="utf-8")

    @classmethod
    def load(cls, path) -> "SkillSpec":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except FileNotFoundError as exc:
            raise ConfigError(f"skill file not found: {path}") from exc
        return cls.from_dict(yaml.safe_load(text))


def build_skill(name: str, demo: DemonstrationTrajectory, rows, cols,
                threshold: float | None = None,
                sensor_labels=None, act_labels=None) -> SkillSpec:
    """Package a demonstrated target into a SkillSpec.

    Reachability of the target is deliberately not checked; only channel
    validity is.
    """
    values = extract_target(demo, rows)
    spec = SkillSpec(name=name, mode="feedback", target_rows=tuple(rows),
                     target_values=tuple(float(v) for v in values),
                     controlled_cols=tuple(cols), success_threshold=threshold)
    if sensor_labels is not None and act_labels is not None:
        spec.validate(sensor_labels, act_labels)
    return spec


def make_target(skill: SkillSpec, rig, enabled_only: bool = True) -> ControlTarget:
    """Instantiate the skill's control target against the live plant.

    A relative threshold resolves against the error at the current state.
    Disabled actuation channels are dropped from the controlled columns.
    """
    cols = skill.controlled_cols
    if enabled_only:
        act = rig.actuation()
        cols = tuple(c for c in cols if not act.disabled[act.index_of(c)])
    if not cols:
        from .errors import AllDisabled

        raise AllDisabled(f"skill {skill.name!r} has no enabled controlled channels")
    values = np.array(skill.target_values, dtype=np.float64)
    if skill.success_threshold is not None:
        thr = skill.success_threshold
    else:
        ds = rig.deformation()
        e0 = float(np.linalg.norm(ds.select(skill.target_rows) - values))
        thr = skill.relative_threshold * e0
    return ControlTarget(values, skill.target_rows, cols, thr)


@dataclass
class SkillOutcome:
    name: str
    mode: str
    success: bool
    ticks: int
    probes: int
    distinct_jacobians: int
    final_error_norm: float
    reason: str


@dataclass
class SequenceOutcome:
    success: bool
    stages: list[SkillOutcome]


def run_open_loop(rig, skill: SkillSpec) -> SkillOutcome:
    """Apply the skill's fixed actuation delta in a short ramp."""
    act = rig.actuation()
    values = act.values.copy()
    for lab, delta in skill.actuation_delta.items():
        values[act.index_of(lab)] += delta
    steps = max(1, skill.open_loop_steps)
    start = act.values.copy()
    for i in range(1, steps + 1):
        rig.apply(start + (values - start) * (i / steps))
    return SkillOutcome(skill.name, "open_loop", True, steps, 0, 0, np.nan,
                        "open-loop delta applied")


def run_sequence(rig, skills: list[SkillSpec], stores: dict[str, JacobianStore],
                 policy: FunnelPolicy | None = None,
                 probe: ProbeConfig | None = None) -> SequenceOutcome:
    """Execute skills in order; abort at the first failing stage.

    Each feedback skill runs its funnel against its own store only.
    """
    stages: list[SkillOutcome] = []
    for skill in skills:
        if skill.mode == "open_loop":
            stages.append(run_open_loop(rig, skill))
            continue
        target = make_target(skill, rig)
        store = stores.setdefault(skill.name, JacobianStore())
        outcome = run_funnel(rig, target, store, policy, probe)
        stages.append(SkillOutcome(
            skill.name, "feedback", outcome.success, outcome.ticks,
            outcome.probes, outcome.distinct_jacobians_used,
            outcome.final_error_norm, outcome.reason))
        if not outcome.success:
            return SequenceOutcome(False, stages)
    return SequenceOutcome(True, stages)
