"""Scene configuration for the 2D quasi-static compliant-hand plant.

A scene is a set of fingers (chains of rigid segments joined by torsional
springs), an optional rigid object, optional static walls, gravity, and an
optional prismatic carrier that translates the whole hand base. Actuation
shifts joint rest angles, so each actuation value defines the unloaded
equilibrium shape regardless of contact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..errors import ConfigError


@dataclass
class ScaffoldJointSpec:
    """A single joint with its own actuation channel (bend-sensed)."""

    length: float
    stiffness: float
    gain: float
    rest_angle: float = 0.0


@dataclass
class CompartmentSpec:
    """A run of identical segments sharing one actuation channel."""

    segments: int
    segment_length: float
    stiffness: float
    joint_gain: float
    rest_angle: float = 0.0


@dataclass
class FingerSpec:
    name: str
    base: tuple[float, float]
    base_angle_deg: float
    scaffold: list[ScaffoldJointSpec] = field(default_factory=list)
    compartments: list[CompartmentSpec] = field(default_factory=list)
    bend_joints: list[int] = field(default_factory=list)
    strain_regions: list[tuple[int, int]] = field(default_factory=list)
    # rest offset per joint is gain * shape(a), shape(a) = (a + c*a^2)/(1 + c)
    actuation_curve: float = 0.25

    @property
    def n_joints(self) -> int:
        return len(self.scaffold) + sum(c.segments for c in self.compartments)

    def validate(self) -> None:
        for comp in self.compartments:
            if comp.segments < 3:
                raise ConfigError(
                    f"finger {self.name!r}: compartments need at least 3 segments"
                )
            if comp.stiffness <= 0:
                raise ConfigError(f"finger {self.name!r}: stiffness must be positive")
        for sj in self.scaffold:
            if sj.stiffness <= 0:
                raise ConfigError(f"finger {self.name!r}: stiffness must be positive")
        nj = self.n_joints
        n_scaffold = len(self.scaffold)
        spans = []
        for lo, hi in self.strain_regions:
            if not (0 <= lo < hi <= nj):
                raise ConfigError(
                    f"finger {self.name!r}: strain region ({lo},{hi}) outside joints 0..{nj}"
                )
            if lo < n_scaffold:
                # strain sensing wraps compartments only; scaffold joints are
                # bend-sensed, which keeps actuator groups separable
                raise ConfigError(
                    f"finger {self.name!r}: strain region ({lo},{hi}) covers scaffold joints"
                )
            spans.append((lo, hi))
        for i, (lo, hi) in enumerate(spans):
            for lo2, hi2 in spans[i + 1:]:
                if lo < hi2 and lo2 < hi:
                    raise ConfigError(
                        f"finger {self.name!r}: strain regions overlap"
                    )
        for j in self.bend_joints:
            if not (0 <= j < len(self.scaffold)):
                raise ConfigError(
                    f"finger {self.name!r}: bend joint {j} is not a scaffold joint"
                )
            for lo, hi in spans:
                if lo <= j < hi:
                    raise ConfigError(
                        f"finger {self.name!r}: bend joint {j} inside a strain region"
                    )


@dataclass
class ObjectSpec:
    shape: str                 # 'circle' or 'square'
    size: float                # radius, or half-width of the square
    corner_radius: float = 0.0
    mass: float = 0.05
    pose: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def validate(self) -> None:
        if self.shape not in ("circle", "square"):
            raise ConfigError(f"unknown object shape {self.shape!r}")
        if self.size <= 0:
            raise ConfigError("object size must be positive")
        if self.shape == "square" and not (0 <= self.corner_radius < self.size):
            raise ConfigError("corner radius must lie in [0, half-width)")


@dataclass
class WallSpec:
    """Static half-plane: free space is normal . p >= offset."""

    normal: tuple[float, float]
    offset: float
    mu: float | None = None


@dataclass
class ContactSpec:
    normal_stiffness: float = 60.0
    tangent_stiffness: float = 40.0
    mu: float = 0.8
    node_radius: float = 0.3
    samples_per_segment: int = 2


@dataclass
class CarrierSpec:
    enabled: bool = False
    axes: tuple[str, ...] = ("y",)
    stiffness: float = 500.0
    gain: float = 1.0
    rest: tuple[float, float] = (0.0, 0.0)
    bounds: tuple[float, float] = (-8.0, 8.0)


@dataclass
class SolverSpec:
    tol: float = 1e-9
    max_iters: int = 400
    friction_passes: int = 12

    def validate(self) -> None:
        if self.tol <= 0:
            raise ConfigError("solver tolerance must be positive")


@dataclass
class PlantConfig:
    fingers: list[FingerSpec]
    object: ObjectSpec | None = None
    walls: list[WallSpec] = field(default_factory=list)
    gravity_magnitude: float = 1.0
    gravity_angle: float = 0.0           # rad; 0 points along -y
    contact: ContactSpec = field(default_factory=ContactSpec)
    carrier: CarrierSpec = field(default_factory=CarrierSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    workspace_radius: float = 30.0
    penetration_cap_frac: float = 0.02
    actuation_bounds: tuple[float, float] = (0.0, 1.0)
    initial_actuation: dict[str, float] = field(default_factory=dict)
    seed: int = 0
    check_tunneling: bool = True

    def validate(self) -> None:
        if not self.fingers:
            raise ConfigError("scene needs at least one finger")
        names = [f.name for f in self.fingers]
        if len(set(names)) != len(names):
            raise ConfigError("finger names must be unique")
        for f in self.fingers:
            f.validate()
        if self.object is not None:
            self.object.validate()
        self.solver.validate()
        if self.contact.normal_stiffness <= 0 or self.contact.tangent_stiffness <= 0:
            raise ConfigError("contact stiffnesses must be positive")
        lo, hi = self.actuation_bounds
        if hi <= lo:
            raise ConfigError("actuation bounds must satisfy max > min")

    def gravity_vector(self) -> np.ndarray:
        g = self.gravity_magnitude
        a = self.gravity_angle
        return np.array([g * math.sin(a), -g * math.cos(a)])

    def without_object(self) -> "PlantConfig":
        import copy

        cfg = copy.deepcopy(self)
        cfg.object = None
        return cfg

    def actuation_labels(self) -> list[str]:
        labels = []
        for f in self.fingers:
            labels += [f"{f.name}/sj{i}" for i in range(len(f.scaffold))]
            labels += [f"{f.name}/c{i}" for i in range(len(f.compartments))]
        if self.carrier.enabled:
            labels += [f"carrier/{ax}" for ax in self.carrier.axes]
        return labels

    def sensor_layout(self) -> "SensorLayout":
        return SensorLayout.from_config(self)


@dataclass(frozen=True)
class SensorLayout:
    """Mapping from plant kinematics to sensor channels.

    Bend channels report the raw angle of a designated scaffold joint; strain
    channels report the summed joint angles over a contiguous region.
    """

    bends: tuple[tuple[str, int], ...]            # (finger, joint index)
    strains: tuple[tuple[str, int, int], ...]     # (finger, lo, hi)
    labels: tuple[str, ...]

    @classmethod
    def from_config(cls, config: PlantConfig) -> "SensorLayout":
        bends, strains, labels = [], [], []
        for f in config.fingers:
            for i, j in enumerate(f.bend_joints):
                bends.append((f.name, j))
                labels.append(f"{f.name}/b{i}")
            for i, (lo, hi) in enumerate(f.strain_regions):
                strains.append((f.name, lo, hi))
                labels.append(f"{f.name}/s{i}")
        return cls(tuple(bends), tuple(strains), tuple(labels))

    def channels_of(self, finger: str) -> list[int]:
        return [i for i, lab in enumerate(self.labels) if lab.startswith(finger + "/")]


# -- YAML scene files ---------------------------------------------------------

def _finger_to_dict(f: FingerSpec) -> dict:
    return {
        "name": f.name,
        "base": list(f.base),
        "base_angle_deg": f.base_angle_deg,
        "scaffold": [
            {"length": s.length, "stiffness": s.stiffness, "gain": s.gain,
             "rest_angle": s.rest_angle}
            for s in f.scaffold
        ],
        "compartments": [
            {"segments": c.segments, "segment_length": c.segment_length,
             "stiffness": c.stiffness, "joint_gain": c.joint_gain,
             "rest_angle": c.rest_angle}
            for c in f.compartments
        ],
        "bend_joints": list(f.bend_joints),
        "strain_regions": [list(r) for r in f.strain_regions],
        "actuation_curve": f.actuation_curve,
    }


def _finger_from_dict(d: dict) -> FingerSpec:
    return FingerSpec(
        name=d["name"],
        base=tuple(d["base"]),
        base_angle_deg=float(d["base_angle_deg"]),
        scaffold=[ScaffoldJointSpec(**s) for s in d.get("scaffold", [])],
        compartments=[CompartmentSpec(**c) for c in d.get("compartments", [])],
        bend_joints=list(d.get("bend_joints", [])),
        strain_regions=[tuple(r) for r in d.get("strain_regions", [])],
        actuation_curve=float(d.get("actuation_curve", 0.25)),
    )


def save_scene(path, config: PlantConfig) -> None:
    doc = {
        "version": 1,
        "gravity": {"magnitude": config.gravity_magnitude,
                    "angle_deg": math.degrees(config.gravity_angle)},
        "workspace_radius": config.workspace_radius,
        "penetration_cap_frac": config.penetration_cap_frac,
        "actuation_bounds": list(config.actuation_bounds),
        "seed": config.seed,
        "check_tunneling": config.check_tunneling,
        "contact": {
            "normal_stiffness": config.contact.normal_stiffness,
            "tangent_stiffness": config.contact.tangent_stiffness,
            "mu": config.contact.mu,
            "node_radius": config.contact.node_radius,
            "samples_per_segment": config.contact.samples_per_segment,
        },
        "solver": {"tol": config.solver.tol, "max_iters": config.solver.max_iters,
                   "friction_passes": config.solver.friction_passes},
        "carrier": {
            "enabled": config.carrier.enabled,
            "axes": list(config.carrier.axes),
            "stiffness": config.carrier.stiffness,
            "gain": config.carrier.gain,
            "rest": list(config.carrier.rest),
            "bounds": list(config.carrier.bounds),
        },
        "fingers": [_finger_to_dict(f) for f in config.fingers],
        "walls": [{"normal": list(w.normal), "offset": w.offset, "mu": w.mu}
                  for w in config.walls],
        "initial_actuation": dict(config.initial_actuation),
    }
    if config.object is not None:
        o = config.object
        doc["object"] = {"shape": o.shape, "size": o.size,
                         "corner_radius": o.corner_radius, "mass": o.mass,
                         "pose": list(o.pose)}
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False), encoding="utf-8")


def load_scene(path) -> PlantConfig:
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"scene file not found: {path}") from exc
    if doc.get("version") != 1:
        raise ConfigError(f"unsupported scene version {doc.get('version')!r}")
    grav = doc.get("gravity", {})
    obj = None
    if "object" in doc:
        o = doc["object"]
        obj = ObjectSpec(shape=o["shape"], size=float(o["size"]),
                         corner_radius=float(o.get("corner_radius", 0.0)),
                         mass=float(o.get("mass", 0.05)),
                         pose=tuple(o.get("pose", (0.0, 0.0, 0.0))))
    contact = ContactSpec(**doc.get("contact", {}))
    solver = SolverSpec(**doc.get("solver", {}))
    car = doc.get("carrier", {})
    carrier = CarrierSpec(
        enabled=bool(car.get("enabled", False)),
        axes=tuple(car.get("axes", ("y",))),
        stiffness=float(car.get("stiffness", 500.0)),
        gain=float(car.get("gain", 1.0)),
        rest=tuple(car.get("rest", (0.0, 0.0))),
        bounds=tuple(car.get("bounds", (-8.0, 8.0))),
    )
    cfg = PlantConfig(
        fingers=[_finger_from_dict(f) for f in doc["fingers"]],
        object=obj,
        walls=[WallSpec(normal=tuple(w["normal"]), offset=float(w["offset"]),
                        mu=w.get("mu")) for w in doc.get("walls", [])],
        gravity_magnitude=float(grav.get("magnitude", 1.0)),
        gravity_angle=math.radians(float(grav.get("angle_deg", 0.0))),
        contact=contact,
        carrier=carrier,
        solver=solver,
        workspace_radius=float(doc.get("workspace_radius", 30.0)),
        penetration_cap_frac=float(doc.get("penetration_cap_frac", 0.02)),
        actuation_bounds=tuple(doc.get("actuation_bounds", (0.0, 1.0))),
        initial_actuation=dict(doc.get("initial_actuation", {})),
        seed=int(doc.get("seed", 0)),
        check_tunneling=bool(doc.get("check_tunneling", True)),
    )
    cfg.validate()
    return cfg
