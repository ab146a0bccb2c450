"""Built-in scene builders: the nominal grasp scene and the table-slide scene.

The nominal scene is a frontal view of a grasp: a square object cradled by a
thumb from below, a ring finger from above (the sensed finger), and middle
and little fingers pinching from the sides. Six of the ten actuation channels
are controlled in the shift skill: the four thumb channels and the two little
finger channels.
"""

from __future__ import annotations

import math

from .config import (
    CarrierSpec,
    CompartmentSpec,
    ContactSpec,
    FingerSpec,
    ObjectSpec,
    PlantConfig,
    ScaffoldJointSpec,
    SolverSpec,
    WallSpec,
)


def _shape(a: float, curve: float = 0.25) -> float:
    return (a + curve * a * a) / (1.0 + curve)


def _neutral_rest(gain: float, neutral: float = 0.5) -> float:
    """Rest angle that cancels the gain at the neutral actuation value."""
    return -gain * _shape(neutral)


def nominal_scene(object_size: float = 4.5, gravity_angle: float = 0.0,
                  seed: int = 0) -> PlantConfig:
    """Square object of width `object_size` cradled by four fingers."""
    half = object_size / 2.0

    thumb = FingerSpec(
        name="thumb",
        base=(0.0, -7.6),
        base_angle_deg=90.0,
        scaffold=[
            ScaffoldJointSpec(length=1.05, stiffness=55.0, gain=0.55,
                              rest_angle=_neutral_rest(0.55)),
            ScaffoldJointSpec(length=1.05, stiffness=55.0, gain=0.55,
                              rest_angle=_neutral_rest(0.55)),
            ScaffoldJointSpec(length=1.05, stiffness=55.0, gain=0.55,
                              rest_angle=_neutral_rest(0.55)),
        ],
        compartments=[
            CompartmentSpec(segments=6, segment_length=0.38, stiffness=14.0,
                            joint_gain=0.30, rest_angle=_neutral_rest(0.30)),
        ],
        bend_joints=[0, 1, 2],
        strain_regions=[(3, 5), (5, 6), (6, 8), (8, 9)],
    )
    middle = FingerSpec(
        name="middle",
        base=(-5.9, 2.1),
        base_angle_deg=8.0,
        compartments=[
            CompartmentSpec(segments=4, segment_length=0.52, stiffness=10.0,
                            joint_gain=-0.5, rest_angle=_neutral_rest(-0.5)),
            CompartmentSpec(segments=4, segment_length=0.52, stiffness=7.0,
                            joint_gain=-0.5, rest_angle=_neutral_rest(-0.5)),
        ],
        strain_regions=[(0, 2), (2, 4), (4, 6), (6, 8)],
    )
    little = FingerSpec(
        name="little",
        base=(5.9, 2.1),
        base_angle_deg=172.0,
        compartments=[
            CompartmentSpec(segments=4, segment_length=0.52, stiffness=10.0,
                            joint_gain=0.5, rest_angle=_neutral_rest(0.5)),
            CompartmentSpec(segments=4, segment_length=0.52, stiffness=7.0,
                            joint_gain=0.5, rest_angle=_neutral_rest(0.5)),
        ],
        strain_regions=[(0, 2), (2, 4), (4, 6), (6, 8)],
    )
    ring = FingerSpec(
        name="ring",
        base=(0.0, 7.2),
        base_angle_deg=-90.0,
        compartments=[
            CompartmentSpec(segments=4, segment_length=0.56, stiffness=9.0,
                            joint_gain=0.45, rest_angle=_neutral_rest(0.45)),
            CompartmentSpec(segments=4, segment_length=0.56, stiffness=6.0,
                            joint_gain=0.45, rest_angle=_neutral_rest(0.45)),
        ],
        strain_regions=[(0, 2), (2, 4), (4, 6), (6, 8)],
    )

    cfg = PlantConfig(
        fingers=[thumb, middle, ring, little],
        object=ObjectSpec(shape="square", size=half, corner_radius=0.45,
                          mass=0.15, pose=(0.0, 0.0, 0.0)),
        gravity_magnitude=1.0,
        gravity_angle=gravity_angle,
        contact=ContactSpec(normal_stiffness=60.0, tangent_stiffness=40.0,
                            mu=0.9, node_radius=0.32, samples_per_segment=2),
        solver=SolverSpec(tol=1e-8, max_iters=400, friction_passes=12),
        workspace_radius=25.0,
        initial_actuation={
            "thumb/sj0": 0.5, "thumb/sj1": 0.5, "thumb/sj2": 0.5, "thumb/c0": 0.5,
            "middle/c0": 0.5, "middle/c1": 0.5,
            "ring/c0": 0.5, "ring/c1": 0.5,
            "little/c0": 0.5, "little/c1": 0.5,
        },
        seed=seed,
    )
    return cfg


SHIFT_CONTROLLED = ("thumb/sj0", "thumb/sj1", "thumb/sj2", "thumb/c0",
                    "little/c0", "little/c1")
SHIFT_ROWS = ("ring/s0", "ring/s1", "ring/s2", "ring/s3")


def slide_scene(object_size: float = 3.0, seed: int = 0) -> PlantConfig:
    """Table-top sliding: a finger pair on a carrier pressing a square object.

    The carrier's vertical axis is the controlled actuation channel; the
    lateral axis is scheduled by the scenario.
    """
    half = object_size / 2.0
    presser = FingerSpec(
        name="ring",
        base=(0.0, 7.8),
        base_angle_deg=-90.0,
        compartments=[
            CompartmentSpec(segments=4, segment_length=0.56, stiffness=9.0,
                            joint_gain=0.45, rest_angle=_neutral_rest(0.45)),
            CompartmentSpec(segments=4, segment_length=0.56, stiffness=6.0,
                            joint_gain=0.45, rest_angle=_neutral_rest(0.45)),
        ],
        strain_regions=[(0, 2), (2, 4), (4, 6), (6, 8)],
    )
    cfg = PlantConfig(
        fingers=[presser],
        object=ObjectSpec(shape="square", size=half, corner_radius=0.3,
                          mass=0.3, pose=(0.0, half, 0.0)),
        walls=[WallSpec(normal=(0.0, 1.0), offset=0.0, mu=0.35)],
        gravity_magnitude=1.0,
        gravity_angle=0.0,
        contact=ContactSpec(normal_stiffness=60.0, tangent_stiffness=40.0,
                            mu=0.9, node_radius=0.32, samples_per_segment=2),
        carrier=CarrierSpec(enabled=True, axes=("x", "y"), stiffness=400.0,
                            gain=1.0, rest=(0.0, 0.0), bounds=(-8.0, 8.0)),
        solver=SolverSpec(tol=1e-8, max_iters=400, friction_passes=12),
        workspace_radius=30.0,
        initial_actuation={"ring/c0": 0.5, "ring/c1": 0.5,
                           "carrier/x": 0.0, "carrier/y": 0.0},
        seed=seed,
    )
    return cfg
