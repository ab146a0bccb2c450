from .config import (
    CarrierSpec,
    CompartmentSpec,
    ContactSpec,
    FingerSpec,
    ObjectSpec,
    PlantConfig,
    ScaffoldJointSpec,
    SensorLayout,
    SolverSpec,
    WallSpec,
    load_scene,
    save_scene,
)
from .core import Plant, PlantState
from .rig import SensorizedPlant, calibrate_rig, free_motion_sweep

__all__ = [
    "CarrierSpec",
    "CompartmentSpec",
    "ContactSpec",
    "FingerSpec",
    "ObjectSpec",
    "Plant",
    "PlantConfig",
    "PlantState",
    "ScaffoldJointSpec",
    "SensorLayout",
    "SensorizedPlant",
    "SolverSpec",
    "WallSpec",
    "calibrate_rig",
    "free_motion_sweep",
    "load_scene",
    "save_scene",
]
