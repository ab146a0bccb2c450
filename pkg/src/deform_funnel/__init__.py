"""Deformation-based feedback funnels for compliant hands.

The package pairs a model-less Jacobian deformation controller with a 2D
quasi-static compliant-hand simulator that acts as the plant. See README.md
for the CLI and file formats.
"""

from .control import (
    ControlTarget,
    DeformationJacobian,
    ProbeConfig,
    adaptive_step_size,
    control_error,
    control_tick,
    cost,
    probe_jacobian,
    update_actuation,
)
from .demos import (
    DemonstrationTrajectory,
    SkillSpec,
    build_skill,
    extract_target,
    record_demonstration,
    run_sequence,
)
from .freemotion import FitConfig, FreeMotionModel, fit_free_motion_model
from .sensing import (
    ActuationVector,
    DeformationState,
    NormalizationTable,
    SensorVector,
    calibrate_normalization,
    compute_deformation,
)
from .store import FunnelPolicy, FunnelOutcome, JacobianRecord, JacobianStore, run_funnel

__version__ = "0.1.0"

__all__ = [
    "ActuationVector",
    "ControlTarget",
    "DeformationJacobian",
    "DeformationState",
    "DemonstrationTrajectory",
    "FitConfig",
    "FreeMotionModel",
    "FunnelOutcome",
    "FunnelPolicy",
    "JacobianRecord",
    "JacobianStore",
    "NormalizationTable",
    "ProbeConfig",
    "SensorVector",
    "SkillSpec",
    "adaptive_step_size",
    "build_skill",
    "calibrate_normalization",
    "compute_deformation",
    "control_error",
    "control_tick",
    "cost",
    "extract_target",
    "fit_free_motion_model",
    "probe_jacobian",
    "record_demonstration",
    "run_funnel",
    "run_sequence",
    "update_actuation",
]
