"""Deterministic co-simulation of a soft gripper combining granular jamming
with distributed suction elements (DSEs)."""

from .errors import (
    CalibrationError,
    ConfigurationError,
    ContractError,
    DomainError,
    GripperError,
    InsufficientDataError,
    RejectedCommandError,
    ScenarioLoadError,
    UngraspableObjectError,
    UnsupportedObjectError,
)
from .force_model import Actuation, ForceMode, MaterialParams, total_grasp_force
from .geometry import GripperGeometry, ObjectSpec, build_layout, seal_threshold_diameter, solve_contact
from .tigms import GraspMode, Thresholds, select_mode

__version__ = "0.1.0"

__all__ = [
    "Actuation", "CalibrationError", "ConfigurationError", "ContractError", "DomainError", "ForceMode",
    "GraspMode", "GripperError", "GripperGeometry", "InsufficientDataError", "MaterialParams", "ObjectSpec",
    "RejectedCommandError", "ScenarioLoadError", "Thresholds", "UngraspableObjectError",
    "UnsupportedObjectError", "build_layout", "seal_threshold_diameter", "select_mode", "solve_contact",
    "total_grasp_force",
]
