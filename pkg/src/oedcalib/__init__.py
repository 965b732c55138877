"""Optimal experimental designs for calibration models known through their inverse mean."""

from .criteria import CriterionSpec, Kind
from .design import Design, Scale, efficiency, fim, transform_design
from .model import CalibrationModel, RegressorMode, get_model, linear, radiochromic, register_model

__version__ = "0.1.0"

__all__ = [
    "CalibrationModel", "CriterionSpec", "Design", "Kind", "RegressorMode", "Scale",
    "efficiency", "fim", "get_model", "linear", "radiochromic", "register_model", "transform_design",
]
