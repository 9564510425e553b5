"""Built-in random surface systems."""

from .base import ConstantCocycleSystem, SurfacePoint, SurfaceSystem, identity_system
from .charvar import CharacterVarietySystem, MapWord, TracePoint, cv_system, generator_set_16
from .torus import StandardMapSystem, TorusPoint, omega_set, std_system

__all__ = [
    "CharacterVarietySystem",
    "ConstantCocycleSystem",
    "MapWord",
    "StandardMapSystem",
    "SurfacePoint",
    "SurfaceSystem",
    "TorusPoint",
    "TracePoint",
    "cv_system",
    "generator_set_16",
    "identity_system",
    "omega_set",
    "std_system",
]
