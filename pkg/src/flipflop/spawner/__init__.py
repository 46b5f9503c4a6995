"""Affine spawner on a cube: parameters, graph discs, blender certificates and the flip-flop adapter."""

from .blender import (
    BlenderReport,
    ConeNotInvariant,
    certify_blender,
    cone_check,
    image_margins,
    robustness_probe,
    safety_domain_check,
    strict_invariance_probe,
)
from .discs import GraphDisc, delta_distance, delta_upper_bound, induced_apply, restrict_to_family
from .family import CubePoint, SpawnerFamily, SpawnerMember, as_flipflop_family, center_lyapunov
from .params import Box, SpawnerParams, default_params, params_from_record, validate

__all__ = [
    "BlenderReport", "Box", "ConeNotInvariant", "CubePoint", "GraphDisc", "SpawnerFamily", "SpawnerMember",
    "SpawnerParams", "as_flipflop_family", "center_lyapunov", "certify_blender", "cone_check",
    "default_params", "delta_distance", "delta_upper_bound", "image_margins", "induced_apply",
    "params_from_record", "restrict_to_family", "robustness_probe", "safety_domain_check",
    "strict_invariance_probe", "validate",
]
