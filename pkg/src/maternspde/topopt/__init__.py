"""Thermal-compliance topology optimization under random heat sources."""

from .config import OptConfig, config_from_mapping, load_config, parse_config_text
from .density import (PdeFilter, pde_filter, projection, projection_derivative, simp_kappa,
                      simp_kappa_derivative)
from .mma import MMAState, mma_update
from .optimize import OptState, Problem, build_problem, evaluate, initial_density, optimize
from .symmetry import (SymmetrizedSampler, heat_sink_mesh, mirror_map, mirrored_pair,
                       multiplicity, reflect, symmetrized_load_pair)
from .thermal import LoadCase, ThermalModel, compliance_and_gradient, thermal_solve

__all__ = [
    "OptConfig", "config_from_mapping", "load_config", "parse_config_text",
    "PdeFilter", "pde_filter", "projection", "projection_derivative", "simp_kappa",
    "simp_kappa_derivative", "MMAState", "mma_update", "OptState", "Problem",
    "build_problem", "evaluate", "initial_density", "optimize", "SymmetrizedSampler",
    "heat_sink_mesh", "mirror_map", "mirrored_pair", "multiplicity", "reflect",
    "symmetrized_load_pair", "LoadCase", "ThermalModel", "compliance_and_gradient",
    "thermal_solve",
]
