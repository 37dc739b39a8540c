"""Pseudospectral simulator and verification toolkit for the focusing
mass-critical inhomogeneous biharmonic NLS

    i u_t - Δ²u + ν Δu = -|x|^{-b} |u|^q u,    q = (8 - 2b)/N.
"""

from .analysis import (
    BlowupThresholds,
    BlowupVerdict,
    InequalityProbe,
    RadialProfile,
    classify_blowup,
    fit_power_law,
    gn_exterior_ratio,
    gn_ratio,
    interpolation_probe,
    riccati_blowup_time,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, parse_config
from .cutoff import build_chi, phi_comparison_audit, verify_cutoff_properties, verify_Phi2_scaling
from .dynamics import EvolveConfig, SimSeries, SimState, energy, evolve, mass, strang_step
from .errors import ConfigInvalid, IBNLSError, NonFiniteField
from .fields import ModelParams
from .grid import ComplexField, GridSpec, build_grid
from .runner import run_scenario, run_sweep
from .virial import VirialVariant, morawetz_decay_report, virial_residual, virial_rhs, virial_Z

__version__ = "0.1.0"

__all__ = [
    "BlowupThresholds", "BlowupVerdict", "InequalityProbe", "RadialProfile", "classify_blowup",
    "fit_power_law", "gn_exterior_ratio", "gn_ratio", "interpolation_probe", "riccati_blowup_time",
    "load_checkpoint", "save_checkpoint", "RunConfig", "parse_config", "build_chi", "phi_comparison_audit",
    "verify_cutoff_properties", "verify_Phi2_scaling", "EvolveConfig", "SimSeries", "SimState", "energy",
    "evolve", "mass", "strang_step", "ConfigInvalid", "IBNLSError", "NonFiniteField", "ModelParams",
    "ComplexField", "GridSpec", "build_grid", "run_scenario", "run_sweep", "VirialVariant",
    "morawetz_decay_report", "virial_residual", "virial_rhs", "virial_Z",
]
