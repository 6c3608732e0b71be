"""Information spreading and threat-aware deployment design for multi-layer D2D networks."""

from __future__ import annotations

__version__ = "0.1.0"

from .degree import DegreeModel, LayerSpec, StrandId, all_strands, moments, pmf, strand_model
from .epidemic import (
    ThreatParams,
    average_informed,
    effective_rate,
    epidemic_threshold,
    integrate_dynamics,
    solve_theta_exact,
    theta_approx,
)
from .errors import (
    ConvergenceError,
    InfeasibleError,
    InvalidParameterError,
    SpreadnetError,
    ThreatInfeasibleError,
)
from .mission import load_mission, preset_encounter, preset_intelligence, save_mission
from .optimizer import MissionSpec, NetworkDesign, Thresholds, cost, optimize, sweep_threat, verify_original

__all__ = [
    "ConvergenceError",
    "DegreeModel",
    "InfeasibleError",
    "InvalidParameterError",
    "LayerSpec",
    "MissionSpec",
    "NetworkDesign",
    "SpreadnetError",
    "StrandId",
    "ThreatInfeasibleError",
    "ThreatParams",
    "Thresholds",
    "all_strands",
    "average_informed",
    "cost",
    "effective_rate",
    "epidemic_threshold",
    "integrate_dynamics",
    "load_mission",
    "moments",
    "optimize",
    "pmf",
    "preset_encounter",
    "preset_intelligence",
    "save_mission",
    "solve_theta_exact",
    "strand_model",
    "sweep_threat",
    "theta_approx",
    "verify_original",
]
