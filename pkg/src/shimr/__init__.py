"""Extended SHIMR simulator for successive opinion diffusion on adaptive social networks."""

__version__ = "0.1.0"

from .engine import RoundTrace, SimulationResult, run_round, run_simulation, step_state
from .model import (
    AgentRecord,
    Compartment,
    ConfigError,
    ModelParams,
    Role,
    RumorRecord,
    RunConfig,
    opinion_from_phi,
    phi_from_opinion,
    validate_config,
)
from .rng import RngStream
from .scenarios import PRESETS, ScenarioSpec, apply_scenario, init_world

__all__ = [
    "AgentRecord", "Compartment", "ConfigError", "ModelParams", "PRESETS", "RngStream",
    "Role", "RoundTrace", "RumorRecord", "RunConfig", "ScenarioSpec", "SimulationResult",
    "apply_scenario", "init_world", "opinion_from_phi", "phi_from_opinion", "run_round",
    "run_simulation", "step_state", "validate_config",
]
