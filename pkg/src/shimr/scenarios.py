"""Initial worlds and the named influencer setups."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ConfigError, RunConfig, World
from .rng import INIT_OPINION_DOMAIN, INIT_WEIGHT_DOMAIN, RngStream

PRESETS: dict[str, tuple[float, ...]] = {
    "radical-controversy": (-1.0, 1.0),
    "radical-unipolar": (-1.0,),
    "unpaired-controversy": (-1.0, 0.3),
    "rational-controversy": (-0.3, 0.3),
}
CUSTOM = "custom"


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    influencer_opinions: tuple[float, ...]

    def __post_init__(self):
        if self.name != CUSTOM and self.name not in PRESETS:
            raise ConfigError([f"unknown scenario {self.name!r}; choose from "
                               f"{', '.join([*PRESETS, CUSTOM])}"])
        if self.name in PRESETS and tuple(self.influencer_opinions) != PRESETS[self.name]:
            raise ConfigError([f"scenario {self.name} requires influencers "
                               f"{PRESETS[self.name]}, got {self.influencer_opinions}"])

    @classmethod
    def preset(cls, name: str) -> ScenarioSpec:
        if name not in PRESETS:
            raise ConfigError([f"unknown scenario {name!r}; choose from {', '.join(PRESETS)}"])
        return cls(name, PRESETS[name])

    @classmethod
    def from_config(cls, cfg: RunConfig) -> ScenarioSpec:
        return cls(cfg.scenario, tuple(cfg.influencers))


def apply_scenario(cfg: RunConfig, name: str) -> RunConfig:
    """Copy of ``cfg`` switched to preset ``name``."""
    spec = ScenarioSpec.preset(name)
    return cfg.replace(scenario=spec.name, influencers=spec.influencer_opinions)


def init_world(cfg: RunConfig, spec: ScenarioSpec, rng: RngStream) -> World:
    """Gaussian tangential indices for normal agents, uniform directed weights.

    Influencers take the leading slots. Every agent slot consumes its
    opinion draw so normal agents see the same draws whatever the
    influencer count.
    """
    n = cfg.n_agents
    n_inf = len(spec.influencer_opinions)
    if n_inf >= n:
        raise ConfigError([f"influencer count {n_inf} must be < n_agents {n}"])

    is_inf = np.zeros(n, dtype=bool)
    is_inf[:n_inf] = True

    phi = rng.normals(INIT_OPINION_DOMAIN, n)
    opinions = 2.0 / np.pi * np.arctan(phi)
    opinions[:n_inf] = spec.influencer_opinions
    phi[:n_inf] = np.nan

    weights = rng.uniforms(INIT_WEIGHT_DOMAIN, n * n).reshape(n, n)
    np.fill_diagonal(weights, 0.0)

    capacity = cfg.rumor_rate * n_inf * cfg.rounds
    return World(
        opinions=opinions,
        phi=phi,
        weights=weights,
        is_influencer=is_inf,
        rumor_value=np.zeros(capacity),
        rumor_origin=np.full(capacity, -1, dtype=np.int64),
        rumor_birth=np.zeros(capacity, dtype=np.int64),
        rumor_active=np.zeros(capacity, dtype=bool),
        rumor_expiry=np.full(capacity, -1, dtype=np.int64),
        states=np.full((capacity, n), -1, dtype=np.int8),
        pending_shift=np.zeros(n),
    )
