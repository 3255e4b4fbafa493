"""Domain types for the extended SHIMR opinion-diffusion model.

Symbols map onto fields as follows:

    Lambda -> ModelParams.lam        (influence factor)
    rho    -> ModelParams.rho        (memory factor)
    eta    -> ModelParams.eta        (crowd exponent)
    O      -> ModelParams.threshold  (consensus threshold)
    Gamma  -> ModelParams.silence    (silence exponent)
    beta_min -> ModelParams.beta_min (minimum decision chance)
    xi     -> ModelParams.xi         (trend factor)
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field, fields

import numpy as np

PHI_CAP = 1e15
STANCE_NORMS = ("population", "discussers")


class ConfigError(ValueError):
    """Raised when a configuration violates one or more invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class Role(enum.Enum):
    INFLUENCER = "influencer"
    NORMAL = "normal"


class Compartment(enum.IntEnum):
    S = 0
    H = 1
    I = 2  # noqa: E741
    M = 3
    R = 4


LEGAL_TRANSITIONS = frozenset(
    {
        (Compartment.S, Compartment.S),
        (Compartment.S, Compartment.H),
        (Compartment.H, Compartment.H),
        (Compartment.H, Compartment.I),
        (Compartment.H, Compartment.M),
        (Compartment.H, Compartment.R),
        (Compartment.I, Compartment.I),
        (Compartment.I, Compartment.R),
        (Compartment.M, Compartment.M),
        (Compartment.M, Compartment.R),
        (Compartment.R, Compartment.R),
    }
)

# 5x5 lookup: LEGAL_MASK[prev, new]
LEGAL_MASK = np.zeros((5, 5), dtype=bool)
for _a, _b in LEGAL_TRANSITIONS:
    LEGAL_MASK[_a, _b] = True

# stance indicator indexed by compartment code
STANCE_OF = np.array([0, 0, 1, -1, 0], dtype=np.int8)


def stance(state: Compartment) -> int:
    """Public stance of an agent in ``state``: +1 forwarding, -1 refuting, else 0."""
    return int(STANCE_OF[int(state)])


def is_legal(prev: Compartment, new: Compartment) -> bool:
    return (Compartment(prev), Compartment(new)) in LEGAL_TRANSITIONS


def opinion_from_phi(phi: float) -> float:
    """Map a tangential index back to an opinion in (-1, 1)."""
    if not math.isfinite(phi):
        raise ValueError(f"phi must be finite, got {phi!r}")
    return 2.0 / math.pi * math.atan(phi)


def phi_from_opinion(o: float) -> float:
    """Tangential index tan(pi/2 * o); only defined for |o| < 1."""
    if not -1.0 < o < 1.0:
        raise ValueError(f"opinion must lie strictly inside (-1, 1), got {o!r}")
    return math.tan(0.5 * math.pi * o)


@dataclass(frozen=True)
class AgentRecord:
    id: int
    role: Role
    opinion: float
    phi: float = math.nan

    @property
    def is_influencer(self) -> bool:
        return self.role is Role.INFLUENCER


@dataclass
class RumorRecord:
    id: int
    value: float
    origin: int
    birth_round: int
    active: bool = True
    expiry_round: int | None = None

    def expire(self, t: int) -> None:
        if not self.active:
            raise RuntimeError(f"rumor {self.id} already expired")
        self.active = False
        self.expiry_round = t


def params_violations(
    lam=1.0, rho=0.5, eta=0.1, threshold=1.0, silence=1.0, beta_min=0.01, xi=0.8,
    stance_norm="population",
) -> list[str]:
    """List every range violation for a set of model parameters."""
    errs = []

    def num(name, v):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            errs.append(f"{name} must be a finite real, got {v!r}")
            return False
        return True

    if num("lam", lam) and not lam > 0:
        errs.append("lam out of (0,inf)")
    if num("rho", rho) and not 0 < rho < 1:
        errs.append("rho out of (0,1)")
    if num("eta", eta) and not eta > 0:
        errs.append("eta out of (0,inf)")
    if num("threshold", threshold) and not threshold > 0:
        errs.append("threshold out of (0,inf)")
    if num("silence", silence) and not silence > 0:
        errs.append("silence out of (0,inf)")
    if num("beta_min", beta_min) and not 0 < beta_min <= 1:
        errs.append("beta_min out of (0,1]")
    if num("xi", xi) and not 0 < xi <= 1:
        errs.append("xi out of (0,1]")
    if stance_norm not in STANCE_NORMS:
        errs.append(f"stance_norm must be one of {STANCE_NORMS}, got {stance_norm!r}")
    return errs


@dataclass(frozen=True)
class ModelParams:
    """Model parameters; defaults are the baseline echo-chamber setup.

    ``stance_norm`` selects the denominator of the perceived mean stance:
    ``"population"`` divides by N-1, ``"discussers"`` by the number of
    discussing neighbours.
    """

    lam: float = 1.0
    rho: float = 0.5
    eta: float = 0.1
    threshold: float = 1.0
    silence: float = 1.0
    beta_min: float = 0.01
    xi: float = 0.8
    stance_norm: str = "population"

    def __post_init__(self):
        errs = params_violations(**{f.name: getattr(self, f.name) for f in fields(self)})
        if errs:
            raise ConfigError(errs)

    def replace(self, **changes) -> ModelParams:
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return ModelParams(**values)


@dataclass(frozen=True)
class RunConfig:
    n_agents: int = 100
    rounds: int = 150
    runs: int = 100
    influencers: tuple[float, ...] = (-1.0, 1.0)
    master_seed: int = 1
    params: ModelParams = field(default_factory=ModelParams)
    rumor_rate: int = 1
    scenario: str = "radical-controversy"

    @property
    def influencer_spec(self) -> list[tuple[int, float]]:
        """(slot, opinion) pairs; influencers occupy the leading slots."""
        return list(enumerate(self.influencers))

    @property
    def n_influencers(self) -> int:
        return len(self.influencers)

    def replace(self, **changes) -> RunConfig:
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return RunConfig(**values)

    def canonical(self) -> str:
        """Stable key=value rendering used for hashing and metadata."""
        p = self.params
        lines = [
            f"scenario={self.scenario}",
            f"agents={self.n_agents}",
            f"rounds={self.rounds}",
            f"runs={self.runs}",
            f"seed={self.master_seed}",
            "influencers=" + ",".join(repr(float(x)) for x in self.influencers),
            f"rumor-rate={self.rumor_rate}",
            f"lambda={p.lam!r}",
            f"rho={p.rho!r}",
            f"eta={p.eta!r}",
            f"consensus-threshold={p.threshold!r}",
            f"gamma={p.silence!r}",
            f"beta-min={p.beta_min!r}",
            f"xi={p.xi!r}",
            f"stance-norm={p.stance_norm}",
        ]
        return "\n".join(lines)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def config_violations(cfg: RunConfig) -> list[str]:
    errs = []

    def integer(name, v):
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
            errs.append(f"{name} must be an integer, got {v!r}")
            return False
        return True

    if integer("n_agents", cfg.n_agents) and cfg.n_agents < 2:
        errs.append(f"n_agents must be >= 2, got {cfg.n_agents}")
    if integer("rounds", cfg.rounds) and cfg.rounds < 1:
        errs.append(f"rounds must be >= 1, got {cfg.rounds}")
    if integer("runs", cfg.runs) and cfg.runs < 1:
        errs.append(f"runs must be >= 1, got {cfg.runs}")
    if integer("rumor_rate", cfg.rumor_rate) and cfg.rumor_rate < 1:
        errs.append(f"rumor_rate must be >= 1, got {cfg.rumor_rate}")
    if integer("master_seed", cfg.master_seed) and not 0 <= cfg.master_seed < 2**64:
        errs.append(f"master_seed must be an unsigned 64-bit integer, got {cfg.master_seed}")
    for slot, o in cfg.influencer_spec:
        if not (isinstance(o, (int, float)) and math.isfinite(o) and -1.0 <= o <= 1.0):
            errs.append(f"influencer {slot} opinion out of [-1,1]: {o!r}")
    if isinstance(cfg.n_agents, int) and len(cfg.influencers) >= cfg.n_agents:
        errs.append(
            f"influencer count {len(cfg.influencers)} must be < n_agents {cfg.n_agents}"
        )
    if isinstance(cfg.params, ModelParams):
        p = cfg.params
        errs.extend(params_violations(p.lam, p.rho, p.eta, p.threshold, p.silence,
                                      p.beta_min, p.xi, p.stance_norm))
    else:
        errs.append("params must be a ModelParams instance")
    return errs


def validate_config(cfg: RunConfig) -> RunConfig:
    """Return ``cfg`` unchanged if valid, else raise ConfigError with every violation."""
    errs = config_violations(cfg)
    if errs:
        raise ConfigError(errs)
    return cfg


@dataclass
class World:
    """Mutable simulation state for one run.

    ``states`` has one row per rumor ever created (row index == rumor id) and
    one column per agent; influencer columns hold -1 and are never read.
    ``pending_shift`` carries the tangential-index shifts decided in the
    previous round, applied at the start of the next one.
    """

    opinions: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    is_influencer: np.ndarray
    rumor_value: np.ndarray
    rumor_origin: np.ndarray
    rumor_birth: np.ndarray
    rumor_active: np.ndarray
    rumor_expiry: np.ndarray
    states: np.ndarray
    pending_shift: np.ndarray
    n_rumors: int = 0

    @property
    def n_agents(self) -> int:
        return self.opinions.shape[0]

    @property
    def normal(self) -> np.ndarray:
        return ~self.is_influencer

    def active_rumors(self) -> np.ndarray:
        return np.flatnonzero(self.rumor_active[: self.n_rumors])

    def agent(self, n: int) -> AgentRecord:
        if self.is_influencer[n]:
            return AgentRecord(n, Role.INFLUENCER, float(self.opinions[n]))
        return AgentRecord(n, Role.NORMAL, float(self.opinions[n]), float(self.phi[n]))

    def rumor(self, k: int) -> RumorRecord:
        if not 0 <= k < self.n_rumors:
            raise IndexError(f"no rumor {k}")
        expiry = int(self.rumor_expiry[k])
        return RumorRecord(
            id=k,
            value=float(self.rumor_value[k]),
            origin=int(self.rumor_origin[k]),
            birth_round=int(self.rumor_birth[k]),
            active=bool(self.rumor_active[k]),
            expiry_round=expiry if expiry >= 0 else None,
        )
