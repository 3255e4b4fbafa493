"""Per-round transition probabilities and opinion/weight updates.

Scalar functions take one (agent, rumor) cell of a :class:`Snapshot`;
:func:`round_probabilities` evaluates every cell at once for the engine.
Both read the snapshot only, never the state being written this round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import PHI_CAP, STANCE_OF, ModelParams

# log(1 - w) floor; keeps 0 * log(0) out of the matrix products
_LOG_FLOOR = -700.0


@dataclass(frozen=True)
class Snapshot:
    """End-of-previous-round view used for every evaluation in a round.

    ``stances[k, m]`` is i_{m,k} for rumor row ``k`` (origin influencer +1 on
    its own rumor). ``states`` holds compartment codes for the same rows.
    """

    opinions: np.ndarray
    weights: np.ndarray
    stances: np.ndarray
    states: np.ndarray
    rumor_ids: np.ndarray
    rumor_values: np.ndarray
    is_influencer: np.ndarray

    @property
    def n_agents(self) -> int:
        return self.opinions.shape[0]

    def discussers(self, n: int, k: int) -> np.ndarray:
        """Agents other than ``n`` publicly discussing rumor row ``k``."""
        mask = self.stances[k] != 0
        mask[n] = False
        return np.flatnonzero(mask)


def exposure_from_weights(w) -> float:
    """1 - prod(1 - w) over the incoming weights of discussing neighbours."""
    w = np.asarray(w, dtype=float)
    if w.size == 0:
        return 0.0
    if np.any(w >= 1.0):
        return 1.0
    return float(-np.expm1(np.sum(np.log1p(-w))))


def exposure_probability(n: int, k: int, snap: Snapshot) -> float:
    src = snap.discussers(n, k)
    return exposure_from_weights(snap.weights[src, n])


def deviation_from_stances(w, stances, n_agents: int, stance_norm="population",
                           clamp=True) -> float:
    """Weighted spread of neighbour stances around the perceived mean stance.

    ``w`` and ``stances`` describe the discussing neighbours only.
    """
    w = np.asarray(w, dtype=float)
    s = np.asarray(stances, dtype=float)
    total = w.sum()
    if w.size == 0 or total <= 0.0:
        return 0.0
    if stance_norm == "population":
        mean = s.sum() / (n_agents - 1)
    else:
        mean = s.sum() / s.size
    sigma = math.sqrt(float(np.sum(w * (s - mean) ** 2)) / total)
    return min(sigma, 1.0) if clamp else sigma


def perceived_deviation(n: int, k: int, snap: Snapshot, params: ModelParams | None = None,
                        clamp=True) -> float:
    norm = params.stance_norm if params is not None else "population"
    src = snap.discussers(n, k)
    return deviation_from_stances(snap.weights[src, n], snap.stances[k, src],
                                  snap.n_agents, norm, clamp)


def decision_from(opinion: float, sigma: float, beta_min: float) -> float:
    return max(abs(opinion) * (1.0 - sigma), beta_min)


def decision_probability(n: int, k: int, snap: Snapshot, params: ModelParams) -> float:
    sigma = perceived_deviation(n, k, snap, params)
    return decision_from(float(snap.opinions[n]), sigma, params.beta_min)


def approval_probability(o_n: float, v_k: float) -> float:
    return 1.0 - abs(v_k - o_n) / 2.0


def expression_probability(o_n: float, v_k: float, stance: int, params: ModelParams) -> float:
    """Chance of voicing a decision with sign ``stance`` (+1 forward, -1 refute)."""
    if stance not in (-1, 1):
        raise ValueError(f"stance must be +1 or -1, got {stance!r}")
    return math.exp(-params.silence * abs(o_n - stance * v_k))


def interest_loss_from(alpha: float, gamma: float, xi: float) -> float:
    return 1.0 - xi * alpha * gamma


def interest_loss_probability(n: int, k: int, snap: Snapshot, params: ModelParams) -> float:
    own = int(STANCE_OF[snap.states[k, n]])
    if own == 0:
        raise ValueError(f"agent {n} is not discussing rumor row {k}")
    alpha = exposure_probability(n, k, snap)
    gamma = expression_probability(float(snap.opinions[n]), float(snap.rumor_values[k]),
                                   own, params)
    return interest_loss_from(alpha, gamma, params.xi)


def weight_update(w_prev, o_m, o_n, params: ModelParams):
    """Homophily update of a directed weight; works elementwise on arrays.

    Within the consensus threshold the gap to 1 shrinks by exp(eta*(d-O));
    beyond it the weight itself shrinks by exp(eta*(O-d)).
    """
    d = np.abs(np.asarray(o_m, dtype=float) - np.asarray(o_n, dtype=float))
    w_prev = np.asarray(w_prev, dtype=float)
    x = params.eta * (d - params.threshold)
    close = d <= params.threshold
    # w + (1-w)(1-e^x) written with expm1 to avoid cancellation for small w
    grow = w_prev - (1.0 - w_prev) * np.expm1(np.where(close, x, 0.0))
    shrink = np.exp(np.where(close, 0.0, -x)) * w_prev
    out = np.clip(np.where(close, grow, shrink), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def opinion_shift(d: int, o_n: float, v_k: float, params: ModelParams) -> float:
    if d not in (-1, 0, 1):
        raise ValueError(f"decision indicator must be -1, 0 or 1, got {d!r}")
    diff = v_k - o_n
    sgn = (diff > 0) - (diff < 0)
    return params.lam * d * sgn


def clamp_phi(phi):
    return np.clip(phi, -PHI_CAP, PHI_CAP)


def opinion_update(phi: float, shifts, params: ModelParams) -> tuple[float, float]:
    if not math.isfinite(phi):
        raise ValueError(f"phi must be finite, got {phi!r}")
    new = params.rho * phi + math.fsum(shifts)
    new = float(clamp_phi(new))
    return new, 2.0 / math.pi * math.atan(new)


@dataclass
class RoundProbabilities:
    """Every probability for every (rumor row, agent) cell; shape (K, N)."""

    alpha: np.ndarray
    sigma: np.ndarray
    beta: np.ndarray
    q: np.ndarray
    gamma_approve: np.ndarray
    gamma_refute: np.ndarray
    mu: np.ndarray


def round_probabilities(snap: Snapshot, params: ModelParams) -> RoundProbabilities:
    """Vectorized evaluation of every cell of ``snap`` at once.

    Uses the identity sum w(i - I)^2 = sum w - 2 I sum w i + I^2 sum w,
    valid because discussing stances are +-1.
    """
    W = snap.weights
    n_agents = snap.n_agents
    stance = snap.stances.astype(float)
    talking = np.abs(stance)
    o = snap.opinions[None, :]
    v = snap.rumor_values[:, None]

    with np.errstate(divide="ignore"):
        log_keep = np.maximum(np.log1p(-np.minimum(W, 1.0)), _LOG_FLOOR)
    np.fill_diagonal(log_keep, 0.0)
    alpha = -np.expm1(talking @ log_keep)

    wsum = talking @ W
    wstance = stance @ W
    others = stance.sum(axis=1, keepdims=True) - stance
    if params.stance_norm == "population":
        mean = others / (n_agents - 1)
    else:
        count = talking.sum(axis=1, keepdims=True) - talking
        mean = np.divide(others, count, out=np.zeros_like(others), where=count > 0)
    spread = wsum - 2.0 * mean * wstance + mean * mean * wsum
    has_w = wsum > 0
    sigma = np.sqrt(np.divide(np.maximum(spread, 0.0), wsum,
                              out=np.zeros_like(wsum), where=has_w))
    sigma = np.minimum(sigma, 1.0)

    beta = np.maximum(np.abs(o) * (1.0 - sigma), params.beta_min)
    q = 1.0 - np.abs(v - o) / 2.0
    g_app = np.exp(-params.silence * np.abs(o - v))
    g_ref = np.exp(-params.silence * np.abs(o + v))
    own = STANCE_OF[np.clip(snap.states, 0, 4)]
    g_own = np.where(own < 0, g_ref, g_app)
    mu = 1.0 - params.xi * alpha * g_own
    return RoundProbabilities(alpha, sigma, beta, q, g_app, g_ref, mu)
