"""Round loop of the diffusion process.

Each round: decay/shift opinions, update weights, let influencers emit new
rumors, freeze a snapshot, move every (rumor, normal agent) cell one step
through S/H/I/M/R using only the snapshot, then retire rumors whose
audience is entirely in R.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from . import dynamics
from .dynamics import RoundProbabilities, Snapshot
from .model import (
    STANCE_OF,
    Compartment,
    ModelParams,
    RunConfig,
    World,
    validate_config,
)
from .rng import RngStream
from .scenarios import ScenarioSpec, init_world

S, H, I, M, R = (int(c) for c in Compartment)


@dataclass
class RoundTrace:
    """What happened in one round.

    ``counts[j]`` holds the S/H/I/M/R totals among normal agents for rumor
    ``rumor_ids[j]`` at the end of the round (rumors alive during the round,
    including those that expired at its end). ``transitions[a, b]`` counts
    cells that moved from compartment a to b; fresh rumors count as S->x.
    """

    t: int
    opinions: np.ndarray
    rumor_ids: np.ndarray
    counts: np.ndarray
    decisions: np.ndarray
    created: np.ndarray
    expired: np.ndarray
    transitions: np.ndarray
    probabilities: RoundProbabilities | None = None

    @property
    def compartment_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)


@dataclass
class SimulationResult:
    config: RunConfig
    run_index: int
    opinions: np.ndarray
    weights: np.ndarray
    is_influencer: np.ndarray
    traces: list[RoundTrace] = field(default_factory=list)
    rumor_value: np.ndarray | None = None
    rumor_origin: np.ndarray | None = None
    rumor_birth: np.ndarray | None = None
    rumor_expiry: np.ndarray | None = None

    @property
    def n_rumors(self) -> int:
        return 0 if self.rumor_value is None else len(self.rumor_value)


def transition(states, alpha, beta, q, gamma_approve, gamma_refute, mu, u0, u1, u2):
    """Move compartment codes one step given probabilities and uniform draws.

    Works elementwise on arrays of any matching shape. Returns the new codes
    and the decision indicator (+1 for H->I, -1 for H->M, else 0).
    """
    states = np.asarray(states)
    new = states.copy()
    d = np.zeros(states.shape, dtype=np.int8)

    at = states == S
    new[at & (u0 < alpha)] = H

    at = states == H
    decide = at & (u0 < beta)
    approve = u1 < q
    speak = u2 < np.where(approve, gamma_approve, gamma_refute)
    new[decide & ~speak] = R
    new[decide & speak & approve] = I
    new[decide & speak & ~approve] = M
    d[decide & speak & approve] = 1
    d[decide & speak & ~approve] = -1

    at = (states == I) | (states == M)
    new[at & (u0 < mu)] = R
    return new, d


def step_state(n: int, k: int, snap: Snapshot, params: ModelParams, rng: RngStream,
               t: int) -> tuple[Compartment, int]:
    """Single-cell step for agent ``n`` on snapshot row ``k`` in round ``t``.

    Uses the same draws as :func:`run_round` would for this cell.
    """
    if snap.is_influencer[n]:
        raise ValueError(f"agent {n} is an influencer")
    if not 0 <= k < len(snap.rumor_ids):
        raise ValueError(f"rumor row {k} is not active in this snapshot")
    rumor = int(snap.rumor_ids[k])
    state = Compartment(int(snap.states[k, n]))

    def u(slot):
        return rng.draw(t, rumor, n, slot)

    o_n = float(snap.opinions[n])
    v_k = float(snap.rumor_values[k])
    if state is Compartment.S:
        alpha = dynamics.exposure_probability(n, k, snap)
        return (Compartment.H if u(0) < alpha else Compartment.S), 0
    if state is Compartment.H:
        beta = dynamics.decision_probability(n, k, snap, params)
        if not u(0) < beta:
            return Compartment.H, 0
        side = 1 if u(1) < dynamics.approval_probability(o_n, v_k) else -1
        if u(2) < dynamics.expression_probability(o_n, v_k, side, params):
            return (Compartment.I if side == 1 else Compartment.M), side
        return Compartment.R, 0
    if state in (Compartment.I, Compartment.M):
        mu = dynamics.interest_loss_probability(n, k, snap, params)
        return (Compartment.R if u(0) < mu else state), 0
    return Compartment.R, 0


def begin_round(world: World, t: int, params: ModelParams, rumor_rate: int = 1):
    """Opinion update, weight update and rumor generation; returns the snapshot
    and the ids of rumors created this round."""
    normal = world.normal
    phi = params.rho * world.phi[normal] + world.pending_shift[normal]
    phi = dynamics.clamp_phi(phi)
    world.phi[normal] = phi
    world.opinions[normal] = 2.0 / np.pi * np.arctan(phi)
    world.pending_shift[:] = 0.0

    o = world.opinions
    world.weights = dynamics.weight_update(world.weights, o[:, None], o[None, :], params)
    np.fill_diagonal(world.weights, 0.0)

    created = []
    for origin in np.flatnonzero(world.is_influencer):
        for _ in range(rumor_rate):
            k = world.n_rumors
            if k >= len(world.rumor_value):
                raise RuntimeError("rumor capacity exhausted")
            world.rumor_value[k] = world.opinions[origin]
            world.rumor_origin[k] = origin
            world.rumor_birth[k] = t
            world.rumor_active[k] = True
            world.states[k, normal] = S
            world.n_rumors += 1
            created.append(k)

    return take_snapshot(world), np.array(created, dtype=np.int64)


def take_snapshot(world: World) -> Snapshot:
    act = world.active_rumors()
    states = world.states[act].copy()
    stances = STANCE_OF[np.clip(states, 0, 4)]
    stances[:, world.is_influencer] = 0
    stances[np.arange(len(act)), world.rumor_origin[act]] = 1
    return Snapshot(
        opinions=world.opinions.copy(),
        weights=world.weights.copy(),
        stances=stances,
        states=states,
        rumor_ids=act,
        rumor_values=world.rumor_value[act].copy(),
        is_influencer=world.is_influencer.copy(),
    )


def run_round(world: World, t: int, rng: RngStream, params: ModelParams,
              rumor_rate: int = 1, record_probabilities: bool = False) -> RoundTrace:
    snap, created = begin_round(world, t, params, rumor_rate)
    normal = world.normal
    act = snap.rumor_ids

    probs = dynamics.round_probabilities(snap, params)
    u = rng.round_grid(t, act, world.n_agents)
    new, d = transition(snap.states, probs.alpha, probs.beta, probs.q,
                        probs.gamma_approve, probs.gamma_refute, probs.mu,
                        u[..., 0], u[..., 1], u[..., 2])
    new[:, ~normal] = -1
    d[:, ~normal] = 0
    world.states[act] = new

    sgn = np.sign(snap.rumor_values[:, None] - snap.opinions[None, :])
    world.pending_shift += params.lam * (d * sgn).sum(axis=0)

    prev_n = snap.states[:, normal].astype(np.int64)
    new_n = new[:, normal].astype(np.int64)
    transitions = np.bincount((prev_n * 5 + new_n).ravel(), minlength=25).reshape(5, 5)
    counts = np.stack([(new_n == c).sum(axis=1) for c in range(5)], axis=1)

    done = (new_n == R).all(axis=1)
    expired = act[done]
    world.rumor_active[expired] = False
    world.rumor_expiry[expired] = t

    rows, cols = np.nonzero(d)
    decisions = np.stack([cols, act[rows], d[rows, cols]], axis=1).astype(np.int64)
    return RoundTrace(
        t=t,
        opinions=world.opinions.copy(),
        rumor_ids=act,
        counts=counts,
        decisions=decisions,
        created=created,
        expired=expired,
        transitions=transitions,
        probabilities=probs if record_probabilities else None,
    )


def run_simulation(cfg: RunConfig, run_index: int = 0,
                   record_probabilities: bool = False) -> SimulationResult:
    """Run ``cfg.rounds`` rounds from a fresh world seeded by (master seed, run index)."""
    validate_config(cfg)
    rng = RngStream.for_run(cfg.master_seed, run_index)
    # single-threaded BLAS keeps matrix products bit-reproducible
    with threadpool_limits(limits=1):
        world = init_world(cfg, ScenarioSpec.from_config(cfg), rng)
        traces = [
            run_round(world, t, rng, cfg.params, cfg.rumor_rate, record_probabilities)
            for t in range(1, cfg.rounds + 1)
        ]
    k = world.n_rumors
    return SimulationResult(
        config=cfg,
        run_index=run_index,
        opinions=world.opinions.copy(),
        weights=world.weights.copy(),
        is_influencer=world.is_influencer.copy(),
        traces=traces,
        rumor_value=world.rumor_value[:k].copy(),
        rumor_origin=world.rumor_origin[:k].copy(),
        rumor_birth=world.rumor_birth[:k].copy(),
        rumor_expiry=world.rumor_expiry[:k].copy(),
    )
