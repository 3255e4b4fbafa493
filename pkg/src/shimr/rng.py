"""Counter-based random streams built on SplitMix64.

Every draw is a pure function of (run seed, domain, coordinates), so the
value an agent sees for a rumor in a round does not depend on how many other
draws happened before it or in what order cells are visited.

Pinned construction (all arithmetic mod 2**64):

    mix(z)       SplitMix64 output function (Stafford variant 13)
    output(s, i) = mix(s + (i + 1) * 0x9E3779B97F4A7C15)   i-th SplitMix64 output from state s
    run_seed(master, r)  = mix(master ^ mix((r + 1) * 0x9E3779B97F4A7C15))
    substream(seed, a, b) = mix(mix(seed ^ mix(a)) ^ mix(b ^ 0xD1B54A32D192ED03))
    uniform(h)   = ((h >> 12) + 0.5) * 2**-52                   always in (0, 1)

Round draws for agent n, rumor k, round t, slot j (0..2) are
``uniform(output(substream(run_seed, ROUND_DOMAIN + t, k), 3*n + j))``.
Normals use Box-Muller on consecutive output pairs.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_B_SALT = np.uint64(0xD1B54A32D192ED03)
_S30, _S27, _S31, _S12 = (np.uint64(s) for s in (30, 27, 31, 12))

ROUND_DOMAIN = 1 << 32
INIT_OPINION_DOMAIN = 1
INIT_WEIGHT_DOMAIN = 2

SLOTS_PER_CELL = 3


def mix(z):
    """SplitMix64 finalizer over a uint64 array (or anything coercible)."""
    z = np.atleast_1d(np.asarray(z, dtype=np.uint64))
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def output(state, index):
    """The ``index``-th output of a SplitMix64 generator started at ``state``."""
    state = np.atleast_1d(np.asarray(state, dtype=np.uint64))
    index = np.atleast_1d(np.asarray(index, dtype=np.uint64))
    return mix(state + (index + np.uint64(1)) * GOLDEN)


def to_unit(h):
    """Top 52 bits mapped to bin centres, strictly inside (0, 1)."""
    return ((h >> _S12).astype(np.float64) + 0.5) * 2.0**-52


def run_seed(master_seed: int, run_index: int) -> int:
    r = np.asarray([run_index + 1], dtype=np.uint64) * GOLDEN
    return int(mix(np.uint64(master_seed) ^ mix(r))[0])


def substream(seed, a, b):
    seed = np.asarray(seed, dtype=np.uint64)
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    return mix(mix(seed ^ mix(a)) ^ mix(b ^ _B_SALT))


class RngStream:
    """Deterministic draw source for one simulation run."""

    def __init__(self, seed: int):
        self.seed = int(seed) & (2**64 - 1)

    @classmethod
    def for_run(cls, master_seed: int, run_index: int) -> RngStream:
        return cls(run_seed(master_seed, run_index))

    def uniforms(self, domain: int, count: int, key: int = 0) -> np.ndarray:
        """``count`` consecutive uniforms from the (domain, key) substream."""
        s = substream(self.seed, domain, key)
        return to_unit(output(s, np.arange(count, dtype=np.uint64)))

    def normals(self, domain: int, count: int, key: int = 0) -> np.ndarray:
        """Standard normal draws via Box-Muller on consecutive uniform pairs."""
        u = self.uniforms(domain, 2 * count, key)
        u1, u2 = u[0::2], u[1::2]
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def round_keys(self, t: int, rumors) -> np.ndarray:
        rumors = np.asarray(rumors, dtype=np.uint64)
        return substream(self.seed, ROUND_DOMAIN + t, rumors)

    def cell_draws(self, t: int, rumors, agents, slot: int) -> np.ndarray:
        """Uniform for slot ``slot`` of each (rumor, agent) cell in round ``t``.

        ``rumors`` and ``agents`` broadcast against each other.
        """
        rumors, agents = np.broadcast_arrays(np.asarray(rumors), np.asarray(agents))
        keys = self.round_keys(t, rumors.ravel())
        idx = agents.ravel().astype(np.uint64) * np.uint64(SLOTS_PER_CELL) + np.uint64(slot)
        return to_unit(output(keys, idx)).reshape(rumors.shape)

    def draw(self, t: int, rumor: int, agent: int, slot: int) -> float:
        return float(self.cell_draws(t, [rumor], [agent], slot)[0])

    def round_grid(self, t: int, rumors, n_agents: int) -> np.ndarray:
        """All slot draws for every (rumor, agent) pair: shape (K, N, 3)."""
        keys = self.round_keys(t, rumors)
        idx = np.arange(n_agents * SLOTS_PER_CELL, dtype=np.uint64)
        h = output(keys[:, None], idx[None, :])
        return to_unit(h).reshape(len(keys), n_agents, SLOTS_PER_CELL)
