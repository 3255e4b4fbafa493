"""Exit criteria. 1, 2, 7 and 8 are exact; 3-6 are Monte-Carlo reproductions
(about 1000 baseline-size runs in total, several minutes on one core)."""

import functools
import math
import time

import mpmath
import numpy as np
import pytest

from shimr import dynamics as dyn
from shimr.cli import main
from shimr.engine import run_round, transition
from shimr.metrics import FinalState, pooled_correlation
from shimr.model import LEGAL_MASK, ModelParams, RunConfig
from shimr.rng import RngStream
from shimr.scenarios import ScenarioSpec, apply_scenario, init_world

from conftest import H, I, M, R, S

mpmath.mp.dps = 50
REL = 1e-12
BASELINE = RunConfig(n_agents=100, rounds=150, runs=100,
                     params=ModelParams(lam=1, rho=0.5, beta_min=0.01, xi=0.8,
                                        eta=0.1, threshold=1.0, silence=1.0))
_timings = {}


@functools.lru_cache(maxsize=None)
def ensemble(cfg: RunConfig):
    from shimr.engine import run_simulation

    start = time.perf_counter()
    finals = [FinalState.of(run_simulation(cfg, i)) for i in range(cfg.runs)]
    _timings[cfg] = time.perf_counter() - start
    return pooled_correlation(finals)


def with_params(**kw):
    return BASELINE.replace(params=BASELINE.params.replace(**kw))


def rel_err(got, ref):
    ref = mpmath.mpf(ref)
    if ref == 0:
        return abs(mpmath.mpf(got))
    return abs((mpmath.mpf(got) - ref) / ref)


# criterion 1 ---------------------------------------------------------------

def _oracle_cases(rng):
    mpf = mpmath.mpf

    def shift_case():
        d, o, v, lam = rng.choice([-1, 0, 1]), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.01, 5)
        p = ModelParams(lam=lam)
        ref = mpf(lam) * d * mpmath.sign(mpf(v) - mpf(o))
        return dyn.opinion_shift(int(d), o, v, p), ref

    def opinion_case():
        rho, phi = rng.uniform(0.01, 0.99), rng.normal(0, 3)
        shifts = list(rng.choice([-1.0, 1.0], rng.integers(0, 6)))
        _, o = dyn.opinion_update(phi, shifts, ModelParams(rho=rho))
        ref = 2 / mpmath.pi * mpmath.atan(mpf(rho) * mpf(phi) + sum(map(mpf, shifts)))
        return o, ref

    def weight_case():
        eta, thr, w = rng.uniform(0.01, 5), rng.uniform(0.01, 2), rng.uniform()
        om, on = rng.uniform(-1, 1), rng.uniform(-1, 1)
        got = dyn.weight_update(w, om, on, ModelParams(eta=eta, threshold=thr))
        delta = abs(mpf(om) - mpf(on))
        if delta <= thr:
            ref = 1 - mpmath.exp(mpf(eta) * (delta - mpf(thr))) * (1 - mpf(w))
        else:
            ref = mpmath.exp(mpf(eta) * (mpf(thr) - delta)) * mpf(w)
        return got, ref

    def alpha_case():
        w = rng.uniform(size=rng.integers(1, 40)) ** rng.uniform(0.2, 5)
        ref = 1 - mpmath.fprod(1 - mpf(x) for x in w)
        return dyn.exposure_from_weights(w), ref

    def beta_case():
        o, sigma, bmin = rng.uniform(-1, 1), rng.uniform(), rng.uniform(1e-4, 1)
        ref = max(abs(mpf(o)) * (1 - mpf(sigma)), mpf(bmin))
        return dyn.decision_from(o, sigma, bmin), ref

    def sigma_case():
        n_agents = int(rng.integers(3, 200))
        k = int(rng.integers(1, n_agents))
        w = rng.uniform(size=k)
        s = rng.choice([-1, 1], k)
        got = dyn.deviation_from_stances(w, s, n_agents, clamp=False)
        mean = sum(mpf(int(x)) for x in s) / (n_agents - 1)
        num = sum(mpf(a) * (int(b) - mean) ** 2 for a, b in zip(w, s))
        ref = mpmath.sqrt(num / sum(mpf(a) for a in w))
        return got, ref

    def q_case():
        o, v = rng.uniform(-1, 1), rng.uniform(-1, 1)
        return dyn.approval_probability(o, v), 1 - abs(mpf(v) - mpf(o)) / 2

    def gamma_case():
        o, v, s, g = rng.uniform(-1, 1), rng.uniform(-1, 1), int(rng.choice([-1, 1])), rng.uniform(0.01, 10)
        got = dyn.expression_probability(o, v, s, ModelParams(silence=g))
        return got, mpmath.exp(-mpf(g) * abs(mpf(o) - s * mpf(v)))

    def mu_case():
        a, g, xi = rng.uniform(), rng.uniform(), rng.uniform(1e-3, 1)
        return dyn.interest_loss_from(a, g, xi), 1 - mpf(xi) * mpf(a) * mpf(g)

    cases = (shift_case, opinion_case, weight_case, alpha_case, beta_case, sigma_case,
             q_case, gamma_case, mu_case)
    return {f.__name__.removesuffix("_case"): f for f in cases}


@pytest.mark.criterion(1, "formula oracles, 1000 inputs each, rel err < 1e-12")
def test_formula_oracles(record_property):
    rng = np.random.default_rng(20240601)
    worst = {}
    for name, case in _oracle_cases(rng).items():
        errs = [rel_err(*case()) for _ in range(1000)]
        worst[name] = float(max(errs))
    record_property("detail", "worst " + " ".join(f"{k}={v:.1e}" for k, v in worst.items()))
    assert all(v < REL for v in worst.values()), worst


# criterion 2 ---------------------------------------------------------------

@pytest.mark.criterion(2, "state-machine branch frequencies within 4 sigma")
def test_state_machine_frequencies(record_property):
    n = 100_000
    alpha, beta, q, gamma, mu = 0.3, 0.4, 0.6, 0.7, 0.2
    expected = {
        S: {S: 1 - alpha, H: alpha},
        H: {H: 1 - beta, I: beta * q * gamma, M: beta * (1 - q) * gamma, R: beta * (1 - gamma)},
        I: {I: 1 - mu, R: mu},
        M: {M: 1 - mu, R: mu},
        R: {R: 1.0},
    }
    one = np.ones(n)
    worst = 0.0
    for state, branches in expected.items():
        u = RngStream(77 + state).uniforms(3, 3 * n).reshape(3, n)
        new, d = transition(np.full(n, state, dtype=np.int8), alpha * one, beta * one, q * one,
                            gamma * one, gamma * one, mu * one, *u)
        assert set(np.unique(new)) <= set(branches)
        for target, p in branches.items():
            freq = np.mean(new == target)
            sd = math.sqrt(p * (1 - p) / n)
            z = abs(freq - p) / sd if sd > 0 else (0.0 if freq == p else math.inf)
            worst = max(worst, z)
            assert z <= 4, (state, target, freq, p)
        if state == H:
            assert np.array_equal(d == 1, new == I) and np.array_equal(d == -1, new == M)
        else:
            assert not d.any()
    record_property("detail", f"max |z| = {worst:.2f}")


# criteria 3-6 --------------------------------------------------------------

@pytest.mark.slow
@pytest.mark.criterion(3, "echo chamber: baseline pooled r in [-0.75, -0.35]")
def test_echo_chamber(record_property):
    s = ensemble(BASELINE)
    record_property("detail", f"pooled r = {s.pooled_r:.3f}, "
                              f"mean run r = {s.mean_run_r:.3f}, {_timings[BASELINE]:.0f}s")
    assert s.pooled_r < 0
    assert -0.75 <= s.pooled_r <= -0.35


@pytest.mark.slow
@pytest.mark.criterion(4, "sensitivity ordering over eta, O, Gamma")
def test_sensitivity_ordering(record_property):
    grid = (0.1, 0.5, 1.0)
    eta = [ensemble(with_params(eta=x)).pooled_r for x in grid]
    thr = [ensemble(with_params(threshold=x)).pooled_r for x in grid]
    gam = [ensemble(with_params(silence=x)).pooled_r for x in grid]
    record_property("detail", "eta " + "/".join(f"{r:.3f}" for r in eta)
                    + " O " + "/".join(f"{r:.3f}" for r in thr)
                    + " Gamma " + "/".join(f"{r:.3f}" for r in gam))
    assert eta[0] > eta[1] > eta[2]
    assert thr[0] >= thr[1] >= thr[2]
    assert all(r < 0 for r in gam)
    assert max(gam) - min(gam) <= 0.15


@pytest.mark.slow
@pytest.mark.criterion(5, "scenario ordering: radical controversy most negative")
def test_scenario_ordering(record_property):
    names = ["radical-controversy", "radical-unipolar", "unpaired-controversy",
             "rational-controversy"]
    rs = {n: ensemble(apply_scenario(BASELINE, n)).pooled_r for n in names}
    record_property("detail", " ".join(f"{n}={r:.3f}" for n, r in rs.items()))
    assert all(r < 0 for r in rs.values())
    others = [rs[n] for n in names[1:]]
    assert rs["radical-controversy"] < min(others)


@pytest.mark.slow
@pytest.mark.criterion(6, "opinion distribution shape across scenarios")
def test_distribution_shape(record_property):
    base = ensemble(BASELINE)
    uni = ensemble(apply_scenario(BASELINE, "radical-unipolar"))
    unp = ensemble(apply_scenario(BASELINE, "unpaired-controversy"))
    record_property("detail", f"baseline mean={base.opinion_mean:.3f} skew={base.opinion_skewness:.3f}; "
                              f"mean|o| unipolar={uni.mean_abs_opinion:.3f} vs "
                              f"controversy={base.mean_abs_opinion:.3f}; "
                              f"unpaired mean={unp.opinion_mean:.3f}")
    assert abs(base.opinion_mean) < 0.1
    assert abs(base.opinion_skewness) < 0.3
    assert uni.mean_abs_opinion < base.mean_abs_opinion
    assert unp.opinion_mean < 0


# criterion 7 ---------------------------------------------------------------

def _random_config(rng):
    n = int(rng.integers(2, 31))
    n_inf = int(rng.integers(0, min(4, n)))
    params = ModelParams(
        lam=float(rng.uniform(0.05, 5)), rho=float(rng.uniform(0.01, 0.99)),
        eta=float(rng.uniform(0.01, 5)), threshold=float(rng.uniform(0.01, 2.5)),
        silence=float(rng.uniform(0.01, 10)), beta_min=float(rng.uniform(1e-3, 1)),
        xi=float(rng.uniform(0.01, 1)),
        stance_norm=str(rng.choice(["population", "discussers"])),
    )
    return RunConfig(n_agents=n, rounds=int(rng.integers(1, 31)), runs=1,
                     influencers=tuple(float(x) for x in rng.uniform(-1, 1, n_inf)),
                     master_seed=int(rng.integers(0, 2**63)), params=params,
                     rumor_rate=int(rng.integers(1, 4)), scenario="custom")


@pytest.mark.criterion(7, "invariant fuzz over 100 random configs")
def test_invariant_fuzz(record_property):
    rng = np.random.default_rng(7)
    rounds_checked = 0
    for i in range(100):
        cfg = _random_config(rng)
        rs = RngStream.for_run(cfg.master_seed, 0)
        world = init_world(cfg, ScenarioSpec.from_config(cfg), rs)
        normal = world.normal
        bound = cfg.rumor_rate * cfg.n_influencers * cfg.rounds
        expired = set()
        for t in range(1, cfg.rounds + 1):
            tr = run_round(world, t, rs, cfg.params, cfg.rumor_rate, record_probabilities=True)
            p = tr.probabilities
            for arr in (p.alpha, p.sigma, p.beta, p.q, p.gamma_approve, p.gamma_refute, p.mu):
                assert np.all((arr >= 0) & (arr <= 1)), cfg
            assert np.all((world.weights >= 0) & (world.weights <= 1))
            assert np.all(np.diag(world.weights) == 0)
            assert not tr.transitions[~LEGAL_MASK].any(), cfg
            assert np.all(np.abs(world.opinions[normal]) < 1)
            assert np.array_equal(world.opinions[~normal], np.array(cfg.influencers))
            assert len(tr.rumor_ids) <= bound and world.n_rumors <= bound
            assert not expired & set(tr.rumor_ids.tolist())
            expired |= set(tr.expired.tolist())
            rounds_checked += 1
    record_property("detail", f"{rounds_checked} rounds checked, 0 violations")


# criterion 8 ---------------------------------------------------------------

@pytest.mark.criterion(8, "byte-identical outputs across repeats and parallelism 1/8")
def test_determinism(tmp_path, record_property):
    args = ["montecarlo", "--agents", "30", "--rounds", "30", "--runs", "8", "--seed", "123456789"]
    dirs = []
    for tag, par in (("a", 1), ("b", 1), ("c", 8)):
        out = tmp_path / tag
        assert main([*args, "--parallelism", str(par), "--out", str(out)]) == 0
        dirs.append(out)
    names = sorted(p.name for p in dirs[0].iterdir())
    for other in dirs[1:]:
        assert sorted(p.name for p in other.iterdir()) == names
        for name in names:
            assert (dirs[0] / name).read_bytes() == (other / name).read_bytes(), name
    record_property("detail", f"{len(names)} files identical over 3 invocations")
