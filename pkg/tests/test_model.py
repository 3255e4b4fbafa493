import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shimr.model import (
    LEGAL_MASK,
    PHI_CAP,
    AgentRecord,
    Compartment,
    ConfigError,
    ModelParams,
    Role,
    RumorRecord,
    RunConfig,
    config_violations,
    is_legal,
    opinion_from_phi,
    phi_from_opinion,
    stance,
    validate_config,
)


def test_table1_defaults_are_valid():
    cfg = RunConfig(n_agents=100, rounds=150, params=ModelParams(lam=1, rho=0.5, beta_min=0.01, xi=0.8))
    assert validate_config(cfg) is cfg


def test_rho_zero_rejected():
    with pytest.raises(ConfigError) as exc:
        ModelParams(rho=0.0)
    assert "rho out of (0,1)" in exc.value.violations


def test_xi_one_is_valid():
    assert ModelParams(xi=1.0).xi == 1.0


def test_all_param_violations_reported_together():
    with pytest.raises(ConfigError) as exc:
        ModelParams(rho=1.0, xi=0.0, eta=-1, beta_min=2, lam=0, threshold=0, silence=-3)
    assert len(exc.value.violations) == 7


def test_config_violations_are_complete():
    cfg = RunConfig(n_agents=1, rounds=0, runs=0, influencers=(1.5,), rumor_rate=0)
    errs = config_violations(cfg)
    joined = " | ".join(errs)
    for needle in ("n_agents", "rounds", "runs", "rumor_rate", "out of [-1,1]", "influencer count"):
        assert needle in joined
    with pytest.raises(ConfigError):
        validate_config(cfg)


def test_influencer_count_must_leave_a_normal_agent():
    assert config_violations(RunConfig(n_agents=2, influencers=(-1.0, 1.0)))
    assert not config_violations(RunConfig(n_agents=3, influencers=(-1.0, 1.0)))


def test_seed_must_fit_u64():
    assert config_violations(RunConfig(master_seed=2**64))
    assert not config_violations(RunConfig(master_seed=2**64 - 1))


def test_config_hash_tracks_content():
    a = RunConfig()
    assert a.config_hash() == RunConfig().config_hash()
    assert a.config_hash() != a.replace(master_seed=2).config_hash()
    assert a.config_hash() != a.replace(params=a.params.replace(eta=0.5)).config_hash()


@pytest.mark.parametrize("phi, expected", [(0.0, 0.0), (1.5, 0.6256659163780023676), (1.0, 0.5)])
def test_opinion_from_phi(phi, expected):
    assert opinion_from_phi(phi) == pytest.approx(expected, rel=1e-15, abs=1e-300)


def test_opinion_from_phi_odd():
    for phi in (0.3, 2.0, 1e6):
        assert opinion_from_phi(-phi) == -opinion_from_phi(phi)


def test_opinion_from_phi_rejects_nonfinite():
    with pytest.raises(ValueError):
        opinion_from_phi(math.inf)


@pytest.mark.parametrize("o, expected", [(0.0, 0.0), (0.5, 1.0), (0.6256659163780023676, 1.5)])
def test_phi_from_opinion(o, expected):
    assert phi_from_opinion(o) == pytest.approx(expected, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("o", [1.0, -1.0, 1.2])
def test_phi_from_opinion_rejects_closed_ends(o):
    with pytest.raises(ValueError):
        phi_from_opinion(o)


def test_round_trip_10k():
    rng = np.random.default_rng(0)
    for o in rng.uniform(-0.999, 0.999, 10_000):
        assert abs(opinion_from_phi(phi_from_opinion(o)) - o) < 1e-12


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_opinion_from_phi_increasing(a, b):
    if a < b:
        assert opinion_from_phi(a) <= opinion_from_phi(b)
    assert -1.0 <= opinion_from_phi(a) <= 1.0


def test_phi_cap_keeps_opinion_inside():
    assert opinion_from_phi(PHI_CAP) < 1.0
    assert opinion_from_phi(-PHI_CAP) > -1.0


def test_legal_transitions():
    legal = {(a, b) for a in Compartment for b in Compartment if is_legal(a, b)}
    assert len(legal) == 11
    assert not is_legal(Compartment.S, Compartment.I)
    assert not is_legal(Compartment.R, Compartment.S)
    assert not is_legal(Compartment.I, Compartment.M)
    assert LEGAL_MASK.sum() == 11


def test_stance_indicator():
    assert [stance(c) for c in Compartment] == [0, 0, 1, -1, 0]


def test_records():
    a = AgentRecord(0, Role.INFLUENCER, -1.0)
    assert a.is_influencer
    r = RumorRecord(id=3, value=1.0, origin=1, birth_round=2)
    r.expire(5)
    assert not r.active and r.expiry_round == 5
    with pytest.raises(RuntimeError):
        r.expire(6)
