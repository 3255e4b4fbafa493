import numpy as np
import pytest

from shimr.dynamics import Snapshot
from shimr.model import STANCE_OF, Compartment


def make_snapshot(opinions, weights, states, values, n_influencers=0, origins=None):
    """Hand-built snapshot; ``states`` is (K, N) compartment codes (-1 for influencers)."""
    opinions = np.asarray(opinions, dtype=float)
    states = np.atleast_2d(np.asarray(states, dtype=np.int8))
    is_inf = np.zeros(len(opinions), dtype=bool)
    is_inf[:n_influencers] = True
    stances = STANCE_OF[np.clip(states, 0, 4)]
    stances[:, is_inf] = 0
    if origins is not None:
        for k, origin in enumerate(origins):
            stances[k, origin] = 1
    return Snapshot(
        opinions=opinions,
        weights=np.asarray(weights, dtype=float),
        stances=stances,
        states=states,
        rumor_ids=np.arange(len(states)),
        rumor_values=np.asarray(values, dtype=float),
        is_influencer=is_inf,
    )


@pytest.fixture
def snapshot_factory():
    return make_snapshot


S, H, I, M, R = (int(c) for c in Compartment)


_criteria = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None and rep.when == "call":
        detail = dict(rep.user_properties).get("detail", "")
        _criteria.append((marker.args[0], marker.args[1], rep.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, title, passed, detail in sorted(_criteria, key=lambda c: c[0]):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {title} {detail}".rstrip())
