import numpy as np
import pytest

from coxprior.dataset import Dataset, Group, SimulationConfig, SurvivalRecord, simulate

CRT, HFRT = Group.CRT, Group.HFRT


def make(rows, provenance="fixture"):
    """Build a Dataset from (time, event, z) triples."""
    return Dataset(tuple(SurvivalRecord(HFRT if z else CRT, t, d) for t, d, z in rows), provenance)


@pytest.fixture
def three():
    # (t=1, event, HFRT), (t=2, event, CRT), (t=3, censored, HFRT)
    return make([(1, 1, 1), (2, 1, 0), (3, 0, 1)])


@pytest.fixture
def no_events():
    return make([(1, 0, 1), (2, 0, 0), (3, 0, 1), (4, 0, 0)])


def random_datasets(count, seed, max_n=40, ties=False):
    """Small synthetic datasets with both arms present and events in each arm."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = int(rng.integers(4, max_n + 1))
        z = rng.integers(0, 2, n)
        t = rng.exponential(10, n) * np.exp(-rng.normal(0, 0.7) * z)
        if ties:
            t = np.ceil(t)
        d = (rng.random(n) < 0.75).astype(int)
        if min(d[z == 0].sum(), d[z == 1].sum()) == 0:
            continue
        out.append(make(zip(t + 0.01, d, z), provenance=f"random#{len(out)}"))
    return out


def trial_like(seed, log_hr=1.0):
    return simulate(SimulationConfig(n_crt=8, n_hfrt=20, true_log_hr=log_hr, seed=seed))


# acceptance results, printed once at the end of the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line)
