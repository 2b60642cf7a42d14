import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

from bebms.types import Dataset, EmissionParams  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_params(rng, N):
    return EmissionParams(
        theta_mean=rng.normal(2.0, 1.0, N),
        theta_std=rng.uniform(0.5, 1.5, N),
        phi_mean=rng.normal(-1.0, 1.0, N),
        phi_std=rng.uniform(0.5, 1.5, N),
    )


def random_dataset(rng, J, N, missing_rate=0.0, n_controls=None):
    values = rng.normal(0.5, 2.0, (J, N))
    labels = np.ones(J, np.int64)
    n_controls = max(1, J // 3) if n_controls is None else n_controls
    labels[:n_controls] = 0
    if missing_rate:
        mask = rng.random((J, N)) < missing_rate
        mask[0] = False  # keep every column partly observed
        values[mask] = np.nan
    return Dataset(values, labels)


@pytest.fixture
def small_problem(rng):
    """N=3, T=2, J=6 with random params and priors."""
    from bebms.types import MixturePriors

    N, T, J = 3, 2, 6
    params = random_params(rng, N)
    data = random_dataset(rng, J, N, n_controls=2)
    ranks = np.array([rng.permutation(N) for _ in range(T)])
    priors = MixturePriors(rng.dirichlet(np.ones(T)), rng.dirichlet(np.ones(N), size=T))
    return data, ranks, priors, params


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    lines = acceptance_log.summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
