import time

import numpy as np
import pytest
from hypothesis import settings

from hybridtrack.simulator import SimConfig, run

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")


@pytest.fixture(scope="session")
def scenario_timed():
    """The full 60 s tilted-circle run from the downward-facing start, with wall time."""
    start = time.perf_counter()
    log = run(SimConfig(), force=True)
    return log, time.perf_counter() - start


@pytest.fixture(scope="session")
def scenario_log(scenario_timed):
    return scenario_timed[0]


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_initial_configs(n=10, seed=11, t_final=20.0):
    """Feasible starts: random pose, velocity, body rate and lifting memory."""
    from hybridtrack.attitude import random_unit_quaternions

    gen = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        q, q_hat = random_unit_quaternions(2, gen)
        out.append(SimConfig(
            t_final=t_final,
            p0=tuple(gen.uniform(-6, 6, 3) + [0, 0, 6]),
            v0=tuple(gen.uniform(-2, 2, 3)),
            q0=tuple(q),
            omega0=tuple(gen.uniform(-2, 2, 3)),
            q_hat0=tuple(q_hat),
            m_star0=int(gen.choice([-1, 1])),
        ))
    return out


@pytest.fixture(scope="session")
def random_logs():
    return [run(cfg, force=True) for cfg in random_initial_configs()]
