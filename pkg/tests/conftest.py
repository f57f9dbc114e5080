import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from topocharge import model_by_name, parse_kind
from topocharge.sampler import SimulationConfig, run_simulation

#: master seed of every Monte Carlo test in the suite
SEED = 20260811

_SIM_CACHE = {}


@pytest.fixture(scope="session")
def sim_run():
    """Cached full-size simulation runs shared across test modules.

    The acceptance criteria reuse one 200-realization run per
    (kind, model) combination; smaller unit-test runs get their own keys.
    """

    def get(kind_name, model_name, realizations=200, seed=SEED, window=40.0,
            margin=8.0, waves=256, bin_width=0.1):
        key = (kind_name, model_name, realizations, seed, window, margin, waves, bin_width)
        if key not in _SIM_CACHE:
            config = SimulationConfig(
                kind=parse_kind(kind_name), model=model_by_name(model_name),
                realizations=realizations, seed=seed, window=window,
                margin=margin, waves=waves, bin_width=bin_width,
            )
            _SIM_CACHE[key] = run_simulation(config)
        return _SIM_CACHE[key]

    return get
