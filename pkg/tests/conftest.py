import numpy as np
import pytest

from tweezerlab import DEFAULT_PARAMS, Protocol, physics


@pytest.fixture(scope="session")
def grid64():
    return physics.build_grid(64)


@pytest.fixture(scope="session")
def grid512():
    return physics.build_grid(512)


@pytest.fixture(scope="session")
def states64(grid64):
    return physics.initial_and_target_states(grid64, DEFAULT_PARAMS)


@pytest.fixture(scope="session")
def states512(grid512):
    return physics.initial_and_target_states(grid512, DEFAULT_PARAMS)


def random_protocol(rng, duration=0.05, n_steps=20,
                    params=DEFAULT_PARAMS) -> Protocol:
    hw = params.domain_half_width
    return Protocol(duration,
                    rng.uniform(-hw, hw, n_steps),
                    rng.uniform(params.amp_min, params.amp_max, n_steps))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def report(capfd):
    """Print one PASS/FAIL line per acceptance criterion through capture."""
    def _report(name, passed, detail=""):
        verdict = "PASS" if passed else "FAIL"
        suffix = f" ({detail})" if detail else ""
        with capfd.disabled():
            print(f"\nACCEPTANCE {name}: {verdict}{suffix}")
        assert passed, f"{name}: {detail}"
    return _report
