import pytest

import decoysafe as ds


@pytest.fixture(scope="session")
def record():
    return ds.load_record(ds.bundled_record_path())


@pytest.fixture(scope="session")
def rates(record):
    return record.to_observed_rates()


@pytest.fixture(scope="session")
def poisson_pair():
    return ds.poisson_distribution(0.2), ds.poisson_distribution(0.6)


@pytest.fixture(scope="session")
def attack_tally():
    """Small block-attack run shared across tests that only read it."""
    pattern = ds.two_block_pattern(0.2, 0.6, 0.1, 1000)
    channel = ds.two_block_attack_channel(0.2, 0.6, 0.1, 0.05)
    tally = ds.simulate(2_000_000, 0.1, 0.45, 0.45, pattern, channel, seed=7)
    return tally, pattern, channel
