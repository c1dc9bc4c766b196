import os

import pytest

os.environ.setdefault("STLSIM_WORKERS", "1")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running end-to-end checks")
    config.addinivalue_line("markers", "acceptance: acceptance criteria")


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(12345)
