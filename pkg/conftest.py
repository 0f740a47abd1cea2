"""
Shared pytest fixtures
Runs, logs and reports go to a throwaway FRACJAC_HOME.
"""
import os
import tempfile

os.environ.setdefault("FRACJAC_HOME", tempfile.mkdtemp(prefix="fracjac-test-"))

import numpy as np
import pytest

from domain_field import make_domain


@pytest.fixture(scope="session")
def unit_square():
    return make_domain("rectangle", {"lo": (0.0, 0.0), "hi": (1.0, 1.0)}, 64)


@pytest.fixture(scope="session")
def centered_square():
    return make_domain("rectangle", {"lo": (-1.0, -1.0), "hi": (1.0, 1.0)}, 64)


@pytest.fixture(scope="session")
def unit_disk():
    return make_domain("disk", {"center": (0.0, 0.0), "radius": 1.0}, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(np.random.SeedSequence(7))


@pytest.fixture
def run_db(tmp_path):
    from run_log_db import RunLogDB
    return RunLogDB(tmp_path / "runs.db")
