import sys
from pathlib import Path

import pytest

from tsmon import specs

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def sender():
    return specs.load("sender")


@pytest.fixture(scope="session")
def receiver():
    return specs.load("receiver")


@pytest.fixture(scope="session")
def leader():
    return specs.load("leader")


@pytest.fixture(scope="session")
def peer():
    return specs.load("peer")


@pytest.fixture(scope="session")
def auth():
    return specs.load("auth")


@pytest.fixture(scope="session")
def counting():
    return specs.load("counting")
