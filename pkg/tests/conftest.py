import pytest

from sawpivot.enumeration import enumerate_walks
from sawpivot.gmethod import load_fixture


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: expensive acceptance checks (deselect with -m 'not slow')")


@pytest.fixture(scope="session")
def space_d2_n2():
    return enumerate_walks(2, 2)


@pytest.fixture(scope="session")
def space_d2_n3():
    return enumerate_walks(2, 3)


@pytest.fixture(scope="session")
def space_d2_n4():
    return enumerate_walks(2, 4)


@pytest.fixture(scope="session")
def rational_fixtures():
    return {name: load_fixture(name) for name in ("uniform", "sparse", "mixed", "two_block")}
