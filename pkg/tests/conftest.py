import pytest

from crnscale import gallery


@pytest.fixture(scope="session")
def goutsias():
    return gallery.goutsias()


@pytest.fixture(scope="session")
def table1():
    return gallery.goutsias_table1()


@pytest.fixture(scope="session")
def table3():
    return gallery.goutsias_table3()
