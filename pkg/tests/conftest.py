import json

import pytest

from archselect import data_path
from archselect.gateway import Gateway, MockBackend
from archselect.io import load_matrix, load_requirements

PUBLISHED_UMS_CHOICES = {
    "CCG1": {
        "Deployment": "Microservices",
        "Data Caching": "Always-on",
        "Communication": "API-Call",
        "Data Replication": "Hot-Hot",
        "DBMS": "NoSQL",
        "Security": "Proactive",
        "Data Synch": "Real-time",
    },
    "CCG2": {
        "Deployment": "P2P",
        "Data Caching": "Offline First",
        "Communication": "Message-Based",
        "Data Replication": "Hot-Hot",
        "DBMS": "NoSQL",
        "Security": "Proactive",
        "Data Synch": "Batch Processing",
    },
}

# QA counts for the three evaluation systems (first CCG)
CASE_COUNTS = {
    "Bamboo": {"PE": 8, "CO": 7, "IC": 15, "RE": 13, "SE": 9, "MA": 16, "FL": 4, "CE": 2},
    "Aptana": {"PE": 32, "CO": 4, "IC": 36, "RE": 6, "SE": 1, "MA": 42, "FL": 7, "CE": 3},
    "Spring XD": {"PE": 143, "CO": 71, "IC": 201, "RE": 99, "SE": 54, "MA": 245, "FL": 82, "CE": 9},
}


@pytest.fixture(scope="session")
def ums_requirements_path():
    return str(data_path("ums_requirements.json"))


@pytest.fixture(scope="session")
def ums_fixture_path():
    return str(data_path("ums_mock.json"))


@pytest.fixture(scope="session")
def ums_matrix_path():
    return str(data_path("ums_matrix.csv"))


@pytest.fixture(scope="session")
def case_matrix_path():
    return str(data_path("case_study_matrix.csv"))


@pytest.fixture(scope="session")
def ums_fixture(ums_fixture_path):
    with open(ums_fixture_path) as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def ums_requirements(ums_requirements_path):
    return load_requirements(ums_requirements_path)


@pytest.fixture(scope="session")
def ums_matrix(ums_matrix_path):
    return load_matrix(ums_matrix_path)


@pytest.fixture(scope="session")
def case_matrix(case_matrix_path):
    return load_matrix(case_matrix_path)


@pytest.fixture
def ums_gateway(ums_fixture):
    return Gateway(MockBackend(ums_fixture))


@pytest.fixture
def mock_gateway():
    """Mock gateway with an empty fixture: every default applies."""
    return Gateway(MockBackend({}))


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(line)
