from pathlib import Path

import pytest

from nvcache_dse.cachemodel import load_anchor_curves
from nvcache_dse.workload import parse_profile_csv

DATA = Path(__file__).resolve().parents[1] / "src" / "nvcache_dse" / "data"

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def curves():
    return load_anchor_curves((DATA / "anchors.csv").read_text())


@pytest.fixture(scope="session")
def workloads():
    return parse_profile_csv((DATA / "profiles.csv").read_text())


@pytest.fixture(scope="session")
def batch_family():
    return parse_profile_csv((DATA / "alexnet_batch.csv").read_text())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
