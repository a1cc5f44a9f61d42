import os
from pathlib import Path

import numpy as np
import pytest

from klmat.data import RatingsDataset
from klmat.synthetic import synthetic_dataset

REPO = Path(__file__).resolve().parents[1]


def _movielens_path(env_var, subdir, filename):
    if os.environ.get(env_var):
        return Path(os.environ[env_var])
    roots = [os.environ.get("KLMAT_DATA_DIR"), REPO / "data", Path.home() / ".cache" / "klmat"]
    for root in filter(None, roots):
        candidate = Path(root) / subdir / filename
        if candidate.exists():
            return candidate
    return None


ML_SMALL = _movielens_path("KLMAT_MOVIELENS_SMALL", "ml-latest-small", "ratings.csv")
ML_1M = _movielens_path("KLMAT_MOVIELENS_1M", "ml-1m", "ratings.dat")


def require(path, name):
    """Return the dataset path or fail: the criterion cannot be checked without it."""
    if path is None or not Path(path).exists():
        pytest.fail(
            f"{name} not found; set KLMAT_DATA_DIR (containing ml-latest-small/ratings.csv "
            f"and ml-1m/ratings.dat) or KLMAT_MOVIELENS_SMALL / KLMAT_MOVIELENS_1M",
            pytrace=False,
        )
    return Path(path)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_synthetic():
    return synthetic_dataset(num_users=60, num_items=150, mean_per_user=25, seed=3)


@pytest.fixture
def tiny_dataset():
    return RatingsDataset.from_triplets(
        [(1, 10, 4.0), (1, 11, 2.0), (2, 10, 5.0), (2, 12, 1.0), (3, 11, 3.5), (3, 12, 4.5)]
    )


# One PASS/FAIL line per acceptance criterion, printed after the run.
_criteria: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    ok = call.excinfo is None
    if call.when == "setup" and ok:
        return
    if call.when == "call" or not ok:
        prev = _criteria.get(number, (title, True))
        _criteria[number] = (title, prev[1] and ok)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok = _criteria[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}")
