import os
import sys

import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from helpers import FIXTURE_HEADER, fixture_rows, write_csv


@pytest.fixture
def ratings_csv(tmp_path):
    """5 users, 10 items, 50 timestamped ratings on a 1-5 scale with an `hour` context column."""
    return write_csv(tmp_path / "ratings.csv", FIXTURE_HEADER, fixture_rows())


@pytest.fixture
def logged_csv(tmp_path):
    """Two logged decisions with propensities."""
    return write_csv(
        tmp_path / "logged.csv",
        ["user_id", "item_id", "feedback", "timestamp", "propensity"],
        [("c1", "a1", 1.0, 1, 0.5), ("c2", "a2", 0.5, 2, 0.25)],
    )
