import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fixtures import build_cube, build_oracles, foodmart_tables, walkthrough_tables


@pytest.fixture(scope="session")
def foodmart():
    return foodmart_tables()


@pytest.fixture(scope="session")
def foodmart_cube(foodmart):
    return build_cube(foodmart)


@pytest.fixture(scope="session")
def foodmart_oracles(foodmart):
    return build_oracles(foodmart)


@pytest.fixture(scope="session")
def walkthrough():
    return walkthrough_tables()


@pytest.fixture(scope="session")
def walkthrough_cube(walkthrough):
    return build_cube(walkthrough)
