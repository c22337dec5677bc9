import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from helpers import mini_backend  # noqa: E402


def pytest_collection_modifyitems(config, items):
    if os.environ.get("MWELIT_SIDECAR_URL"):
        return
    skip = pytest.mark.skip(reason="MWELIT_SIDECAR_URL not set")
    for item in items:
        if "integration" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def synthetic_backend():
    return mini_backend()
