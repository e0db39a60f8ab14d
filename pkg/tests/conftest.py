import json
import pathlib

import pytest


@pytest.fixture(scope="session")
def fixtures():
    """Frozen oracle values; regenerate with scripts/gen_fixtures.py."""
    path = pathlib.Path(__file__).parent / "fixtures.json"
    return json.loads(path.read_text())
