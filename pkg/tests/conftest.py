import json
from pathlib import Path

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")

VECTORS = Path(__file__).parent / "vectors"


@pytest.fixture(scope="session")
def rfc_vectors():
    return json.loads((VECTORS / "rfc_vectors.json").read_text())
