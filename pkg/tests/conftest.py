import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from diamond import primitives


@pytest.fixture(autouse=True)
def _reset_counters():
    primitives.counters.reset()
    yield
