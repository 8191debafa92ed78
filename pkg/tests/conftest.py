import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ucnum import two_node_benchmark


@pytest.fixture(scope="session")
def benchmark_env():
    return two_node_benchmark()
