import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cdscan.lexicon import load_lexicon  # noqa: E402
from cdscan.matcher import build_index  # noqa: E402


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon()


@pytest.fixture(scope="session")
def index(lexicon):
    return build_index(lexicon)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
