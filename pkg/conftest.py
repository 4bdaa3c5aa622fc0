import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from src.kronml.characters import character_table  # noqa: E402
from src.kronml.dataset import LabeledDataset  # noqa: E402


@pytest.fixture(scope='session')
def table_of():
    """Character tables by degree, shared across the session."""
    return character_table


@pytest.fixture
def tiny_v1():
    """Twelve n=3 rows in the a=1 encoding, six of each class."""
    rng = np.random.default_rng(7)
    features = rng.integers(0, 4, size=(12, 9))
    labels = np.array([0, 1] * 6)
    return LabeledDataset(3, 1, features, labels)
