import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from devvoi.data import Dataset  # noqa: E402


@pytest.fixture
def six_rows():
    """Six rows, one continuous predictor, no separation."""
    x = np.column_stack([np.ones(6), [-1.0, -0.5, 0.0, 0.5, 1.0, 1.5]])
    y = np.array([1.0, 0.0, 0.0, 1.0, 0.0, 1.0])
    return Dataset(x, y)


@pytest.fixture
def small_synth():
    from devvoi import synth

    spec = synth.gusto_like_spec(400)
    return synth.generate(spec, np.random.default_rng(11))
