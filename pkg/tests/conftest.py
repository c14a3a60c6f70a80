import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from birrnet.model import ModelConfig, build_model  # noqa: E402
from birrnet.rng import make_rng  # noqa: E402

TINY_CONFIG = ModelConfig(width_multiplier=0.25, input_resolution=32, num_classes=6)


@pytest.fixture
def tiny_model():
    return build_model(TINY_CONFIG, make_rng(0))


@pytest.fixture
def tiny_batch():
    rng = make_rng(1234)
    return rng.uniform(-1, 1, size=(4, 32, 32, 3)).astype(np.float32)
