import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from callsift import dsp
from callsift.ingest import PIPELINE_SAMPLE_RATE


@pytest.fixture(scope="session")
def filterbank():
    return dsp.mel_filterbank(dsp.MelConfig(), dsp.StftConfig().taper_len, PIPELINE_SAMPLE_RATE)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
