import json

import numpy as np
import pytest

from gdcnet.model import GDCNet, ModelDims
from gdcnet.synthetic import make_incongruity_dataset

SMALL_DIMS = ModelDims(d_t=16, d_v=8, d_z=6, d_fused=5, d_f=7, disc_hidden=6, head_hidden=4)
DESK_DIMS = ModelDims(d_t=64, d_v=32, d_z=16, d_fused=16)


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write((r if isinstance(r, str) else json.dumps(r)) + "\n")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_manifest():
    return make_incongruity_dataset(8, d_t=SMALL_DIMS.d_t, d_v=SMALL_DIMS.d_v, seed=3)


@pytest.fixture
def small_model():
    return GDCNet(SMALL_DIMS, seed=11)


@pytest.fixture
def desk_manifest():
    return make_incongruity_dataset(32, d_t=DESK_DIMS.d_t, d_v=DESK_DIMS.d_v, seed=0)
