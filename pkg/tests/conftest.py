import os

# pin BLAS to one thread before numpy loads: tiny matrices gain nothing from
# BLAS threading and single-threaded kernels keep outputs bit-reproducible
for var in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "OMP_NUM_THREADS"):
    os.environ.setdefault(var, "1")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from cavcool import HilbertSpace  # noqa: E402


@pytest.fixture(scope="session")
def space():
    return HilbertSpace(3)


@pytest.fixture(scope="session")
def space1():
    return HilbertSpace(1)


@pytest.fixture()
def rng():
    return np.random.default_rng(20110815)
