import numpy as np
import pytest

from cpscodec import bench, blocks


@pytest.fixture(scope="session")
def net8():
    """Canonical architecture at desk-scale width."""
    return blocks.build_canonical_network(8)


@pytest.fixture(scope="session")
def store8(net8):
    return blocks.init_weights(net8, 0)


@pytest.fixture(scope="session")
def even_net():
    return blocks.build_even_network(8, 3)


@pytest.fixture(scope="session")
def even_store(even_net):
    return blocks.init_weights(even_net, 0)


def synth(h, w, seed):
    return bench.synthetic_image(h, w, seed)


def rand_tensor(rng, n, c, h, w):
    return np.asarray(rng.standard_normal((n, c, h, w)), dtype=np.float32)
