import numpy as np
import pytest

from bnkit import BinaryKernel


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_kernel(rng, out_channels, in_channels) -> BinaryKernel:
    seqs = rng.integers(0, 512, size=(out_channels, in_channels), dtype=np.uint16)
    return BinaryKernel(out_channels, in_channels, seqs)


def kernel_from_values(values, in_channels=None) -> BinaryKernel:
    """Build a 1-or-more-row kernel from a flat list of sequence indices."""
    values = np.asarray(values, dtype=np.uint16)
    if in_channels is None:
        in_channels = len(values)
    return BinaryKernel(len(values) // in_channels, in_channels,
                        values.reshape(-1, in_channels))
