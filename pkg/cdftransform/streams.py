"""
Seeded random streams.

Every stochastic object in the package is drawn from a substream keyed by
(seed, *key), e.g. (seed, iteration) for bootstrap draws or
(seed, replication, part) in the Monte Carlo harness.  Substreams are built
from numpy's SeedSequence with an explicit spawn key and the PCG64DXSM bit
generator, so a draw depends only on its key and never on thread count or
scheduling order.
"""
import numpy as np
from numpy.random import PCG64DXSM, Generator, SeedSequence

# Second key component used to keep the different consumers apart.
BOOTSTRAP_STREAM = 0
STUDY_DATA_STREAM = 1
STUDY_BOOT_STREAM = 2
GEN_STREAM = 3


def _entropy(seed: int) -> int:
    seed = int(seed)
    if seed < 0:
        # SeedSequence rejects negatives; fold into the unsigned 64-bit range.
        seed &= 0xFFFF_FFFF_FFFF_FFFF
    return seed


def substream(seed: int, *key: int) -> Generator:
    """Return an independent Generator for the stream identified by *key*."""
    ss = SeedSequence(_entropy(seed), spawn_key=tuple(int(k) for k in key))
    return Generator(PCG64DXSM(ss))


def open_uniforms(rng: Generator, size) -> np.ndarray:
    """Uniform draws strictly inside (0, 1) on the 2**-53 lattice."""
    return rng.integers(1, 2 ** 53, size=size) / float(2 ** 53)
