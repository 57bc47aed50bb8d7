"""
Seeding module.
"""

import numpy as np

from expo_fdr.base import FdrDomainError

GENERATOR_NAME = "numpy.random.Philox(SeedSequence)"
"""Name of the bit generator, recorded in every run manifest."""

DEFAULT_SEED = 20240601
_SEED_LIMIT = 2**64


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < _SEED_LIMIT:
        raise FdrDomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(_check_seed(seed))))


def derive_seed(master: int, *indices: int) -> int:
    """
    Derive the 64-bit seed of a sub-task from the master seed and the task's indices.

    The derived seed depends only on (master, indices), never on execution order.
    """
    seq = np.random.SeedSequence(_check_seed(master), spawn_key=tuple(int(i) for i in indices))
    return int(seq.generate_state(1, dtype=np.uint64)[0])
