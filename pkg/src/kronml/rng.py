"""
Seeded random generators.

All randomness uses numpy's PCG64 bit generator. A single master seed is
expanded into independent per-purpose streams: the purpose string is hashed
with SHA-256 and its first eight bytes, followed by any integer indices,
become the spawn key of a numpy SeedSequence built from the master seed.
"""

import hashlib
from typing import Tuple

import numpy as np

SEED_MASK = (1 << 64) - 1


def _spawn_key(purpose: str, indices: Tuple[int, ...]) -> Tuple[int, ...]:
    digest = hashlib.sha256(purpose.encode('utf-8')).digest()
    return (int.from_bytes(digest[:8], 'little'),) + tuple(int(i) for i in indices)


def derive_seed(master: int, purpose: str, *indices: int) -> int:
    """
    Derive a 64-bit subseed for one purpose.

    Args:
        master: The experiment's master seed
        purpose: Label such as "split", "cnn-init" or "gbdt"
        indices: Extra integers, e.g. the repetition number

    Returns:
        Integer in [0, 2**64)
    """
    sequence = np.random.SeedSequence(int(master) & SEED_MASK, spawn_key=_spawn_key(purpose, indices))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_generator(seed: int) -> np.random.Generator:
    """A PCG64 generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & SEED_MASK))


def generator_for(master: int, purpose: str, *indices: int) -> np.random.Generator:
    return make_generator(derive_seed(master, purpose, *indices))
