"""Labeled random streams derived from a single root seed.

Each subsystem asks for its own generator by label, so adding a new
consumer of randomness never shifts the draws seen by existing ones.
"""

import hashlib

import numpy as np

SEED_MAX = 2**64 - 1


def derive_seed(seed: int, *labels) -> int:
    if not 0 <= seed <= SEED_MAX:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    h = hashlib.blake2b(digest_size=16)
    h.update(seed.to_bytes(8, "little"))
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "little")


def derive_rng(seed: int, *labels) -> np.random.Generator:
    """Return an independent generator for ``(seed, *labels)``."""
    return np.random.default_rng(derive_seed(seed, *labels))
