"""Deterministic random generators derived from a single run seed.

Every source of randomness in the package (parameter init, epoch shuffling,
dropout, fold assignment) draws from its own named stream so that changing
one consumer never perturbs the others.
"""

import zlib

import numpy as np


def sub_rng(seed: int, label: str) -> np.random.Generator:
    """Generator for one named randomness stream of a run."""
    entropy = [int(seed) % 2**63, zlib.crc32(label.encode("utf-8"))]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derived_seed(seed: int, index: int) -> int:
    """Stable per-task seed (one per fold or grid entry) from the run seed."""
    ss = np.random.SeedSequence([int(seed) % 2**63, int(index)])
    return int(ss.generate_state(1)[0])
