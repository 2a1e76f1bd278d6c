"""Counter-based random streams.

Philox generators keyed by ``(seed, subkey)`` give independent streams
whose draws depend only on the key, never on scheduling.  Monte Carlo
code derives one subkey per replication batch so results are
bit-identical no matter how work is distributed.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def stream(seed: int, subkey: int = 0) -> np.random.Generator:
    key = np.array([int(seed) & _MASK, int(subkey) & _MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def batch_subkey(purpose: int, batch: int) -> int:
    """Pack a purpose tag and a batch index into one subkey word."""
    return ((int(purpose) & 0xFFFF) << 40) | (int(batch) & ((1 << 40) - 1))
