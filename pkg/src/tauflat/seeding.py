"""Counter-based seed derivation: child seeds depend only on (master, key)."""
from __future__ import annotations

import numpy as np


def derive_seed(master: int, *key: int) -> int:
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def rng_for(master, *key: int) -> np.random.Generator:
    if isinstance(master, np.random.Generator):
        if key:
            # consume one draw so sibling keys diverge deterministically
            master = int(master.integers(2**32))
        else:
            return master
    if master is None:
        master = 0
    return np.random.default_rng(np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key)))
