"""
Per-task random streams.

Every replication, cache entry and restart draws from
default_rng(SeedSequence([seed, *task_index])), so results do not depend on scheduling.
"""
from typing import Optional

import numpy as np


def task_seed_sequence(seed: Optional[int], *index: int) -> np.random.SeedSequence:
    if seed is None:
        return np.random.SeedSequence()
    return np.random.SeedSequence([int(seed), *(int(i) for i in index)])


def task_rng(seed: Optional[int], *index: int) -> np.random.Generator:
    return np.random.default_rng(task_seed_sequence(seed, *index))


def task_int_seed(seed: Optional[int], *index: int) -> int:
    """A plain int seed for APIs that record their seed."""
    return int(task_seed_sequence(seed, *index).generate_state(1, dtype=np.uint32)[0])
