"""Splittable random streams keyed by work-unit indices."""

from typing import Union

import numpy as np


class RandomStreams:
    """
    Derives independent generators from one master seed.

    A stream is identified by a tuple of non-negative integers, usually
    (scope, unit indices..., role). The same tuple always yields the same
    generator regardless of how many other streams were drawn, so work units
    can run in any order or in parallel.
    """

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError(f"Seed must be non-negative, got {seed}")
        self.seed = int(seed)

    def generator(self, *indices: Union[int, np.integer]) -> np.random.Generator:
        key = tuple(int(i) for i in indices)
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=key))

    def __repr__(self) -> str:
        return f"RandomStreams(seed={self.seed})"
