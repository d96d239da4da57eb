"""Keyed, counter-based random streams.

Every random draw in the package comes from a Philox generator whose key is
derived from an integer label, so results never depend on call order.
"""
from __future__ import annotations

from typing import Tuple

import numpy as np

# stream tags keep draws for different purposes independent under one label
GRAPH = 0
PARTITION = 1
EIGEN = 2
SUBSETS = 3
DATA = 4
BASELINE = 5

SeedTriple = Tuple[int, int, int]


def make_rng(stream: int, *label: int) -> np.random.Generator:
    if any(int(v) < 0 for v in label):
        raise ValueError(f"rng label entries must be non-negative, got {label}")
    seq = np.random.SeedSequence([int(stream), *(int(v) for v in label)])
    return np.random.Generator(np.random.Philox(seq))
