"""Seeded random streams

Each (stream, index) pair gets its own generator derived from the master
seed, so adding nodes never perturbs the draws of existing ones.
"""

import numpy as np

STREAMS = {
    "network": 1,
    "sentinel": 2,
    "device": 3,
    "attack": 4,
    "address": 5,
    "harness": 6,
}


def child_rng(seed: int, stream: str, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(STREAMS[stream], index))
    return np.random.default_rng(ss)
