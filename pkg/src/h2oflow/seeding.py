"""Counter-based RNG fan-out from a single master seed.

Every stochastic consumer derives its own Philox stream from
(master_seed, *tags), so whole-pipeline runs are reproducible from one
integer and resuming at step k replays exactly the draws of step k.
"""

import zlib

import numpy as np


def _tag_to_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFFFFFFFFFF
    if isinstance(tag, str):
        # crc32 is stable across processes, unlike hash()
        return zlib.crc32(tag.encode("utf-8"))
    raise TypeError(f"unsupported seed tag type: {type(tag)!r}")


def derive_rng(master_seed: int, *tags) -> np.random.Generator:
    """Philox generator keyed by (master_seed, tags...)."""
    entropy = [_tag_to_int(master_seed)] + [_tag_to_int(t) for t in tags]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(master_seed: int, *tags) -> int:
    """A 63-bit child seed keyed by (master_seed, tags...)."""
    entropy = [_tag_to_int(master_seed)] + [_tag_to_int(t) for t in tags]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0] >> 1)
