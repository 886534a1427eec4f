"""Counter-based random streams.

A stream is named by ``(seed, experiment, trial, purpose)`` and built from a
``numpy.random.SeedSequence`` whose spawn key is that tuple, so any trial
can be regenerated on any worker without shared state.
"""

import zlib
from dataclasses import dataclass

import numpy as np

__all__ = ['RngStreamKey', 'stream', 'substream_seed', 'trial_stream', 'tag_id']


def tag_id(tag):
    """Stable 32-bit id for a string tag (ints pass through)."""
    if isinstance(tag, (int, np.integer)):
        return int(tag)
    return zlib.crc32(str(tag).encode())


@dataclass(frozen=True)
class RngStreamKey:
    seed: int
    experiment: str = ""
    trial: int = 0
    purpose: str = ""

    def seed_sequence(self):
        key = (tag_id(self.experiment), int(self.trial), tag_id(self.purpose))
        return np.random.SeedSequence(entropy=int(self.seed), spawn_key=key)

    def generator(self):
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))


def stream(seed, experiment="", trial=0, purpose=""):
    return RngStreamKey(seed, experiment, trial, purpose).generator()


def substream_seed(rng):
    """Draw a 63-bit base seed from ``rng`` for a family of trial streams."""
    return int(rng.integers(0, 2 ** 63 - 1))


def trial_stream(base_seed, *counters):
    """Generator for one trial of a Monte-Carlo run seeded by ``base_seed``."""
    key = tuple(tag_id(c) for c in counters)
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=base_seed, spawn_key=key)))
