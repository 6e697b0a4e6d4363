"""Labelled, reproducible random streams.

A stream is identified by a 64-bit master seed plus a slash-separated label.
Children derive their own labels, so the random numbers a unit of work sees
depend only on its position in the label tree, never on scheduling order.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Stream:
    master_seed: int
    label: str = ""

    def __post_init__(self):
        if not isinstance(self.master_seed, (int, np.integer)):
            raise TypeError("master_seed must be an integer")

    def child(self, *parts) -> "Stream":
        extra = "/".join(str(p) for p in parts)
        label = f"{self.label}/{extra}" if self.label else extra
        return Stream(int(self.master_seed), label)

    def seed_sequence(self) -> np.random.SeedSequence:
        digest = hashlib.sha256(self.label.encode("utf-8")).digest()
        key = tuple(int(w) for w in np.frombuffer(digest, dtype="<u4"))
        return np.random.SeedSequence(int(self.master_seed) & _MASK64, spawn_key=key)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))
