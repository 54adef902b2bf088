"""Keyed random streams: one independent generator per (seed, epoch, index, purpose)."""
from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    seed: int
    epoch: int = 0
    index: int = 0
    purpose: str = ""

    def generator(self) -> np.random.Generator:
        tag = zlib.crc32(self.purpose.encode("utf-8"))
        ss = np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, self.epoch, self.index, tag])
        return np.random.Generator(np.random.PCG64(ss))


def stream(seed: int, epoch: int = 0, index: int = 0, purpose: str = "") -> np.random.Generator:
    return RngStream(seed, epoch, index, purpose).generator()


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)
