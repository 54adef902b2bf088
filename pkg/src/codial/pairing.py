"""View-pair enumeration, pair subsampling and negative draws for the critic."""
from __future__ import annotations

from itertools import combinations
from typing import NamedTuple

import numpy as np

from .numerics.optim import ConfigError
from .rng import as_generator


class NoNegativesError(ValueError):
    """Negatives need at least one other image in the batch."""


class ViewPairIndex(NamedTuple):
    first: int
    second: int


def enumerate_pairs(k: int) -> list[ViewPairIndex]:
    """All unordered class pairs (a, b), a < b, in lexicographic order."""
    if k < 2:
        raise ConfigError(f"need at least 2 views to form pairs, got K={k}")
    return [ViewPairIndex(a, b) for a, b in combinations(range(k), 2)]


def sample_pair_subset(pairs: list[ViewPairIndex], k: int, rng) -> list[ViewPairIndex]:
    """``k`` distinct pairs chosen uniformly without replacement."""
    if not 1 <= k <= len(pairs):
        raise ConfigError(f"pair subset size must be in [1, {len(pairs)}], got {k}")
    idx = as_generator(rng).choice(len(pairs), size=k, replace=False)
    return [pairs[i] for i in idx]


def draw_negatives(batch_size: int, image_index: int, views_per_image: int, count: int, rng) -> list[tuple[int, int]]:
    """``count`` (image, view) indices drawn uniformly from the other images of the batch."""
    if batch_size < 2:
        raise NoNegativesError("negatives require a batch of at least 2 images")
    rng = as_generator(rng)
    imgs = rng.integers(0, batch_size - 1, size=count)
    imgs = imgs + (imgs >= image_index)
    views = rng.integers(0, views_per_image, size=count)
    return [(int(i), int(v)) for i, v in zip(imgs, views)]
