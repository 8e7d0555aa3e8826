"""Reproducible random streams.

A stream is a plain value ``(master_seed, stream_index)``. Turning it into a
``numpy.random.Generator`` always yields the same bit sequence, so samplers
that receive the same stream produce bit-identical draws. Child streams are
derived by hashing ``(master_seed, parent index, tag, index)``, which keeps
replications on non-overlapping substreams regardless of scheduling.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Union

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_index"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise TypeError(f"{name} must be an integer, got {value!r}")
            if not 0 <= int(value) <= _MASK64:
                raise ValueError(f"{name} must fit in 64 unsigned bits, got {value}")

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.stream_index),))
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, tag: str, index: int = 0) -> "RngStream":
        digest = hashlib.blake2b(
            f"{self.master_seed}:{self.stream_index}:{tag}:{index}".encode(),
            digest_size=8,
        ).digest()
        return RngStream(self.master_seed, int.from_bytes(digest, "little"))


RngLike = Union[RngStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def substreams(rng: RngLike, *tags: str) -> list[np.random.Generator]:
    """One independent generator per tag.

    With an ``RngStream`` the result depends only on the stream value and the
    tags, so two samplers asking for the same tag see the same draws.
    """
    if isinstance(rng, RngStream):
        return [rng.child(tag).generator() for tag in tags]
    return list(as_generator(rng).spawn(len(tags)))
