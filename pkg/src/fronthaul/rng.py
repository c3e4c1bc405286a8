"""Named, reproducible random streams on top of numpy's counter-based Philox generator.

Each stream is keyed by ``seed XOR h(label)``, where ``h`` is the first 8
bytes (big-endian) of the BLAKE2b digest of the UTF-8 label. A stream's
output therefore depends only on (seed, label), never on how draws from
different streams interleave.
"""

from __future__ import annotations

import hashlib

import numpy as np

STREAM_RULE = "philox4x64-blake2b-xor-v1"
_CHUNK = 4096
U64 = (1 << 64) - 1


def label_hash(label: str) -> int:
    return int.from_bytes(hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest(), "big")


def stream_key(seed: int, label: str) -> int:
    if not 0 <= seed <= U64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed ^ label_hash(label)


def generator(seed: int, label: str) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(seed, label)))


class Stream:
    """Buffered scalar draws from one named stream."""

    __slots__ = ("label", "gen", "_exp", "_exp_pos", "_uni", "_uni_pos")

    def __init__(self, seed: int, label: str):
        self.label = label
        self.gen = generator(seed, label)
        self._exp = self.gen.standard_exponential(_CHUNK)
        self._exp_pos = 0
        self._uni = None
        self._uni_pos = 0

    def exponential(self) -> float:
        """A unit-mean exponential draw."""
        pos = self._exp_pos
        if pos == _CHUNK:
            self._exp = self.gen.standard_exponential(_CHUNK)
            pos = 0
        self._exp_pos = pos + 1
        return float(self._exp[pos])

    def uniform(self) -> float:
        if self._uni is None or self._uni_pos == _CHUNK:
            self._uni = self.gen.random(_CHUNK)
            self._uni_pos = 0
        value = self._uni[self._uni_pos]
        self._uni_pos += 1
        return float(value)

    def bytes(self, size: int) -> bytes:
        return self.gen.bytes(size)
