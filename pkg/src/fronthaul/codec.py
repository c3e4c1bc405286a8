"""Systematic (n, k) MDS erasure code over GF(2^8).

A frame is cut into ``k`` equal fragments (the last one zero-padded) and
expanded to ``n`` blocks with the generator ``G = V . V_top^-1``, where ``V``
is the n x k Vandermonde matrix on the points 0..n-1. The first ``k`` rows of
``G`` are the identity, so blocks 0..k-1 carry the frame verbatim. Any ``k``
rows of ``G`` form an invertible matrix, hence any ``k`` blocks recover the
frame. With ``k = 1`` every row of ``G`` is ``[1]`` and the code degenerates
to plain duplication.
"""

from __future__ import annotations

import struct
from collections.abc import Iterable
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import gf256
from .errors import DomainError, EmptyFrameError, InsufficientBlocksError, MetadataMismatchError

MAX_BLOCKS = 255

# frame_id u64, block_index u8, n u8, k u8, original_length u32; big-endian
HEADER = struct.Struct(">QBBBI")


@dataclass(frozen=True)
class CodeGeometry:
    total_blocks: int
    data_blocks: int

    def __post_init__(self) -> None:
        n, k = self.total_blocks, self.data_blocks
        if int(n) != n or int(k) != k or not 1 <= k <= n <= MAX_BLOCKS:
            raise DomainError(f"need 1 <= k <= n <= {MAX_BLOCKS}, got n={n}, k={k}")

    @property
    def n(self) -> int:
        return self.total_blocks

    @property
    def k(self) -> int:
        return self.data_blocks

    def block_length(self, frame_length: int) -> int:
        return -(-frame_length // self.k)


@dataclass(frozen=True)
class CodedBlock:
    frame_id: int
    block_index: int
    geometry: CodeGeometry
    payload: bytes
    original_length: int

    def to_bytes(self) -> bytes:
        header = HEADER.pack(
            self.frame_id, self.block_index, self.geometry.n, self.geometry.k, self.original_length
        )
        return header + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> CodedBlock:
        if len(data) < HEADER.size:
            raise MetadataMismatchError(f"block shorter than its {HEADER.size}-byte header")
        frame_id, index, n, k, length = HEADER.unpack_from(data)
        geometry = CodeGeometry(n, k)
        if index >= n:
            raise MetadataMismatchError(f"block index {index} out of range for n={n}")
        return cls(frame_id, index, geometry, bytes(data[HEADER.size:]), length)


class ErasureCodec:
    """Encoder/decoder for one geometry. Immutable once built; safe to share."""

    def __init__(self, geometry: CodeGeometry):
        self.geometry = geometry
        n, k = geometry.n, geometry.k
        v = gf256.vandermonde(range(n), k)
        self.generator = gf256.matmul(v, gf256.mat_inverse(v[:k]))
        self.generator.setflags(write=False)
        self._inverses: dict[tuple[int, ...], np.ndarray] = {}

    def encode_array(self, frame: bytes) -> np.ndarray:
        """Encode to an (n, L) uint8 array of block payloads."""
        k = self.geometry.k
        length = self.geometry.block_length(len(frame))
        data = np.zeros(k * length, dtype=np.uint8)
        data[: len(frame)] = np.frombuffer(frame, dtype=np.uint8)
        data = data.reshape(k, length)
        parity = gf256.matmul(self.generator[k:], data)
        return np.concatenate([data, parity], axis=0)

    def encode(self, frame: bytes, frame_id: int = 0) -> list[CodedBlock]:
        if not frame:
            raise EmptyFrameError("cannot encode an empty frame")
        rows = self.encode_array(frame)
        return [
            CodedBlock(frame_id, i, self.geometry, rows[i].tobytes(), len(frame))
            for i in range(self.geometry.n)
        ]

    def _decoding_matrix(self, indices: tuple[int, ...]) -> np.ndarray:
        inv = self._inverses.get(indices)
        if inv is None:
            inv = gf256.mat_inverse(self.generator[list(indices)])
            self._inverses[indices] = inv
        return inv

    def decode_array(self, indices: tuple[int, ...], payloads: np.ndarray, original_length: int) -> bytes:
        """Recover the frame from exactly k (index, payload-row) pairs."""
        k = self.geometry.k
        if indices == tuple(range(k)):
            data = payloads
        else:
            data = gf256.matmul(self._decoding_matrix(indices), payloads)
        return data.reshape(-1)[:original_length].tobytes()

    def decode(self, blocks: Iterable[CodedBlock]) -> bytes:
        blocks = list(blocks)
        if not blocks:
            raise InsufficientBlocksError("no blocks given")
        first = blocks[0]
        if first.geometry != self.geometry:
            raise MetadataMismatchError(f"block geometry {first.geometry} differs from codec {self.geometry}")
        expected_length = self.geometry.block_length(first.original_length)
        by_index: dict[int, bytes] = {}
        for block in blocks:
            if (
                block.frame_id != first.frame_id
                or block.geometry != first.geometry
                or block.original_length != first.original_length
                or len(block.payload) != expected_length
            ):
                raise MetadataMismatchError(f"block {block.block_index} does not belong with frame {first.frame_id}")
            if not 0 <= block.block_index < self.geometry.n:
                raise MetadataMismatchError(f"block index {block.block_index} out of range")
            seen = by_index.setdefault(block.block_index, block.payload)
            if seen != block.payload:
                raise MetadataMismatchError(f"conflicting payloads for block {block.block_index}")
        k = self.geometry.k
        if len(by_index) < k:
            raise InsufficientBlocksError(f"need {k} distinct blocks, got {len(by_index)}")
        indices = tuple(sorted(by_index)[:k])
        payloads = np.frombuffer(b"".join(by_index[i] for i in indices), dtype=np.uint8).reshape(k, expected_length)
        return self.decode_array(indices, payloads, first.original_length)


@lru_cache(maxsize=256)
def codec_for(geometry: CodeGeometry) -> ErasureCodec:
    return ErasureCodec(geometry)


def encode(frame: bytes, geometry: CodeGeometry, frame_id: int = 0) -> list[CodedBlock]:
    """Split ``frame`` into k fragments and expand them to n coded blocks."""
    return codec_for(geometry).encode(frame, frame_id)


def decode(blocks: Iterable[CodedBlock]) -> bytes:
    """Rebuild the frame from any k distinct blocks of it."""
    blocks = list(blocks)
    if not blocks:
        raise InsufficientBlocksError("no blocks given")
    return codec_for(blocks[0].geometry).decode(blocks)
