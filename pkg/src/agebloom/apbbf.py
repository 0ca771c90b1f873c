"""Age-Partitioned Blocked Bloom Filter.

Same ageing skeleton as :mod:`agebloom.apbf`, but each of the ``k + l``
segments is a blocked Bloom filter of ``num_blocks`` blocks of ``B`` bits.
A block is itself partitioned into ``b`` parts of ``B/b`` bits, and a probe
sets or tests exactly one bit per part of a single block.  Insertions touch
``k`` blocks and a query touches one block per segment probed.

Snapshot layout (little-endian)::

    "APBB" | version u8 | k u16 | l u16 | num_blocks u64 | B u16 | b u16
    | g u64 | n u64 | base u16 | seed u64
    | k+l segment payloads of ceil(num_blocks*B/8) bytes, buffer order
"""

from __future__ import annotations

import math
import struct

import numpy as np

from .aging import AgingFilter
from .apbf import _check_shape, _restore_state
from .errors import (
    BadMagicError,
    CorruptSnapshotError,
    InvalidParameterError,
    TruncatedSnapshotError,
    UnsupportedVersionError,
)
from .hashing import HashPair, block_coords, block_coords_many, check_block_shape

MAGIC = b"APBB"
VERSION = 1
_HEADER = struct.Struct("<4sBHHQHHQQHQ")


def block_capacity(B: int, b: int) -> float:
    """Insertions that bring each partition of a block to fill ratio 1/2."""
    if not 1 <= b < B:
        raise InvalidParameterError(f"need 1 <= b < B, got b={b}, B={B}")
    return math.log(2) / -math.log1p(-b / B)


def capacity_factor(B: int, b: int) -> float:
    """Window capacity relative to an APBF with ``(k*b, l*b)`` in the same memory.

    >>> round(capacity_factor(64, 4), 3)
    0.968
    """
    if not 1 <= b < B:
        raise InvalidParameterError(f"need 1 <= b < B, got b={b}, B={B}")
    x = b / B
    return x / -math.log1p(-x)


def generation_size(k: int, num_blocks: int, B: int, b: int) -> int:
    return math.floor(num_blocks * block_capacity(B, b) / k)


def blocks_for_window(k: int, l: int, window: int, B: int, b: int) -> int:
    if l < 1:
        raise InvalidParameterError("a window needs l >= 1")
    need = -(-window // l)
    nb = max(1, math.ceil(need * k / block_capacity(B, b)))
    while generation_size(k, nb, B, b) < need:
        nb += 1
    return nb


class ApbbfFilter(AgingFilter):
    def __init__(self, k: int, l: int, num_blocks: int, B: int, b: int, seed: int = 0) -> None:
        _check_shape(k, l, seed)
        check_block_shape(num_blocks, B, b)
        g = generation_size(k, num_blocks, B, b)
        if g < 1:
            raise InvalidParameterError(
                f"num_blocks={num_blocks} too small for k={k}: generation size would be 0"
            )
        super().__init__(k, l, g, num_blocks * B, seed)
        self._num_blocks = num_blocks
        self._B = B
        self._b = b

    @classmethod
    def for_window(cls, k: int, l: int, window: int, B: int, b: int, seed: int = 0) -> "ApbbfFilter":
        return cls(k, l, blocks_for_window(k, l, window, B, b), B, b, seed)

    @property
    def num_blocks(self) -> int:
        return self._num_blocks

    @property
    def B(self) -> int:
        return self._B

    @property
    def b(self) -> int:
        return self._b

    def _test(self, pair: HashPair, row: int) -> bool:
        block, offsets = block_coords(pair, row, self._num_blocks, self._B, self._b)
        start = row * self._row_bytes * 8 + block * self._B
        store = self._store
        for o in offsets:
            x = start + o
            if not store[x >> 3] >> (x & 7) & 1:
                return False
        return True

    def _set(self, pair: HashPair, row: int) -> None:
        block, offsets = block_coords(pair, row, self._num_blocks, self._B, self._b)
        start = row * self._row_bytes * 8 + block * self._B
        store = self._store
        for o in offsets:
            x = start + o
            store[x >> 3] |= 1 << (x & 7)

    def _prepare(self, h1: np.ndarray, h2: np.ndarray):
        return np.asarray(h1, dtype=np.uint64), np.asarray(h2, dtype=np.uint64)

    def _bits_many(self, ctx, items: np.ndarray, rows) -> np.ndarray:
        h1, h2 = ctx
        blocks, offsets = block_coords_many(
            h1[items], h2[items], rows, self._num_blocks, self._B, self._b
        )
        return (blocks * np.uint64(self._B))[:, None] + offsets

    def _test_many(self, ctx, items: np.ndarray, rows: np.ndarray) -> np.ndarray:
        bits = self._bits_many(ctx, items, rows)
        byte = self._rows[rows[:, None], (bits >> np.uint64(3)).astype(np.int64)]
        hit = (byte >> (bits & np.uint64(7)).astype(np.uint8)) & 1
        return hit.all(axis=1)

    def _set_many(self, ctx, items: np.ndarray, row: int) -> None:
        bits = self._bits_many(ctx, items, row).ravel()
        masks = np.left_shift(1, (bits & np.uint64(7)).astype(np.uint8)).astype(np.uint8)
        np.bitwise_or.at(self._rows[row], (bits >> np.uint64(3)).astype(np.int64), masks)

    def snapshot(self) -> bytes:
        header = _HEADER.pack(
            MAGIC, VERSION, self._k, self._l, self._num_blocks, self._B, self._b,
            self._g, self._n, self._base, self._seed,
        )
        return header + self._payload()

    @classmethod
    def restore(cls, data: bytes) -> "ApbbfFilter":
        data = bytes(data)
        if len(data) >= 4 and data[:4] != MAGIC:
            raise BadMagicError(f"expected magic {MAGIC!r}, got {data[:4]!r}")
        if len(data) < _HEADER.size:
            raise TruncatedSnapshotError("snapshot shorter than its header")
        _, version, k, l, nb, B, b, g, n, base, seed = _HEADER.unpack_from(data)
        if version != VERSION:
            raise UnsupportedVersionError(f"unsupported snapshot version {version}")
        try:
            f = cls(k, l, nb, B, b, seed)
        except InvalidParameterError as exc:
            raise CorruptSnapshotError(str(exc)) from exc
        if g != f.g:
            raise CorruptSnapshotError(f"generation size {g} inconsistent with geometry")
        _restore_state(f, data[_HEADER.size :], n, base)
        return f
