"""Partitioned Bloom filter: ``k`` slices of ``m`` bits, one bit per slice.

This is the single-generation reference the age-partitioned filters are
measured against.  A query stops at the first zero bit, so the expected
number of slices touched by a negative query at fill 1/2 is small and
bounded by 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InvalidParameterError
from .hashing import MASK64, MAX_MODULUS, HashPair, hash_pair, hash_pairs, index_at, indexes_at, reduce_pairs

LN2 = math.log(2)


@dataclass(frozen=True)
class BloomMetrics:
    k: int
    bits_per_item: float
    fp: float
    acc_true: float
    acc_false: float


def bf_dimension(target_fp: float, capacity: int) -> tuple[int, int, float]:
    """``(k, m, actual_fp)`` for a filter of ``capacity`` items at fill 1/2."""
    if not 0 < target_fp < 1:
        raise InvalidParameterError(f"target_fp must lie in (0, 1), got {target_fp}")
    if capacity < 1:
        raise InvalidParameterError(f"capacity must be >= 1, got {capacity}")
    k = math.ceil(math.log2(1 / target_fp))
    return k, math.ceil(capacity / LN2), 2.0**-k


def bf_metrics(k: int) -> BloomMetrics:
    """Analytic costs of a filter with ``k`` slices filled to 1/2."""
    if k < 1:
        raise InvalidParameterError(f"k must be >= 1, got {k}")
    total = 2.0**k
    acc_false = total / (total - 1) * sum(i / 2.0**i for i in range(1, k + 1))
    return BloomMetrics(k=k, bits_per_item=k / LN2, fp=1 / total, acc_true=float(k), acc_false=acc_false)


class PartitionedBloom:
    def __init__(self, k: int, m: int, seed: int = 0) -> None:
        if k < 1:
            raise InvalidParameterError(f"k must be >= 1, got {k}")
        if not 1 <= m <= MAX_MODULUS:
            raise InvalidParameterError(f"m must lie in [1, 2**47], got {m}")
        if not 0 <= seed <= MASK64:
            raise InvalidParameterError("seed must be an unsigned 64-bit integer")
        self._k = k
        self._m = m
        self._seed = seed
        self._n = 0
        self._slices = np.zeros((k, (m + 7) // 8), dtype=np.uint8)

    @classmethod
    def for_capacity(cls, target_fp: float, capacity: int, seed: int = 0) -> "PartitionedBloom":
        k, m, _ = bf_dimension(target_fp, capacity)
        return cls(k, m, seed)

    @property
    def k(self) -> int:
        return self._k

    @property
    def m(self) -> int:
        return self._m

    @property
    def n(self) -> int:
        return self._n

    @property
    def seed(self) -> int:
        return self._seed

    def add(self, element: bytes) -> None:
        pair = hash_pair(element, self._seed)
        for i in range(self._k):
            x = index_at(pair, i, self._m)
            self._slices[i, x >> 3] |= 1 << (x & 7)
        self._n += 1

    def add_many(self, elements: Iterable[bytes]) -> None:
        self.add_hashed(*hash_pairs(elements, self._seed))

    def add_hashed(self, h1: np.ndarray, h2: np.ndarray) -> None:
        base, step = reduce_pairs(np.asarray(h1, dtype=np.uint64), np.asarray(h2, dtype=np.uint64), self._m)
        for i in range(self._k):
            idx = indexes_at(base, step, i, self._m)
            masks = np.left_shift(1, (idx & np.uint64(7)).astype(np.uint8)).astype(np.uint8)
            np.bitwise_or.at(self._slices[i], (idx >> np.uint64(3)).astype(np.int64), masks)
        self._n += len(base)

    def query(self, element: bytes) -> bool:
        return self.query_cost(element)[0]

    __contains__ = query

    def query_cost(self, element: bytes) -> tuple[bool, int]:
        """Answer plus slices probed; stops at the first zero bit."""
        pair: HashPair = hash_pair(element, self._seed)
        for i in range(self._k):
            x = index_at(pair, i, self._m)
            if not self._slices[i, x >> 3] >> (x & 7) & 1:
                return False, i + 1
        return True, self._k

    def probe_hashed(self, h1: np.ndarray, h2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Batch answers and per-query probe counts."""
        base, step = reduce_pairs(np.asarray(h1, dtype=np.uint64), np.asarray(h2, dtype=np.uint64), self._m)
        count = len(base)
        found = np.ones(count, dtype=bool)
        probes = np.full(count, self._k, dtype=np.int64)
        for i in range(self._k):
            idx = indexes_at(base, step, i, self._m)
            bits = (self._slices[i, (idx >> np.uint64(3)).astype(np.int64)] >> (idx & np.uint64(7)).astype(np.uint8)) & 1
            first_miss = found & (bits == 0)
            probes[first_miss] = i + 1
            found &= bits == 1
        return found, probes

    def fill_ratios(self) -> list[float]:
        return (np.bitwise_count(self._slices).sum(axis=1) / self._m).tolist()
