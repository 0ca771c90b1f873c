"""Ring-buffer skeleton shared by the age-partitioned filters.

A filter holds ``k + l`` bit arrays (slices for APBF, blocked segments for
APBBF) in a circular buffer.  Logical slice ``s_i`` lives in buffer row
``(base + i) mod (k + l)``; every ``g`` insertions the oldest row is zeroed
and becomes the new ``s_0``.  Hash function number ``r`` is permanently
bound to buffer row ``r``, so an element keeps hitting the same bits in a
row however far the row has aged.

Subclasses supply the per-row probe (``_test``/``_set`` and their batch
forms); everything about ageing and query order lives here.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .hashing import HashPair, hash_pair, hash_pairs


def algorithm1(k: int, l: int, match: Callable[[int], bool]) -> tuple[bool, int]:
    """Search for ``k`` consecutive matching slices among ``s_0..s_{k+l-1}``.

    Starts at ``s_l`` and walks towards newer slices while matching; a miss
    jumps ``k`` slices back, keeping the matches already seen as ``p``.
    Returns the answer and the number of slices probed.
    """
    i, p, c, probes = l, 0, 0, 0
    while i >= 0:
        probes += 1
        if match(i):
            c += 1
            i += 1
            if p + c == k:
                return True, probes
        else:
            i -= k
            p = c
            c = 0
    return False, probes


def algorithm1_many(
    k: int, l: int, count: int, match_many: Callable[[np.ndarray, np.ndarray], np.ndarray]
) -> tuple[np.ndarray, np.ndarray]:
    """Lock-step :func:`algorithm1` over ``count`` independent queries.

    ``match_many(items, slices)`` must return the match bit of logical slice
    ``slices[j]`` for query ``items[j]``.
    """
    i = np.full(count, l, dtype=np.int64)
    p = np.zeros(count, dtype=np.int64)
    c = np.zeros(count, dtype=np.int64)
    probes = np.zeros(count, dtype=np.int64)
    found = np.zeros(count, dtype=bool)
    active = np.arange(count)
    while active.size:
        ia = i[active]
        hit = match_many(active, ia)
        probes[active] += 1
        ca = np.where(hit, c[active] + 1, 0)
        pa = np.where(hit, p[active], c[active])
        ia = np.where(hit, ia + 1, ia - k)
        c[active] = ca
        p[active] = pa
        i[active] = ia
        done = hit & (pa + ca == k)
        found[active[done]] = True
        active = active[~done & (ia >= 0)]
    return found, probes


def runs_of_k(matches: np.ndarray, k: int, l: int) -> np.ndarray:
    """Rows of a ``(N, k+l)`` match matrix holding ``k`` consecutive trues
    starting at some column ``j <= l``."""
    n = matches.shape[0]
    cs = np.zeros((n, k + l + 1), dtype=np.int32)
    np.cumsum(matches, axis=1, out=cs[:, 1:])
    return ((cs[:, k : k + l + 1] - cs[:, : l + 1]) == k).any(axis=1)


class AgingFilter:
    """Common state and operations of APBF and APBBF."""

    def __init__(self, k: int, l: int, g: int, row_bits: int, seed: int) -> None:
        self._k = k
        self._l = l
        self._g = g
        self._seed = seed
        self._n = 0
        self._base = 0
        self._row_bits = row_bits
        self._row_bytes = (row_bits + 7) // 8
        self._store = bytearray((k + l) * self._row_bytes)
        self._rows = np.frombuffer(self._store, dtype=np.uint8).reshape(k + l, self._row_bytes)

    # -- parameters ---------------------------------------------------------

    @property
    def k(self) -> int:
        return self._k

    @property
    def l(self) -> int:
        return self._l

    @property
    def g(self) -> int:
        return self._g

    @property
    def n(self) -> int:
        return self._n

    @property
    def base(self) -> int:
        return self._base

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def window(self) -> int:
        """Insertions always reported: ``l * g``."""
        return self._l * self._g

    @property
    def slack(self) -> int:
        return self._k * self._g

    @property
    def shifts(self) -> int:
        return (self._n - 1) // self._g if self._n else 0

    @property
    def memory_bits(self) -> int:
        return (self._k + self._l) * self._row_bits

    def pos(self, i: int) -> int:
        """Buffer row currently holding logical slice ``s_i``."""
        return (self._base + i) % (self._k + self._l)

    # -- hooks --------------------------------------------------------------

    def _test(self, pair: HashPair, row: int) -> bool:
        raise NotImplementedError

    def _set(self, pair: HashPair, row: int) -> None:
        raise NotImplementedError

    def _prepare(self, h1: np.ndarray, h2: np.ndarray):
        raise NotImplementedError

    def _test_many(self, ctx, items: np.ndarray, rows: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _set_many(self, ctx, items: np.ndarray, row: int) -> None:
        raise NotImplementedError

    # -- mutation -----------------------------------------------------------

    def _shift(self) -> None:
        self._rows[self.pos(self._k + self._l - 1)] = 0
        self._base = (self._base - 1) % (self._k + self._l)

    def add(self, element: bytes) -> None:
        self.add_pair(hash_pair(element, self._seed))

    def add_pair(self, pair: HashPair) -> None:
        if self._n and self._n % self._g == 0:
            self._shift()
        self._n += 1
        for i in range(self._k):
            self._set(pair, self.pos(i))

    def add_many(self, elements: Iterable[bytes]) -> None:
        self.add_hashed(*hash_pairs(elements, self._seed))

    def add_hashed(self, h1: np.ndarray, h2: np.ndarray) -> None:
        """Insert a batch given its hash pairs, in order."""
        total = len(h1)
        ctx = self._prepare(h1, h2)
        start = 0
        while start < total:
            if self._n and self._n % self._g == 0:
                self._shift()
            cnt = min(self._g - self._n % self._g, total - start)
            items = np.arange(start, start + cnt)
            for i in range(self._k):
                self._set_many(ctx, items, self.pos(i))
            self._n += cnt
            start += cnt

    # -- queries ------------------------------------------------------------

    def query(self, element: bytes) -> bool:
        return self.query_cost(element)[0]

    __contains__ = query

    def query_cost(self, element: bytes) -> tuple[bool, int]:
        """Algorithm 1 answer plus the number of rows probed."""
        return self.query_pair(hash_pair(element, self._seed))

    def query_pair(self, pair: HashPair) -> tuple[bool, int]:
        return algorithm1(self._k, self._l, lambda i: self._test(pair, self.pos(i)))

    def query_declarative(self, element: bytes) -> bool:
        """Linear scan over every start slice; the reference semantics."""
        pair = hash_pair(element, self._seed)
        hits = [self._test(pair, self.pos(i)) for i in range(self._k + self._l)]
        return any(all(hits[j : j + self._k]) for j in range(self._l + 1))

    def match_matrix(self, h1: np.ndarray, h2: np.ndarray) -> np.ndarray:
        """``(N, k+l)`` booleans: does element ``e`` match logical slice ``i``."""
        ctx = self._prepare(h1, h2)
        items = np.arange(len(h1))
        out = np.empty((len(h1), self._k + self._l), dtype=bool)
        for i in range(self._k + self._l):
            rows = np.full(len(h1), self.pos(i), dtype=np.int64)
            out[:, i] = self._test_many(ctx, items, rows)
        return out

    def query_hashed(self, h1: np.ndarray, h2: np.ndarray) -> np.ndarray:
        """Batch membership answers (no probe accounting)."""
        return runs_of_k(self.match_matrix(h1, h2), self._k, self._l)

    def query_many(self, elements: Iterable[bytes]) -> np.ndarray:
        return self.query_hashed(*hash_pairs(elements, self._seed))

    def probe_hashed(self, h1: np.ndarray, h2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Batch Algorithm 1: answers and per-query probe counts."""
        ctx = self._prepare(h1, h2)
        width = self._k + self._l
        base = self._base

        def match(items: np.ndarray, slices: np.ndarray) -> np.ndarray:
            return self._test_many(ctx, items, (base + slices) % width)

        return algorithm1_many(self._k, self._l, len(h1), match)

    # -- diagnostics --------------------------------------------------------

    def row_popcounts(self) -> np.ndarray:
        """Set bits per logical slice, ``s_0`` first."""
        counts = np.bitwise_count(self._rows).sum(axis=1, dtype=np.int64)
        order = [self.pos(i) for i in range(self._k + self._l)]
        return counts[order]

    def fill_ratios(self) -> list[float]:
        return (self.row_popcounts() / self._row_bits).tolist()

    def _payload(self) -> bytes:
        return bytes(self._store)

    def _load_payload(self, payload: bytes) -> None:
        self._store[:] = payload

    def _padding_clean(self) -> bool:
        spare = self._row_bytes * 8 - self._row_bits
        if not spare:
            return True
        return not (self._rows[:, -1] >> (8 - spare)).any()

    def _expected_base(self) -> int:
        return (-self.shifts) % (self._k + self._l)
