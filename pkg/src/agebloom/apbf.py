"""Age-Partitioned Bloom Filter.

``k + l`` slices of ``m`` bits.  Each insertion sets one bit in each of the
``k`` newest slices; every ``g = floor(m ln2 / k)`` insertions the slices age
by one.  A query reports true when ``k`` consecutive slices starting at
``s_0 .. s_l`` all match, which guarantees no false negatives over the last
``l * g`` insertions.

Snapshot layout (little-endian)::

    "APBF" | version u8 | k u16 | l u16 | m u64 | g u64 | n u64 | base u16 | seed u64
    | k+l slice payloads of ceil(m/8) bytes, buffer order, LSB-first bits
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .aging import AgingFilter
from .errors import (
    BadMagicError,
    CorruptSnapshotError,
    InvalidParameterError,
    NoConfigurationError,
    TruncatedSnapshotError,
    UnsupportedVersionError,
)
from .hashing import MASK64, MAX_MODULUS, MAX_POSITIONS, HashPair, indexes_at, reduce_pairs, stride

MAGIC = b"APBF"
VERSION = 1
_HEADER = struct.Struct("<4sBHHQQQHQ")

LN2 = math.log(2)


@dataclass(frozen=True)
class FilterSpec:
    """The (w, s, p, e) sliding-filter contract.

    ``w`` insertions always reported, ``s`` further insertions that may be,
    ``p`` expected reported count among those ``s``, ``e`` false-positive bound.
    """

    w: int
    s: int
    p: float
    e: float

    def __post_init__(self) -> None:
        if self.w < 1:
            raise InvalidParameterError(f"w must be >= 1, got {self.w}")
        if self.s < 0:
            raise InvalidParameterError(f"s must be >= 0, got {self.s}")
        if not 0 <= self.p <= self.s:
            raise InvalidParameterError(f"p must lie in [0, s], got {self.p}")
        if not 0 < self.e < 1:
            raise InvalidParameterError(f"e must lie in (0, 1), got {self.e}")


def generation_size(k: int, m: int) -> int:
    return math.floor(m * LN2 / k)


def _check_shape(k: int, l: int, seed: int) -> None:
    if k < 1:
        raise InvalidParameterError(f"k must be >= 1, got {k}")
    if l < 0:
        raise InvalidParameterError(f"l must be >= 0, got {l}")
    if k + l >= MAX_POSITIONS:
        raise InvalidParameterError(f"k + l must be < {MAX_POSITIONS}")
    if not 0 <= seed <= MASK64:
        raise InvalidParameterError("seed must be an unsigned 64-bit integer")


def size_for_window(k: int, l: int, window: int) -> int:
    """Smallest slice size whose generation gives ``l * g >= window``."""
    if l < 1:
        raise InvalidParameterError("a window needs l >= 1")
    need = -(-window // l)
    m = math.ceil(need * k / LN2)
    while generation_size(k, m) < need:
        m += 1
    return m


class ApbfFilter(AgingFilter):
    def __init__(self, k: int, l: int, m: int, seed: int = 0) -> None:
        _check_shape(k, l, seed)
        if m < 1 or m > MAX_MODULUS:
            raise InvalidParameterError(f"m must lie in [1, 2**47], got {m}")
        g = generation_size(k, m)
        if g < 1:
            raise InvalidParameterError(f"m={m} too small for k={k}: generation size would be 0")
        super().__init__(k, l, g, m, seed)
        self._m = m

    @classmethod
    def for_spec(
        cls, window: int, target_fp: float, max_npws: float | None = None, seed: int = 0
    ) -> "ApbfFilter":
        """Smallest (k, l) tabulated for ``target_fp`` that meets ``max_npws``,
        sized so that at least ``window`` insertions are always reported."""
        from .analysis import find_params

        if window < 1:
            raise InvalidParameterError(f"window must be >= 1, got {window}")
        rows = find_params(target_fp, max_npws=max_npws)
        row = min(rows, key=lambda r: (r.k + r.l, r.k))
        return cls(row.k, row.l, size_for_window(row.k, row.l, window), seed)

    @property
    def m(self) -> int:
        return self._m

    def spec(self) -> FilterSpec:
        """The contract this configuration meets at the analytic fp bound."""
        from .analysis import fp_rate, peak_npws

        if self._l < 1:
            raise NoConfigurationError("l = 0 gives no guaranteed window")
        w = self.window
        return FilterSpec(w=w, s=self.slack, p=peak_npws(self._k, self._l) * w, e=fp_rate(self._k, self._l))

    # -- per-row probes -----------------------------------------------------

    def _bit(self, pair: HashPair, row: int) -> int:
        h1, h2 = pair
        return (h1 + row * stride(h2, self._m)) % self._m

    def _test(self, pair: HashPair, row: int) -> bool:
        x = self._bit(pair, row)
        return bool(self._store[row * self._row_bytes + (x >> 3)] >> (x & 7) & 1)

    def _set(self, pair: HashPair, row: int) -> None:
        x = self._bit(pair, row)
        self._store[row * self._row_bytes + (x >> 3)] |= 1 << (x & 7)

    def _prepare(self, h1: np.ndarray, h2: np.ndarray):
        return reduce_pairs(np.asarray(h1, dtype=np.uint64), np.asarray(h2, dtype=np.uint64), self._m)

    def _test_many(self, ctx, items: np.ndarray, rows: np.ndarray) -> np.ndarray:
        base, step = ctx
        idx = indexes_at(base[items], step[items], rows, self._m)
        byte = self._rows[rows, (idx >> np.uint64(3)).astype(np.int64)]
        return ((byte >> (idx & np.uint64(7)).astype(np.uint8)) & 1).astype(bool)

    def _set_many(self, ctx, items: np.ndarray, row: int) -> None:
        base, step = ctx
        idx = indexes_at(base[items], step[items], row, self._m)
        masks = np.left_shift(1, (idx & np.uint64(7)).astype(np.uint8)).astype(np.uint8)
        np.bitwise_or.at(self._rows[row], (idx >> np.uint64(3)).astype(np.int64), masks)

    # -- persistence --------------------------------------------------------

    def snapshot(self) -> bytes:
        header = _HEADER.pack(
            MAGIC, VERSION, self._k, self._l, self._m, self._g, self._n, self._base, self._seed
        )
        return header + self._payload()

    @classmethod
    def restore(cls, data: bytes) -> "ApbfFilter":
        data = bytes(data)
        if len(data) >= 4 and data[:4] != MAGIC:
            raise BadMagicError(f"expected magic {MAGIC!r}, got {data[:4]!r}")
        if len(data) < _HEADER.size:
            raise TruncatedSnapshotError("snapshot shorter than its header")
        _, version, k, l, m, g, n, base, seed = _HEADER.unpack_from(data)
        if version != VERSION:
            raise UnsupportedVersionError(f"unsupported snapshot version {version}")
        try:
            f = cls(k, l, m, seed)
        except InvalidParameterError as exc:
            raise CorruptSnapshotError(str(exc)) from exc
        if g != f.g:
            raise CorruptSnapshotError(f"generation size {g} inconsistent with k={k}, m={m}")
        _restore_state(f, data[_HEADER.size :], n, base)
        return f


def _restore_state(f: AgingFilter, payload: bytes, n: int, base: int) -> None:
    width = f.k + f.l
    if base >= width:
        raise CorruptSnapshotError(f"base {base} out of range for {width} rows")
    f._n = n
    if base != f._expected_base():
        raise CorruptSnapshotError(f"base {base} inconsistent with n={n}, g={f.g}")
    f._base = base
    expected = len(f._store)
    if len(payload) < expected:
        raise TruncatedSnapshotError(f"payload has {len(payload)} bytes, expected {expected}")
    if len(payload) > expected:
        raise CorruptSnapshotError(f"payload has {len(payload)} bytes, expected {expected}")
    f._load_payload(payload)
    if not f._padding_clean():
        raise CorruptSnapshotError("padding bits beyond the row width are set")
