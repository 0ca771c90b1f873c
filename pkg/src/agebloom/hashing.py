"""Seeded hash family for the filters.

Every element is hashed once with 128-bit XXH3; the low and high 64-bit
halves become the pair ``(h1, h2)`` of Kirsch-Mitzenmacher double hashing.
The ``i``-th index function is ``(h1 + i * h2') mod m`` where ``h2'`` is
``h2 mod m`` with zero replaced by one.

Blocked filters additionally need ``b`` in-block offsets per probe.  Those
are cut from 64-bit words produced by a murmur3 ``fmix64`` finaliser over
the pair, the buffer position and a word counter.

Each scalar function has a numpy counterpart operating on ``uint64`` arrays;
the two must agree bit for bit.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple

import numpy as np
import xxhash

from .errors import InvalidParameterError

MASK64 = (1 << 64) - 1
MAX_MODULUS = 1 << 47  # keeps position * h2' below 2**63 in uint64 arithmetic
MAX_POSITIONS = 1 << 16

_GOLDEN = 0x9E3779B97F4A7C15
_FMIX_C1 = 0xFF51AFD7ED558CCD
_FMIX_C2 = 0xC4CEB9FE1A85EC53


class HashPair(NamedTuple):
    h1: int
    h2: int


def hash_pair(element: bytes, seed: int = 0) -> HashPair:
    v = xxhash.xxh3_128_intdigest(element, seed & MASK64)
    return HashPair(v & MASK64, v >> 64)


def hash_pairs(elements: Iterable[bytes], seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`hash_pair`; returns ``(h1, h2)`` uint64 arrays."""
    digest = xxhash.xxh3_128_digest
    s = seed & MASK64
    raw = b"".join([digest(e, s) for e in elements])
    return _split_digests(raw)


def hash_pairs_packed(buf: bytes, width: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Hash consecutive fixed-width records of ``buf``."""
    if width < 1 or len(buf) % width:
        raise InvalidParameterError("buffer length must be a multiple of width")
    mv = memoryview(buf)
    digest = xxhash.xxh3_128_digest
    s = seed & MASK64
    raw = b"".join([digest(mv[i : i + width], s) for i in range(0, len(buf), width)])
    return _split_digests(raw)


def _split_digests(raw: bytes) -> tuple[np.ndarray, np.ndarray]:
    # canonical XXH3-128 digest is big-endian: high half first
    words = np.frombuffer(raw, dtype=">u8").reshape(-1, 2).astype(np.uint64)
    return words[:, 1].copy(), words[:, 0].copy()


def _check_modulus(m: int) -> None:
    if m < 1:
        raise InvalidParameterError(f"modulus must be >= 1, got {m}")
    if m > MAX_MODULUS:
        raise InvalidParameterError(f"modulus must be <= 2**47, got {m}")


def stride(h2: int, m: int) -> int:
    s = h2 % m
    return s if s else 1


def index_at(pair: tuple[int, int], position: int, m: int) -> int:
    """Index into an ``m``-bit array for hash function number ``position``."""
    _check_modulus(m)
    h1, h2 = pair
    return (h1 + position * stride(h2, m)) % m


def reduce_pairs(h1: np.ndarray, h2: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Precompute ``(h1 mod m, h2')`` so that repeated index evaluation is cheap."""
    _check_modulus(m)
    mm = np.uint64(m)
    base = h1 % mm
    step = h2 % mm
    step[step == 0] = 1
    return base, step


def indexes_at(base: np.ndarray, step: np.ndarray, position, m: int) -> np.ndarray:
    """Vectorised :func:`index_at` on reduced pairs; ``position`` may be an array."""
    mm = np.uint64(m)
    pos = np.asarray(position, dtype=np.uint64)
    return (base + (pos * step) % mm) % mm


def fmix64(z: int) -> int:
    z ^= z >> 33
    z = (z * _FMIX_C1) & MASK64
    z ^= z >> 33
    z = (z * _FMIX_C2) & MASK64
    z ^= z >> 33
    return z


def _fmix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(33))
    z = z * np.uint64(_FMIX_C1)
    z = z ^ (z >> np.uint64(33))
    z = z * np.uint64(_FMIX_C2)
    return z ^ (z >> np.uint64(33))


def _rotl23(x: int) -> int:
    return ((x << 23) | (x >> 41)) & MASK64


def mix_word(pair: tuple[int, int], position: int, word: int) -> int:
    h1, h2 = pair
    ctr = ((position << 16) | word) + 1
    return fmix64(((h1 ^ _rotl23(h2)) + ctr * _GOLDEN) & MASK64)


def _mix_word_array(h1: np.ndarray, h2: np.ndarray, position, word: int) -> np.ndarray:
    pos = np.asarray(position, dtype=np.uint64)
    ctr = ((pos << np.uint64(16)) | np.uint64(word)) + np.uint64(1)
    rot = (h2 << np.uint64(23)) | (h2 >> np.uint64(41))
    with np.errstate(over="ignore"):  # arithmetic is mod 2**64 by design
        return _fmix64_array((h1 ^ rot) + ctr * np.uint64(_GOLDEN))


def check_block_shape(num_blocks: int, B: int, b: int) -> int:
    """Validate blocked-filter geometry; return bits per partition offset."""
    if num_blocks < 1:
        raise InvalidParameterError(f"num_blocks must be >= 1, got {num_blocks}")
    _check_modulus(num_blocks)
    for name, v in (("B", B), ("b", b)):
        if v < 1 or v & (v - 1):
            raise InvalidParameterError(f"{name} must be a power of two, got {v}")
    if b > B // 2:
        raise InvalidParameterError(f"b must be <= B/2, got b={b}, B={B}")
    if B >= MAX_POSITIONS:
        raise InvalidParameterError(f"B must fit in 16 bits, got {B}")
    return (B // b).bit_length() - 1


def block_coords(
    pair: tuple[int, int], position: int, num_blocks: int, B: int, b: int
) -> tuple[int, tuple[int, ...]]:
    """Block index and the ``b`` in-block bit offsets for one segment probe.

    Offset ``j`` always lies in partition ``[j*B/b, (j+1)*B/b)``.
    """
    t = check_block_shape(num_blocks, B, b)
    block = index_at(pair, position, num_blocks)
    part = B // b
    per_word = 64 // t
    mask = part - 1
    offsets = []
    word = 0
    for j in range(b):
        slot = j % per_word
        if slot == 0:
            word = mix_word(pair, position, j // per_word)
        offsets.append(j * part + ((word >> (slot * t)) & mask))
    return block, tuple(offsets)


def block_coords_many(
    h1: np.ndarray, h2: np.ndarray, position, num_blocks: int, B: int, b: int
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`block_coords`; offsets come back with shape ``(N, b)``."""
    t = check_block_shape(num_blocks, B, b)
    base, step = reduce_pairs(h1, h2, num_blocks)
    blocks = indexes_at(base, step, position, num_blocks)
    part = B // b
    per_word = 64 // t
    mask = np.uint64(part - 1)
    offsets = np.empty((len(h1), b), dtype=np.uint64)
    word = None
    for j in range(b):
        slot = j % per_word
        if slot == 0:
            word = _mix_word_array(h1, h2, position, j // per_word)
        offsets[:, j] = np.uint64(j * part) + ((word >> np.uint64(slot * t)) & mask)
    return blocks, offsets
