"""Synthetic streams and empirical measurement of the aging filters.

Elements are integer IDs encoded as fixed-width little-endian byte strings.
Stream IDs are drawn below ``2**63`` and probe IDs at or above it, so a
probe can never collide with an inserted element.

Duplicates are produced in tumbling blocks of ``window`` positions: each
block holds exactly ``round(dup_rate * window)`` duplicate slots, spread
evenly, and every duplicate re-emits an earlier element of the same block.
Any block-aligned window therefore has exactly the requested duplicate rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .aging import AgingFilter
from .apbbf import ApbbfFilter, blocks_for_window
from .apbf import ApbfFilter, size_for_window
from .errors import InvalidParameterError
from .hashing import hash_pairs_packed

PROBE_BIT = 1 << 63
_OFFSET_SPAN = 1 << 62
_PROBE_CHUNK = 1 << 20


# -- streams ------------------------------------------------------------------


@dataclass(frozen=True)
class StreamSpec:
    length: int
    dup_rate: float = 0.0
    distribution: str = "uniform"
    zipf_exponent: float = 1.0
    seed: int = 0
    window: int = 1000
    universe: int = 8  # bytes per element

    def __post_init__(self) -> None:
        if self.length < 0:
            raise InvalidParameterError(f"length must be >= 0, got {self.length}")
        if not 0 <= self.dup_rate < 1:
            raise InvalidParameterError(f"dup_rate must lie in [0, 1), got {self.dup_rate}")
        if self.distribution not in ("uniform", "zipf"):
            raise InvalidParameterError(f"unknown distribution {self.distribution!r}")
        if self.distribution == "zipf" and not self.zipf_exponent > 0:
            raise InvalidParameterError(f"zipf exponent must be > 0, got {self.zipf_exponent}")
        if self.window < 1:
            raise InvalidParameterError(f"window must be >= 1, got {self.window}")
        if self.universe < 8:
            raise InvalidParameterError(f"universe must be >= 8 bytes, got {self.universe}")


def _dup_slots(size: int, dup_rate: float) -> np.ndarray:
    dups = round(dup_rate * size)
    dups = min(dups, size - 1)
    t = np.arange(1, dups + 1)
    return (t * size) // (dups + 1)


def gen_ids(spec: StreamSpec) -> np.ndarray:
    """Deterministic ``uint64`` ID sequence for ``spec``."""
    rng = np.random.default_rng(spec.seed)
    offset = int(rng.integers(0, _OFFSET_SPAN))
    source = np.arange(spec.length, dtype=np.int64)
    is_dup = np.zeros(spec.length, dtype=bool)
    if spec.dup_rate > 0:
        w = spec.window
        if spec.distribution == "zipf":
            cdf = np.cumsum(np.arange(1, w + 1, dtype=float) ** -spec.zipf_exponent)
        for start in range(0, spec.length, w):
            size = min(w, spec.length - start)
            slots = _dup_slots(size, spec.dup_rate)
            if not slots.size:
                continue
            if spec.distribution == "uniform":
                src = (rng.random(slots.size) * slots).astype(np.int64)
            else:
                # rank 1 is the most recent earlier element of the block
                rank = np.searchsorted(cdf, rng.random(slots.size) * cdf[slots - 1], side="right") + 1
                src = slots - np.minimum(rank, slots)
            source[start + slots] = start + src
            is_dup[start + slots] = True
    # follow duplicate chains back to the fresh element they copy
    while True:
        chained = is_dup[source]
        if not chained.any():
            break
        source[chained] = source[source[chained]]
    fresh_rank = np.cumsum(~is_dup) - 1
    return (np.uint64(offset) + fresh_rank[source].astype(np.uint64)).astype(np.uint64)


def encode(ids: np.ndarray, width: int = 8) -> bytes:
    """Pack IDs as ``width``-byte little-endian records (zero padded)."""
    raw = np.asarray(ids, dtype="<u8")
    if width == 8:
        return raw.tobytes()
    out = np.zeros((raw.size, width), dtype=np.uint8)
    out[:, :8] = raw.view(np.uint8).reshape(-1, 8)
    return out.tobytes()


def gen_stream(spec: StreamSpec) -> list[bytes]:
    buf = encode(gen_ids(spec), spec.universe)
    u = spec.universe
    return [buf[i : i + u] for i in range(0, len(buf), u)]


def hash_ids(ids: np.ndarray, seed: int, width: int = 8) -> tuple[np.ndarray, np.ndarray]:
    return hash_pairs_packed(encode(ids, width), width, seed)


def window_dup_rate(ids: np.ndarray, window: int) -> list[float]:
    """``1 - |unique(W)| / |W|`` for each full block-aligned window."""
    ids = np.asarray(ids)
    return [
        1.0 - np.unique(ids[s : s + window]).size / window
        for s in range(0, ids.size - window + 1, window)
    ]


class ProbeSource:
    """Endless supply of fresh IDs disjoint from every stream."""

    def __init__(self, seed: int) -> None:
        rng = np.random.default_rng([seed, 0x50524F4245])
        self._next = PROBE_BIT + int(rng.integers(0, _OFFSET_SPAN))

    def take(self, count: int) -> np.ndarray:
        out = np.arange(count, dtype=np.uint64) + np.uint64(self._next)
        self._next += count
        return out


# -- filter configuration -----------------------------------------------------


@dataclass(frozen=True)
class FilterConfig:
    """Parameters of a filter under test; size by ``window`` or explicitly."""

    kind: str
    k: int
    l: int
    window: int | None = None
    m: int | None = None
    num_blocks: int | None = None
    B: int | None = None
    b: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("apbf", "apbbf"):
            raise InvalidParameterError(f"unknown filter kind {self.kind!r}")
        if self.kind == "apbf" and (self.B is not None or self.b is not None or self.num_blocks is not None):
            raise InvalidParameterError("B, b and num_blocks apply to apbbf only")
        if self.kind == "apbbf" and (self.B is None or self.b is None):
            raise InvalidParameterError("apbbf needs B and b")
        sized = self.m if self.kind == "apbf" else self.num_blocks
        if (sized is None) == (self.window is None):
            raise InvalidParameterError("give exactly one of window and an explicit size")

    def build(self) -> AgingFilter:
        if self.kind == "apbf":
            m = self.m if self.m is not None else size_for_window(self.k, self.l, self.window)
            return ApbfFilter(self.k, self.l, m, self.seed)
        nb = self.num_blocks
        if nb is None:
            nb = blocks_for_window(self.k, self.l, self.window, self.B, self.b)
        return ApbbfFilter(self.k, self.l, nb, self.B, self.b, self.seed)


# -- measurements -------------------------------------------------------------


class FpSample(NamedTuple):
    n: int
    fp: float
    probes: int
    false_positives: int
    mean_probes: float  # over probes answered false
    false_negatives: int


@dataclass
class MeasurementReport:
    fp_series: list[FpSample] = field(default_factory=list)
    false_negative_count: int = 0
    decay_curve: list[tuple[int, float]] = field(default_factory=list)
    decay_trials: list[int] = field(default_factory=list)
    pws_estimate: float = math.nan
    npws_estimate: float = math.nan
    mean_accesses: dict[str, float] = field(default_factory=dict)

    def pooled_fp(self, min_n: int = 0) -> tuple[float, int]:
        """False-positive rate pooled over samples taken at ``n >= min_n``;
        returns the rate and the number of probes behind it."""
        hits = sum(s.false_positives for s in self.fp_series if s.n >= min_n)
        probes = sum(s.probes for s in self.fp_series if s.n >= min_n)
        return (hits / probes if probes else math.nan), probes

    def pooled_accesses(self, min_n: int = 0) -> float:
        """Mean probes per negative answer over samples at ``n >= min_n``."""
        total = count = 0.0
        for s in self.fp_series:
            negatives = s.probes - s.false_positives
            if s.n >= min_n and negatives:
                total += s.mean_probes * negatives
                count += negatives
        return total / count if count else math.nan


def _probe(f: AgingFilter, ids: np.ndarray, seed: int) -> tuple[np.ndarray, np.ndarray]:
    found, probes = [], []
    for s in range(0, ids.size, _PROBE_CHUNK):
        h1, h2 = hash_ids(ids[s : s + _PROBE_CHUNK], seed)
        fnd, prb = f.probe_hashed(h1, h2)
        found.append(fnd)
        probes.append(prb)
    if not found:
        return np.zeros(0, dtype=bool), np.zeros(0, dtype=np.int64)
    return np.concatenate(found), np.concatenate(probes)


def measure_fp(
    config: FilterConfig,
    spec: StreamSpec,
    probes_per_sample: int,
    sample_every: int | None = None,
    probe_seed: int = 1,
) -> MeasurementReport:
    """Insert ``spec``'s stream and sample the false-positive rate.

    Samples are taken every ``sample_every`` insertions (default: the
    generation size, i.e. just before each shift), each with fresh probe IDs.
    At every sample the most recent ``min(n, window)`` insertions are also
    queried and any miss is counted as a false negative.
    """
    f = config.build()
    every = sample_every or f.g
    if every < 1:
        raise InvalidParameterError("sample_every must be >= 1")
    ids = gen_ids(spec)
    h1, h2 = hash_ids(ids, f.seed, spec.universe)
    probes_src = ProbeSource(probe_seed)
    report = MeasurementReport()
    neg_sum = neg_cnt = pos_sum = pos_cnt = mem_sum = mem_cnt = 0
    n = 0
    for stop in range(every, spec.length + 1, every):
        f.add_hashed(h1[n:stop], h2[n:stop])
        n = stop
        lo = max(0, n - f.window)
        found, cost = f.probe_hashed(h1[lo:n], h2[lo:n])
        misses = int((~found).sum())
        report.false_negative_count += misses
        mem_sum += int(cost.sum())
        mem_cnt += cost.size
        found, cost = _probe(f, probes_src.take(max(probes_per_sample, 0)), f.seed)
        hits = int(found.sum())
        neg = cost[~found]
        neg_sum += int(neg.sum())
        neg_cnt += neg.size
        pos_sum += int(cost[found].sum())
        pos_cnt += hits
        report.fp_series.append(
            FpSample(
                n,
                hits / found.size if found.size else math.nan,
                found.size,
                hits,
                float(neg.mean()) if neg.size else math.nan,
                misses,
            )
        )
    if neg_cnt:
        report.mean_accesses["negative"] = neg_sum / neg_cnt
    if pos_cnt:
        report.mean_accesses["false-positive"] = pos_sum / pos_cnt
    if mem_cnt:
        report.mean_accesses["window-member"] = mem_sum / mem_cnt
    return report


def verify_window(
    config: FilterConfig,
    length: int,
    seed: int = 0,
    exhaustive: bool = False,
    fault: tuple[int, int] | None = None,
) -> int:
    """Insert ``length`` distinct elements and count false negatives among
    the most recent ``min(n, l*g)`` insertions after every insert.

    Between two shifts bits are only ever set, so answers can only change
    from false to true, and the window only loses its oldest members.  The
    default mode therefore checks each element right after its own
    insertion plus the whole window right after every shift, which is
    equivalent to the literal per-insert scan done when ``exhaustive``.

    ``fault=(n, i)`` zeroes logical slice ``s_i`` once ``n`` elements are in,
    for exercising the checker itself.
    """
    f = config.build()
    ids = gen_ids(StreamSpec(length=length, seed=seed))
    h1, h2 = hash_ids(ids, f.seed)
    pairs = list(zip(h1.tolist(), h2.tolist()))
    violations = 0
    for t in range(length):
        shifting = f.n > 0 and f.n % f.g == 0
        f.add_pair(pairs[t])
        if fault is not None and f.n == fault[0]:
            f._rows[f.pos(fault[1])] = 0
        lo = max(0, f.n - f.window)
        if exhaustive or shifting or (fault is not None and f.n == fault[0]):
            violations += int((~f.query_hashed(h1[lo : f.n], h2[lo : f.n])).sum())
        elif not f.query_pair(pairs[t])[0]:
            violations += 1
    return violations


def measure_decay(
    config: FilterConfig,
    generations_past_window: int | None = None,
    trials: int = 1000,
    seed: int = 0,
) -> MeasurementReport:
    """Report probability by age, measured just before shifts.

    Bucket ``j`` holds the elements of the generation that is ``j``
    generations older than the oldest window generation; negative ``j``
    are window generations.  Buckets are refilled at successive shifts
    until each has seen at least ``trials`` elements.
    """
    f = config.build()
    k, l, g = f.k, f.l, f.g
    past = k if generations_past_window is None else generations_past_window
    if past < 1:
        raise InvalidParameterError("generations_past_window must be >= 1")
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")
    depth = l + past  # generations G_0 .. G_{depth-1} examined at each peak
    warm = max(k + l, depth)
    peaks = math.ceil(trials / g)
    total = (warm + peaks) * g
    ids = gen_ids(StreamSpec(length=total, seed=seed))
    h1, h2 = hash_ids(ids, f.seed)
    hit = np.zeros(depth, dtype=np.int64)
    seen = np.zeros(depth, dtype=np.int64)
    f.add_hashed(h1[: warm * g], h2[: warm * g])
    for p in range(peaks):
        n = (warm + p) * g
        if p:
            f.add_hashed(h1[n - g : n], h2[n - g : n])
        answers = f.query_hashed(h1[n - depth * g : n], h2[n - depth * g : n])
        # answers[0] is the oldest examined generation G_{depth-1}
        per_gen = answers.reshape(depth, g)[::-1]
        hit += per_gen.sum(axis=1)
        seen += g
    probs = hit / seen
    report = MeasurementReport()
    report.decay_curve = [(q - l, float(probs[q])) for q in range(depth)]
    report.decay_trials = seen.tolist()
    report.false_negative_count = int(seen[:l].sum() - hit[:l].sum())
    report.pws_estimate = g * float(probs[l : l + min(k, past)].sum())
    report.npws_estimate = report.pws_estimate / (l * g)
    return report
