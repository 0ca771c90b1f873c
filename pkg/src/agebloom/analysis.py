"""Analytic metrics of age-partitioned filters.

All quantities are evaluated for the worst phase, just before a shift, using
per-slice match probabilities ``r_0 .. r_{k+l-1}`` (by default the linear
fill gradient ``[1/2k, 2/2k, ..., 1/2, ..., 1/2]``).  Any other vector, e.g.
the exact fill law or blocked-segment match rates, can be passed instead.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import InvalidParameterError, NoConfigurationError, ResourceLimitError

SCENARIOS = ("negative", "window-member", "false-positive")
ORACLE_MAX_SLICES = 24


def steady_fill(k: int, l: int) -> tuple[float, ...]:
    """Linear worst-case gradient: ``s_i`` holds ``min(i+1, k)`` half-generations."""
    if k < 1 or l < 0:
        raise InvalidParameterError(f"need k >= 1, l >= 0; got k={k}, l={l}")
    return tuple(min(i + 1, k) / (2 * k) for i in range(k + l))


def fill_law(k: int, l: int, g: int, m: int) -> tuple[float, ...]:
    """Expected fill just before a shift from ``r = 1 - (1 - 1/m)^n``."""
    return tuple(1.0 - (1.0 - 1.0 / m) ** (min(i + 1, k) * g) for i in range(k + l))


def _ratios(k: int, l: int, ratios: Sequence[float] | None) -> tuple[float, ...]:
    if ratios is None:
        return steady_fill(k, l)
    r = tuple(float(x) for x in ratios)
    if len(r) != k + l:
        raise InvalidParameterError(f"expected {k + l} ratios, got {len(r)}")
    return r


def fp_rate(k: int, l: int, ratios: Sequence[float] | None = None) -> float:
    """Probability that a non-member finds ``k`` consecutive matches."""
    r = _ratios(k, l, ratios)
    # f[a] holds F(a, i+1) while row i is being computed
    nxt = [1.0 if a == k else 0.0 for a in range(k + 1)]
    for i in range(k + l - 1, -1, -1):
        cur = [0.0] * (k + 1)
        cur[k] = 1.0
        for a in range(k):
            if i > l + a:
                continue
            cur[a] = r[i] * nxt[a + 1] + (1.0 - r[i]) * nxt[0]
        nxt = cur
    return nxt[0]


def _outcomes(k: int, l: int, r: tuple[float, ...]) -> tuple[float, float, float, float]:
    """Algorithm 1 outcome statistics from its start state.

    Returns ``(P(true), E[probes; true], P(false), E[probes; false])`` where
    ``E[X; A]`` is ``E[X * 1{A}]``.
    """

    @lru_cache(maxsize=None)
    def walk(p: int, c: int, i: int) -> tuple[float, float, float, float]:
        if i < 0:
            return 0.0, 0.0, 1.0, 0.0
        if p + c == k:
            return 1.0, 0.0, 0.0, 0.0
        ri = r[i]
        ht, he, hf, hg = walk(p, c + 1, i + 1)
        mt, me, mf, mg = walk(c, 0, i - k)
        return (
            ri * ht + (1 - ri) * mt,
            ri * (he + ht) + (1 - ri) * (me + mt),
            ri * hf + (1 - ri) * mf,
            ri * (hg + hf) + (1 - ri) * (mg + mf),
        )

    return walk(0, 0, l)


def _forced(r: tuple[float, ...], lo: int, hi: int) -> tuple[float, ...]:
    return tuple(1.0 if lo <= i < hi else x for i, x in enumerate(r))


def expected_accesses(
    k: int, l: int, scenario: str = "negative", ratios: Sequence[float] | None = None
) -> float:
    """Expected slices probed by Algorithm 1.

    ``negative``: queries answering false.  ``false-positive``: non-members
    answering true.  ``window-member``: members of one of the ``l`` window
    generations, each equally likely, whose own ``k`` slices always match.
    """
    r = _ratios(k, l, ratios)
    if scenario == "negative":
        _, _, pf, ef = _outcomes(k, l, r)
        if pf <= 0:
            raise InvalidParameterError("no query can return false for these ratios")
        return ef / pf
    if scenario == "false-positive":
        pt, et, _, _ = _outcomes(k, l, r)
        if pt <= 0:
            raise InvalidParameterError("no query can return true for these ratios")
        return et / pt
    if scenario == "window-member":
        if l < 1:
            raise InvalidParameterError("window scenario needs l >= 1")
        total = 0.0
        for j in range(l):
            _, et, _, ef = _outcomes(k, l, _forced(r, j, j + k))
            total += et + ef
        return total / l
    raise InvalidParameterError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")


def report_probability(
    k: int, l: int, generations_past: int, ratios: Sequence[float] | None = None
) -> float:
    """Probability that an element of generation ``l + j`` is still reported.

    Just before a shift that generation keeps ``max(k - j, 0)`` of its own
    slices (``s_{l+j} .. s_{k+l-1}``); ``j = 0`` is the oldest generation
    still fully present.
    """
    if generations_past < 0:
        raise InvalidParameterError("generations_past must be >= 0")
    r = _ratios(k, l, ratios)
    return fp_rate(k, l, _forced(r, l + generations_past, k + l))


def peak_npws(k: int, l: int) -> float:
    """Normalised probability-weighted slack just before a shift."""
    if l < 1:
        raise InvalidParameterError("NPWS is undefined for l = 0")
    return (2.0 - 2.0 ** (1 - k)) / l


def efficiency(k: int, l: int, fp: float) -> float:
    """Memory of an equal-fp Bloom filter over memory of the APBF."""
    if not 0 < fp < 1:
        raise InvalidParameterError(f"fp must lie in (0, 1), got {fp}")
    return (math.log2(1 / fp) / k) * (l / (k + l))


@dataclass(frozen=True)
class MetricsRow:
    k: int
    l: int
    fp: float
    eff: float
    acc_window: float
    acc_fp: float
    acc_false: float
    npws: float


def metrics_row(k: int, l: int) -> MetricsRow:
    r = steady_fill(k, l)
    pt, et, pf, ef = _outcomes(k, l, r)
    fp = fp_rate(k, l, r)
    return MetricsRow(
        k=k,
        l=l,
        fp=fp,
        eff=efficiency(k, l, fp),
        acc_window=expected_accesses(k, l, "window-member", r),
        acc_fp=et / pt,
        acc_false=ef / pf,
        npws=peak_npws(k, l),
    )


def nearest_l(k: int, target_fp: float, max_l: int) -> int | None:
    """``l`` in ``[1, max_l]`` whose fp is closest to the target, or None when
    fp stays below the target over the whole range (the optimum lies beyond)."""
    if max_l < 1 or fp_rate(k, max_l) < target_fp:
        return None
    lo, hi = 1, max_l
    while lo < hi:  # smallest l with fp >= target
        mid = (lo + hi) // 2
        if fp_rate(k, mid) >= target_fp:
            hi = mid
        else:
            lo = mid + 1
    if lo == 1:
        return 1
    below = abs(fp_rate(k, lo - 1) - target_fp)
    above = abs(fp_rate(k, lo) - target_fp)
    return lo - 1 if below <= above else lo


def find_params(
    target_fp: float, max_k_plus_l: int = 128, max_npws: float | None = None
) -> list[MetricsRow]:
    """Tabulate, for each ``k`` from ``ceil(log2(1/fp))`` upwards, the ``l``
    whose false-positive rate lies nearest the target."""
    if not 0 < target_fp < 1:
        raise InvalidParameterError(f"target_fp must lie in (0, 1), got {target_fp}")
    rows = []
    k = max(1, math.ceil(math.log2(1 / target_fp)))
    while k + 1 <= max_k_plus_l:
        l = nearest_l(k, target_fp, max_k_plus_l - k)
        if l is None:
            break
        rows.append(metrics_row(k, l))
        k += 1
    if max_npws is not None:
        rows = [r for r in rows if r.npws <= max_npws]
    if not rows:
        raise NoConfigurationError(
            f"no (k, l) with k + l <= {max_k_plus_l} for fp {target_fp} and NPWS cap {max_npws}"
        )
    return rows


# -- blocked segments -------------------------------------------------------


def _block_match(load: stats.rv_discrete, x: float, b: int, tail: float = 1e-12) -> float:
    lo = int(load.ppf(tail / 2))
    hi = int(load.isf(tail / 2)) + 1
    j = np.arange(max(lo, 0), hi + 1)
    return float(np.sum(load.pmf(j) * (1.0 - (1.0 - x) ** j) ** b))


def apbbf_match_ratios(
    k: int, l: int, num_blocks: int | None, B: int, b: int, loads: str = "poisson"
) -> tuple[float, ...]:
    """Per-segment match probability just before a shift.

    Segment ``s_i`` has received ``min(i+1, k) * g`` insertions spread over
    its blocks; a probe matches when all ``b`` partition bits of its block
    are set.  ``num_blocks=None`` takes the many-blocks limit with the
    continuous per-block capacity.
    """
    from .apbbf import block_capacity, generation_size

    cap = block_capacity(B, b)
    x = b / B
    out = []
    for i in range(k + l):
        gens = min(i + 1, k)
        if num_blocks is None:
            load = stats.poisson(gens * cap / k)
        else:
            inserts = gens * generation_size(k, num_blocks, B, b)
            if loads == "poisson":
                load = stats.poisson(inserts / num_blocks)
            elif loads == "binomial":
                load = stats.binom(inserts, 1.0 / num_blocks)
            else:
                raise InvalidParameterError(f"unknown load model {loads!r}")
        out.append(_block_match(load, x, b))
    return tuple(out)


def apbbf_fp_model(
    k: int, l: int, num_blocks: int | None, B: int, b: int, loads: str = "poisson"
) -> float:
    return fp_rate(k, l, apbbf_match_ratios(k, l, num_blocks, B, b, loads))


def apbbf_peak_npws(k: int, l: int, B: int, b: int, num_blocks: int | None = None) -> float:
    """Peak NPWS with the full-segment match rate in place of 1/2."""
    if l < 1:
        raise InvalidParameterError("NPWS is undefined for l = 0")
    q = apbbf_match_ratios(k, l, num_blocks, B, b)[-1]
    return sum(q**i for i in range(k)) / l


@dataclass(frozen=True)
class ApbbfRow:
    k: int
    l: int
    B: int
    b: int
    fp: float
    apbf_fp: float
    cap: float
    acc_window: float
    acc_fp: float
    acc_false: float
    npws: float


def apbbf_metrics(k: int, l: int, B: int, b: int, num_blocks: int | None = None) -> ApbbfRow:
    from .apbbf import capacity_factor

    q = apbbf_match_ratios(k, l, num_blocks, B, b)
    pt, et, pf, ef = _outcomes(k, l, q)
    return ApbbfRow(
        k=k,
        l=l,
        B=B,
        b=b,
        fp=fp_rate(k, l, q),
        apbf_fp=fp_rate(k * b, l * b),
        cap=capacity_factor(B, b),
        acc_window=expected_accesses(k, l, "window-member", q),
        acc_fp=et / pt,
        acc_false=ef / pf,
        npws=apbbf_peak_npws(k, l, B, b, num_blocks),
    )


# -- exhaustive oracle --------------------------------------------------------


def enumerate_oracle(k: int, l: int, ratios: Sequence[float]) -> tuple[float, float]:
    """Brute force over all ``2^(k+l)`` match patterns.

    Returns the probability of a run of ``k`` matches starting at or before
    slice ``l``, and the mean probes of a step-by-step Algorithm 1 over the
    patterns that answer false (NaN when none do).
    """
    n = k + l
    if n > ORACLE_MAX_SLICES:
        raise ResourceLimitError(f"k + l = {n} exceeds the oracle limit {ORACLE_MAX_SLICES}")
    r = _ratios(k, l, ratios)
    fp = 0.0
    miss_mass = 0.0
    miss_probes = 0.0
    for pattern in itertools.product((False, True), repeat=n):
        prob = 1.0
        for hit, ri in zip(pattern, r):
            prob *= ri if hit else 1.0 - ri
        if prob == 0.0:
            continue
        if any(all(pattern[j : j + k]) for j in range(l + 1)):
            fp += prob
            continue
        # replay the query walk on a pattern known to answer false
        i, p, c, probes = l, 0, 0, 0
        while i >= 0:
            probes += 1
            if pattern[i]:
                c += 1
                i += 1
            else:
                i, p, c = i - k, c, 0
        miss_mass += prob
        miss_probes += prob * probes
    return fp, (miss_probes / miss_mass if miss_mass else math.nan)
