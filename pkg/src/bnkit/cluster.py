"""Substitution of rare bit sequences by frequent neighbors.

A rare sequence may be replaced by a frequent one at hamming distance
exactly 1, skewing the distribution toward the short-codeword nodes while
flipping at most one weight bit per affected channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bintensor import NUM_SEQUENCES, BinaryKernel
from .errors import BnkitError
from .stats import FrequencyTable


def hamming(a: int, b: int) -> int:
    """Number of differing bits between two sequence indices."""
    if not (0 <= a < NUM_SEQUENCES and 0 <= b < NUM_SEQUENCES):
        raise ValueError("sequence indices must be in [0, 511]")
    return (a ^ b).bit_count()


@dataclass(frozen=True)
class ClusterConfig:
    """Sizes of the frequent set (M) and the rare set (N)."""

    frequent_count: int = 32
    rare_count: int = 256

    def __post_init__(self):
        if self.frequent_count < 1 or self.rare_count < 1:
            raise BnkitError("M and N must both be >= 1")
        if self.frequent_count + self.rare_count > NUM_SEQUENCES:
            raise BnkitError("M + N must not exceed 512")


@dataclass(frozen=True)
class SubstitutionMap:
    pairs: dict[int, int]
    untouched: tuple[int, ...] = field(default_factory=tuple)

    def lookup(self) -> np.ndarray:
        """512-entry rewrite table (identity outside the map)."""
        table = np.arange(NUM_SEQUENCES, dtype=np.uint16)
        for rare, frequent in self.pairs.items():
            table[rare] = frequent
        return table


def build_substitution(table: FrequencyTable, cfg: ClusterConfig) -> SubstitutionMap:
    """Pair each rare sequence with its best distance-1 frequent neighbor.

    The frequent set is the top M of the ranking, the rare set the bottom N
    of the occupied sequences. When fewer than M + N sequences occur, the
    rare set keeps its N members (capped so at least one frequent candidate
    remains) and the frequent set takes up to M of what is left at the top.
    Rare sequences are handled rarest-first; among distance-1 neighbors the
    highest count wins, ties by ascending index. Rare sequences with no
    distance-1 neighbor stay untouched.
    """
    if table.total == 0:
        raise BnkitError("substitution needs a non-empty frequency table")
    occupied = [int(s) for s in table.occupied()]
    rare_len = min(cfg.rare_count, max(len(occupied) - 1, 0))
    rare = occupied[len(occupied) - rare_len :]
    frequent = occupied[: min(cfg.frequent_count, len(occupied) - rare_len)]

    pairs: dict[int, int] = {}
    untouched: list[int] = []
    for sa in reversed(rare):  # rarest first
        best = None
        for sb in frequent:
            if hamming(sa, sb) != 1:
                continue
            key = (int(table.counts[sb]), -sb)  # highest count, then lowest index
            if best is None or key > best[0]:
                best = (key, sb)
        if best is None:
            untouched.append(sa)
        else:
            assert table.counts[best[1]] >= table.counts[sa]
            pairs[sa] = best[1]
    return SubstitutionMap(pairs, tuple(untouched))


def apply_substitution(
    kernels: Sequence[BinaryKernel], subs: SubstitutionMap
) -> list[BinaryKernel]:
    """Rewrite every mapped channel; shapes and channel counts are unchanged."""
    lookup = subs.lookup()
    return [
        BinaryKernel(k.out_channels, k.in_channels, lookup[k.sequences])
        for k in kernels
    ]


def substitution_report(
    table: FrequencyTable,
    subs: SubstitutionMap,
    kernels_before: Sequence[BinaryKernel],
    kernels_after: Sequence[BinaryKernel],
    ks: Sequence[int] = (16, 32, 64, 256),
) -> dict:
    """JSON-ready map report with before/after coverages."""
    from .stats import count_frequencies, topk_coverage

    before = count_frequencies(kernels_before)
    after = count_frequencies(kernels_after)
    return {
        "pairs": sorted([int(a), int(b)] for a, b in subs.pairs.items()),
        "untouched": sorted(int(s) for s in subs.untouched),
        "residual_rare_mass": float(
            sum(int(table.counts[s]) for s in subs.untouched)
        ) / table.total,
        "coverage_before": {str(k): topk_coverage(before, k) for k in ks},
        "coverage_after": {str(k): topk_coverage(after, k) for k in ks},
    }
