"""Frequency-of-use analysis over bit sequences: counting, ranking, coverage,
and a seeded synthetic-kernel generator for desk-scale experiments."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .bintensor import NUM_SEQUENCES, BinaryKernel
from .errors import BnkitError


@dataclass(frozen=True)
class FrequencyTable:
    """Counts over the 512 sequence indices plus a descending-count ranking.

    Equal counts rank by ascending sequence index so downstream codeword
    assignment is deterministic.
    """

    counts: np.ndarray  # int64, shape (512,)
    total: int
    ranking: np.ndarray  # permutation of [0, 511]

    @classmethod
    def from_counts(cls, counts) -> "FrequencyTable":
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (NUM_SEQUENCES,):
            raise ValueError("counts must have shape (512,)")
        if (counts < 0).any():
            raise ValueError("counts must be non-negative")
        ranking = np.lexsort((np.arange(NUM_SEQUENCES), -counts))
        table = cls(counts, int(counts.sum()), ranking)
        counts.setflags(write=False)
        ranking.setflags(write=False)
        return table

    def occupied(self) -> np.ndarray:
        """Sequence indices with non-zero count, in ranking order."""
        return self.ranking[self.counts[self.ranking] > 0]


def count_frequencies(kernels: Sequence[BinaryKernel]) -> FrequencyTable:
    """Count how often each sequence index occurs across all channels."""
    if not kernels:
        raise BnkitError("cannot build a frequency table from zero kernels")
    counts = np.zeros(NUM_SEQUENCES, dtype=np.int64)
    for kernel in kernels:
        counts += np.bincount(kernel.sequences.ravel(), minlength=NUM_SEQUENCES)
    return FrequencyTable.from_counts(counts)


def merge(a: FrequencyTable, b: FrequencyTable) -> FrequencyTable:
    """Associative merge for sharded counting."""
    return FrequencyTable.from_counts(a.counts + b.counts)


def topk_coverage(table: FrequencyTable, k: int) -> float:
    """Fraction of all channels covered by the k most frequent sequences."""
    if not 0 <= k <= NUM_SEQUENCES:
        raise ValueError(f"k must be in [0, 512], got {k}")
    if table.total == 0:
        raise BnkitError("coverage is undefined for an empty table")
    if k == 0:
        return 0.0
    return float(table.counts[table.ranking[:k]].sum()) / table.total


def coverage_report(table: FrequencyTable, ks: Iterable[int] = (16, 32, 64, 256)) -> dict:
    """JSON-ready frequency report."""
    return {
        "total": table.total,
        "counts": [int(c) for c in table.counts],
        "coverage": {str(k): topk_coverage(table, k) for k in ks},
    }


def _rank_probabilities(targets: Sequence[tuple[int, float]]) -> np.ndarray:
    """Piecewise-uniform per-rank probabilities meeting the coverage targets.

    Each target (k, c) pins the cumulative mass of the top k ranks to c;
    mass between consecutive targets is spread uniformly over those ranks,
    and any remainder goes uniformly to the ranks past the last target.
    """
    points = sorted((int(k), float(c)) for k, c in targets)
    prev_k, prev_c = 0, 0.0
    probs = np.zeros(NUM_SEQUENCES)
    prev_density = np.inf
    for k, c in points:
        if not 1 <= k <= NUM_SEQUENCES:
            raise BnkitError(f"infeasible target ({k}, {c}): k outside [1, 512]")
        if c > 1.0 or c < prev_c:
            raise BnkitError(f"infeasible target ({k}, {c}): coverage not monotone")
        if k == prev_k:
            if c != prev_c:
                raise BnkitError(f"infeasible target ({k}, {c}): duplicate k")
            continue
        density = (c - prev_c) / (k - prev_k)
        if density > prev_density + 1e-12:
            raise BnkitError(
                f"infeasible target ({k}, {c}): requires per-rank mass above the"
                " preceding segment, so ranking would not respect the targets"
            )
        probs[prev_k:k] = density
        prev_density = density
        prev_k, prev_c = k, c
    if prev_k < NUM_SEQUENCES:
        density = (1.0 - prev_c) / (NUM_SEQUENCES - prev_k)
        if density > prev_density + 1e-12:
            raise BnkitError(
                f"infeasible target ({prev_k}, {prev_c}): residual tail mass"
                " would outweigh the last segment"
            )
        probs[prev_k:] = density
    elif abs(prev_c - 1.0) > 1e-9:
        raise BnkitError(f"infeasible target ({prev_k}, {prev_c}): must reach 1.0")
    return probs / probs.sum()


def synth_kernels(
    targets: Sequence[tuple[int, float]],
    total_channels: int,
    rng_seed: int = 0,
) -> list[BinaryKernel]:
    """Generate kernels whose sequence distribution hits the coverage targets.

    Deterministic under rng_seed. For total_channels >= ~1e5 the measured
    coverages land within roughly one percentage point of each target.
    """
    if total_channels < 1:
        raise BnkitError("total_channels must be positive")
    probs = _rank_probabilities(targets)
    rng = np.random.default_rng(rng_seed)
    # Random rank -> sequence-index relabeling, so fixtures are not always
    # concentrated on the numerically smallest indices.
    sequence_of_rank = rng.permutation(NUM_SEQUENCES)
    counts = rng.multinomial(total_channels, probs)
    values = np.repeat(sequence_of_rank, counts).astype(np.uint16)
    rng.shuffle(values)

    in_channels = 1
    while in_channels < 128 and total_channels % (in_channels * 2) == 0:
        in_channels *= 2
    out_channels = total_channels // in_channels
    return [
        BinaryKernel(out_channels, in_channels, values.reshape(out_channels, in_channels))
    ]
