"""Rare-pattern substitution and what it buys the code.

Replacing a rare pattern with a frequent neighbor at hamming distance 1
flips at most one weight bit per affected channel but moves its mass into
the short-codeword nodes. This script builds a substitution map, shows the
coverage shift, and sweeps (M, N) set sizes to see the ratio trade-off.
"""

from bnkit import (
    ClusterConfig,
    apply_substitution,
    build_spec,
    build_substitution,
    compression_ratio,
    count_frequencies,
    hamming,
    synth_kernels,
    topk_coverage,
)

targets = [(16, 0.36), (32, 0.47), (64, 0.63), (96, 0.73), (160, 0.82), (256, 0.91), (416, 1.0)]
kernels = synth_kernels(targets, total_channels=2**16, rng_seed=11)
table = count_frequencies(kernels)

# Frequent set = top 32 patterns, rare set = bottom 256 occupied patterns.
subs = build_substitution(table, ClusterConfig(frequent_count=32, rare_count=256))
print(f"substitution pairs: {len(subs.pairs)}, untouched rare patterns: {len(subs.untouched)}")
sample = sorted(subs.pairs.items())[:5]
for rare, frequent in sample:
    print(
        f"  {rare:3d} -> {frequent:3d}  (distance {hamming(rare, frequent)},"
        f" counts {int(table.counts[rare])} -> {int(table.counts[frequent])})"
    )

rewritten = apply_substitution(kernels, subs)
after = count_frequencies(rewritten)
for k in (32, 64, 256):
    print(
        f"top-{k:<3} coverage: {topk_coverage(table, k):.3f} ->"
        f" {topk_coverage(after, k):.3f}"
    )

before_ratio = compression_ratio(table, build_spec(table))
after_ratio = compression_ratio(after, build_spec(after))
print(f"\ncompression ratio: {before_ratio:.4f} -> {after_ratio:.4f}")

# Bigger rare sets give better ratios at the cost of more flipped bits.
print("\nsweep of (frequent M, rare N):")
print("   M    N  replaced   ratio")
for m in (16, 32, 64):
    for n in (128, 256):
        s = build_substitution(table, ClusterConfig(m, n))
        t = count_frequencies(apply_substitution(kernels, s))
        r = compression_ratio(t, build_spec(t))
        print(f"  {m:3d}  {n:3d}  {len(s.pairs):8d}  {r:.4f}")
