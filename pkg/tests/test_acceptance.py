"""Acceptance gate: one check per published claim, one PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
lines. Criteria 1-3 are exact arithmetic on published usage fractions;
criterion 4 replays every per-block (coverage, ratio) row on synthetic
kernels; 5-7 are exhaustive randomized equivalence checks; 8 substitutes a
measurable simulator property for the hardware-only timing claims.
"""

import json

import numpy as np
import pytest

from bnkit import (
    BinaryKernel,
    ClusterConfig,
    CompressedStream,
    apply_substitution,
    build_spec,
    build_substitution,
    channel_pack,
    compression_ratio,
    count_frequencies,
    decode,
    encode,
    hamming,
    kernel_sequence_order,
    mean_codeword_length,
    model_ratio,
    ratio_from_node_usage,
    save_kernel,
    synth_kernels,
    topk_coverage,
)
from bnkit.bconv import BitFeatureMap, conv_packed, conv_reference
from bnkit.cli import DEFAULT_STORAGE_SHARES, main
from bnkit.codec import DEFAULT_LAYOUT
from bnkit.dusim import DecodingUnitConfig, DecodingUnitState, run_to_completion

from blockfixtures import BLOCK_CHANNELS, BLOCKS, block_targets
from conftest import random_kernel


def report(criterion: str, ok: bool, detail: str = ""):
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}"
    if detail:
        line += f" — {detail}"
    print(line)
    return ok


class TestAnalyticRatios:
    def test_criterion_1_encoding_ratio(self):
        ratio = ratio_from_node_usage((0.46, 0.24, 0.23, 0.05), (6, 8, 9, 12))
        ok = ratio == 9 / 7.35 and 1.18 <= ratio <= 1.25
        assert report(
            "criterion 1: analytic encoding ratio", ok, f"ratio={ratio:.4f}"
        )

    def test_criterion_2_clustering_ratio(self):
        ratio = ratio_from_node_usage((0.65, 0.25, 0.08, 0.006), (6, 8, 9, 12))
        ok = abs(ratio - 1.34) <= 0.05 and 1.30 - 0.05 <= ratio <= 1.36 + 0.05
        assert report(
            "criterion 2: analytic clustering ratio", ok, f"ratio={ratio:.4f}"
        )

    def test_criterion_3_whole_model_ratio(self):
        ratio = model_ratio(DEFAULT_STORAGE_SHARES, 1.32)
        ok = abs(ratio - 1.20) <= 0.01
        assert report(
            "criterion 3: whole-model ratio at 68% share", ok, f"ratio={ratio:.4f}"
        )


class TestBlockReproduction:
    @pytest.mark.parametrize("block", sorted(BLOCKS))
    def test_criterion_4_block(self, block, tmp_path, capsys):
        c64, c256, published_ratio, _ = BLOCKS[block]
        kernels = synth_kernels(block_targets(block), BLOCK_CHANNELS, rng_seed=block)
        table = count_frequencies(kernels)
        d64 = abs(topk_coverage(table, 64) - c64)
        d256 = abs(topk_coverage(table, 256) - c256)

        kernel_path = tmp_path / f"block{block}.bnk"
        save_kernel(kernels[0], kernel_path)
        json_path = tmp_path / "compress.json"
        code = main(
            [
                "compress",
                str(kernel_path),
                "--out",
                str(tmp_path / "stream.bnc"),
                "--json-out",
                str(json_path),
            ]
        )
        assert code == 0
        measured_ratio = json.loads(json_path.read_text())["measured_ratio"]
        dr = abs(measured_ratio - published_ratio)

        ok = d64 <= 0.015 and d256 <= 0.015 and dr <= 0.06
        with capsys.disabled():
            report(
                f"criterion 4: block {block} coverage+ratio",
                ok,
                f"Δcov64={d64 * 100:.2f}pp Δcov256={d256 * 100:.2f}pp"
                f" ratio={measured_ratio:.4f} (published {published_ratio}, Δ{dr:.4f})",
            )
        assert ok, (
            f"block {block}: Δcov64={d64:.4f} Δcov256={d256:.4f} Δratio={dr:.4f}"
        )


class TestLosslessRoundTrip:
    def test_criterion_5_round_trip_and_simulator(self, rng):
        layouts = [
            DEFAULT_LAYOUT,
            (("0", 6), ("10", 7), ("11", 8)),
            (("00", 7), ("01", 7), ("10", 7), ("11", 7)),
        ]
        failures = 0
        checked = 0
        for i in range(1000):
            layout = layouts[i % len(layouts)]
            kernel = random_kernel(rng, int(rng.integers(1, 4)), int(rng.integers(1, 65)))
            spec = build_spec(count_frequencies([kernel]), layout)
            stream = encode([kernel], spec)
            decoded = decode(stream, spec)
            if list(decoded) != list(kernel_sequence_order([kernel])):
                failures += 1
            checked += 1
        ok_codec = failures == 0

        sim_failures = 0
        for i in range(25):
            kernel = random_kernel(rng, 1, 64)
            spec = build_spec(count_frequencies([kernel]))
            stream = encode([kernel], spec)
            base = len(DecodingUnitConfig(0, 0, 0, spec).pack_blob())
            config = DecodingUnitConfig(
                stream.count, base, len(stream.payload), spec, packing_width=16
            )
            memory = config.pack_blob() + stream.payload
            _, outputs, _ = run_to_completion(DecodingUnitState(config, memory))
            decoded = decode(
                CompressedStream(stream.count, stream.payload), spec
            )
            flat = BinaryKernel.from_sequences(
                np.asarray(decoded, dtype=np.uint16).reshape(1, -1)
            )
            packed = channel_pack(flat, 16)
            expected = [list(packed.words[0][g]) for g in range(packed.num_groups)]
            if outputs != expected:
                sim_failures += 1
        ok_sim = sim_failures == 0

        ok = ok_codec and ok_sim
        assert report(
            "criterion 5: lossless round-trip + simulator equivalence",
            ok,
            f"{checked} codec round-trips, {failures} mismatches;"
            f" 25 simulator runs, {sim_failures} mismatches",
        )


class TestConvolutionOracle:
    def test_criterion_6_packed_equals_reference(self, rng):
        instances = 0
        mismatches = 0
        while instances < 200:
            channels = int(rng.choice([1, 3, 8, 17, 32, 64, 128]))
            height = int(rng.integers(3, 17))
            width = int(rng.integers(3, 17))
            stride = int(rng.choice([1, 2]))
            padding = str(rng.choice(["valid", "minus_one"]))
            register_width = int(rng.choice([8, 16, 32, 128]))
            out_channels = int(rng.integers(1, 4))
            kernel = random_kernel(rng, out_channels, channels)
            bits = rng.integers(0, 2, size=(channels, height, width), dtype=np.uint8)
            fmap = BitFeatureMap.from_bits(bits, register_width)
            ref = conv_reference(kernel, fmap, stride, padding)
            got = conv_packed(channel_pack(kernel, register_width), fmap, stride, padding)
            if ref != got:
                mismatches += 1
            instances += 1
        ok = mismatches == 0
        assert report(
            "criterion 6: packed convolution matches reference",
            ok,
            f"{instances} instances, {mismatches} mismatches",
        )


class TestClusteringProperties:
    def test_criterion_7_substitution_invariants(self, rng):
        bad_pairs = 0
        length_regressions = 0
        bad_perturbations = 0
        for trial in range(20):
            kernels = [random_kernel(rng, 4, 64)]
            table = count_frequencies(kernels)
            cfg = ClusterConfig(int(rng.integers(8, 64)), int(rng.integers(32, 256)))
            subs = build_substitution(table, cfg)
            for rare, frequent in subs.pairs.items():
                if hamming(rare, frequent) != 1:
                    bad_pairs += 1
                if table.counts[frequent] < table.counts[rare]:
                    bad_pairs += 1
            after = apply_substitution(kernels, subs)
            spec = build_spec(table)
            before_len = mean_codeword_length(table, spec)
            table_after = count_frequencies(after)
            after_len = mean_codeword_length(table_after, build_spec(table_after))
            if after_len > before_len + 1e-12:
                length_regressions += 1

        # single-substitution output perturbation is 0 or +/-2
        for trial in range(10):
            channels = 16
            kernel = random_kernel(rng, 1, channels)
            seqs = kernel.sequences.copy()
            seqs[0, int(rng.integers(channels))] ^= 1 << int(rng.integers(9))
            perturbed = BinaryKernel(1, channels, seqs)
            bits = rng.integers(0, 2, size=(channels, 6, 6), dtype=np.uint8)
            fmap = BitFeatureMap.from_bits(bits, 16)
            delta = np.abs(
                conv_reference(kernel, fmap).data - conv_reference(perturbed, fmap).data
            )
            if not set(np.unique(delta)) <= {0, 2}:
                bad_perturbations += 1

        ok = bad_pairs == 0 and length_regressions == 0 and bad_perturbations == 0
        assert report(
            "criterion 7: clustering invariants",
            ok,
            f"bad pairs {bad_pairs}, length regressions {length_regressions},"
            f" bad perturbations {bad_perturbations}",
        )


class TestSimulatorTiming:
    def test_criterion_8_overlap_and_determinism(self):
        overlaps = []
        deterministic = True
        for block in (1, 7, 12):
            kernels = synth_kernels(block_targets(block), 2**15, rng_seed=block)
            spec = build_spec(count_frequencies(kernels))
            stream = encode(kernels, spec)
            base = len(DecodingUnitConfig(0, 0, 0, spec).pack_blob())
            config = DecodingUnitConfig(
                stream.count, base, len(stream.payload), spec
            )
            memory = config.pack_blob() + stream.payload
            reports = [
                run_to_completion(DecodingUnitState(config, memory))[2].to_dict()
                for _ in range(2)
            ]
            if reports[0] != reports[1]:
                deterministic = False
            overlaps.append(reports[0]["fetch_overlap"])
        ok = all(o > 0.5 for o in overlaps) and deterministic
        assert report(
            "criterion 8: fetch/decode overlap + determinism",
            ok,
            f"overlaps {[f'{o:.3f}' for o in overlaps]}, deterministic={deterministic}",
        )
