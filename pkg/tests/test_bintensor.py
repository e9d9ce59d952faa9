import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bnkit import (
    BinaryKernel,
    channel_pack,
    channel_unpack,
    index_to_seq,
    load_kernel,
    save_kernel,
    seq_to_index,
)
from bnkit.bintensor import PackedKernel
from bnkit.errors import FormatError, ShapeError

from conftest import random_kernel


class TestMapping:
    def test_all_minus_one_is_zero(self):
        assert seq_to_index(np.full((3, 3), -1)) == 0

    def test_all_plus_one_is_511(self):
        assert seq_to_index(np.full((3, 3), 1)) == 511

    def test_lsb_is_bottom_right(self):
        channel = np.full((3, 3), -1)
        channel[2, 2] = 1
        assert seq_to_index(channel) == 1

    def test_msb_is_top_left(self):
        expected = np.full((3, 3), -1)
        expected[0, 0] = 1
        assert np.array_equal(index_to_seq(256), expected)

    def test_inverse_endpoints(self):
        assert (index_to_seq(0) == -1).all()
        assert (index_to_seq(511) == 1).all()

    def test_bijective_over_all_indices(self):
        for s in range(512):
            assert seq_to_index(index_to_seq(s)) == s

    def test_bijective_over_all_channels(self):
        # 512 possible channels, enumerated through the index side.
        seen = {seq_to_index(index_to_seq(s)) for s in range(512)}
        assert seen == set(range(512))

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            seq_to_index(np.zeros((3, 3)))
        with pytest.raises(ValueError):
            index_to_seq(512)


class TestChannelPack:
    def test_two_channel_example(self):
        kernel = BinaryKernel(1, 2, np.array([[511, 0]], dtype=np.uint16))
        packed = channel_pack(kernel, 2)
        assert packed.num_groups == 1
        # lane0 = channel with all ones, lane1 = all zeros -> word 0b01 everywhere
        assert packed.words[0][0] == (1,) * 9

    def test_single_channel_r1_identity(self):
        kernel = BinaryKernel(1, 1, np.array([[0b101010101]], dtype=np.uint16))
        packed = channel_pack(kernel, 1)
        bits = tuple((0b101010101 >> (8 - p)) & 1 for p in range(9))
        assert packed.words[0][0] == bits

    @pytest.mark.parametrize("register_width", [1, 8, 32, 128])
    def test_round_trip(self, rng, register_width):
        for _ in range(5):
            kernel = random_kernel(rng, 3, 128)
            assert channel_unpack(channel_pack(kernel, register_width)) == kernel

    def test_round_trip_partial_group(self, rng):
        kernel = random_kernel(rng, 2, 37)
        packed = channel_pack(kernel, 16)
        assert packed.num_groups == 3
        assert packed.valid_lanes(2) == 5
        assert channel_unpack(packed) == kernel

    def test_flipping_one_bit_changes_one_word_bit(self, rng):
        kernel = random_kernel(rng, 2, 40)
        packed = channel_pack(kernel, 16)
        for _ in range(20):
            o = int(rng.integers(2))
            c = int(rng.integers(40))
            p = int(rng.integers(9))
            seqs = kernel.sequences.copy()
            seqs[o, c] ^= 1 << (8 - p)
            flipped = channel_pack(BinaryKernel(2, 40, seqs), 16)
            diffs = [
                (oo, g, pp, packed.words[oo][g][pp] ^ flipped.words[oo][g][pp])
                for oo in range(2)
                for g in range(packed.num_groups)
                for pp in range(9)
                if packed.words[oo][g][pp] != flipped.words[oo][g][pp]
            ]
            assert len(diffs) == 1
            oo, g, pp, delta = diffs[0]
            assert (oo, g, pp) == (o, c // 16, p)
            assert delta == 1 << (c % 16)

    def test_unpack_rejects_empty_groups(self):
        bad = PackedKernel(4, 1, 0, ((),))
        with pytest.raises(ShapeError):
            channel_unpack(bad)

    def test_unpack_rejects_wrong_group_count(self, rng):
        kernel = random_kernel(rng, 1, 8)
        packed = channel_pack(kernel, 4)
        broken = PackedKernel(4, 1, 8, ((packed.words[0][0],),))
        with pytest.raises(ShapeError):
            channel_unpack(broken)


class TestKernelFile:
    def test_minimal_payload_layout(self, tmp_path):
        path = tmp_path / "k.bnk"
        save_kernel(BinaryKernel(1, 1, np.array([[0]], dtype=np.uint16)), path)
        assert path.read_bytes() == b"BNK1" + (1).to_bytes(4, "little") * 2 + b"\x00\x00"

    def test_round_trip(self, rng, tmp_path):
        kernel = random_kernel(rng, 5, 33)
        path = tmp_path / "k.bnk"
        save_kernel(kernel, path)
        assert load_kernel(path) == kernel

    def test_out_of_range_sequence_rejected_with_offset(self, tmp_path):
        path = tmp_path / "k.bnk"
        payload = b"BNK1" + (1).to_bytes(4, "little") + (2).to_bytes(4, "little")
        payload += (5).to_bytes(2, "little") + (512).to_bytes(2, "little")
        path.write_bytes(payload)
        with pytest.raises(FormatError) as err:
            load_kernel(path)
        assert err.value.offset == 14

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "k.bnk"
        path.write_bytes(b"XXXX" + bytes(10))
        with pytest.raises(FormatError):
            load_kernel(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "k.bnk"
        path.write_bytes(b"BNK1" + (2).to_bytes(4, "little") * 2 + b"\x00\x00")
        with pytest.raises(FormatError):
            load_kernel(path)


@given(
    seqs=st.lists(st.integers(0, 511), min_size=1, max_size=64),
    register_width=st.sampled_from([1, 3, 8, 16, 64, 128]),
)
@settings(max_examples=40, deadline=None)
def test_pack_round_trip_property(seqs, register_width):
    kernel = BinaryKernel(1, len(seqs), np.array([seqs], dtype=np.uint16))
    assert channel_unpack(channel_pack(kernel, register_width)) == kernel
