"""Binary convolution via xnor + popcount on channel-packed words.

With weights and activations in {-1, +1}, a dot product reduces to
counting bit agreements: o = 2 * popcount(xnor(w, x)) - n. Packing input
channels into register-width words evaluates many channels per operation.
This script checks the packed path against a plain arithmetic reference
and times both.
"""

import time

import numpy as np

from bnkit import BinaryKernel, channel_pack
from bnkit.bconv import BitFeatureMap, conv_packed, conv_reference

rng = np.random.default_rng(3)
channels, height, width = 128, 16, 16
out_channels = 8
register_width = 128

kernel = BinaryKernel(
    out_channels,
    channels,
    rng.integers(0, 512, size=(out_channels, channels), dtype=np.uint16),
)
bits = rng.integers(0, 2, size=(channels, height, width), dtype=np.uint8)
fmap = BitFeatureMap.from_bits(bits, register_width)
packed = channel_pack(kernel, register_width)

print(f"{channels} input channels in {packed.num_groups} group(s) of {register_width} lanes")

for stride in (1, 2):
    for padding in ("valid", "minus_one"):
        t0 = time.perf_counter()
        ref = conv_reference(kernel, fmap, stride, padding)
        t_ref = time.perf_counter() - t0
        t0 = time.perf_counter()
        fast = conv_packed(packed, fmap, stride, padding)
        t_fast = time.perf_counter() - t0
        status = "match" if ref == fast else "MISMATCH"
        print(
            f"stride {stride}, padding {padding:9s}: {status},"
            f" output {fast.data.shape}, reference {t_ref * 1e3:.1f} ms,"
            f" packed {t_fast * 1e3:.1f} ms"
        )

# Outputs live on a fixed grid: |o| <= 9 * channels with a fixed parity.
out = conv_packed(packed, fmap)
print(f"\noutput range [{out.data.min()}, {out.data.max()}], bound ±{9 * channels}")
assert ((out.data - 9 * channels) % 2 == 0).all()
print("parity invariant holds")
