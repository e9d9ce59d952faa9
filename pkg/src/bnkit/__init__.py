"""Toolkit for compressing and evaluating binary 3x3 convolution kernels."""

from . import bconv, bintensor, cluster, codec, dusim, errors, stats
from .bintensor import (
    BinaryKernel,
    PackedKernel,
    channel_pack,
    channel_unpack,
    index_to_seq,
    load_kernel,
    save_kernel,
    seq_to_index,
)
from .cluster import ClusterConfig, SubstitutionMap, apply_substitution, build_substitution, hamming
from .codec import (
    DEFAULT_LAYOUT,
    CompressedStream,
    HuffmanSpec,
    NodeSpec,
    build_spec,
    compression_ratio,
    decode,
    encode,
    kernel_sequence_order,
    mean_codeword_length,
    model_ratio,
    ratio_from_node_usage,
)
from .stats import FrequencyTable, count_frequencies, synth_kernels, topk_coverage

__version__ = "0.1.0"

__all__ = [
    "BinaryKernel",
    "PackedKernel",
    "ClusterConfig",
    "SubstitutionMap",
    "CompressedStream",
    "HuffmanSpec",
    "NodeSpec",
    "FrequencyTable",
    "DEFAULT_LAYOUT",
    "__version__",
    "apply_substitution",
    "bconv",
    "bintensor",
    "build_spec",
    "build_substitution",
    "channel_pack",
    "channel_unpack",
    "cluster",
    "codec",
    "compression_ratio",
    "count_frequencies",
    "decode",
    "dusim",
    "encode",
    "errors",
    "hamming",
    "index_to_seq",
    "kernel_sequence_order",
    "load_kernel",
    "mean_codeword_length",
    "model_ratio",
    "ratio_from_node_usage",
    "save_kernel",
    "seq_to_index",
    "stats",
    "synth_kernels",
    "topk_coverage",
]
