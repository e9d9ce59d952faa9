"""Command-line surface: analyze, compress, cluster, eval, simulate, report.

Every command emits deterministic JSON (stdout or --json-out) and can
record a run manifest with input/output digests so runs are reproducible
byte for byte. Exit codes: 0 success, 2 usage/format error, 3 simulator
fault.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, bconv, bintensor, cluster, codec, dusim, stats
from .errors import BnkitError, CapacityError, SimulatorFault

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SIM_FAULT = 3

# ReActNet-style storage breakdown used by the report command (fractions).
DEFAULT_STORAGE_SHARES = {
    "input_layer": 0.0002,
    "output_layer": 0.2217,
    "conv1x1": 0.085,
    "conv3x3": 0.68,
    "others": 0.0131,
}

PACKED_SETS_MAGIC = b"BNP1"


def _parse_layout(text: str) -> tuple[tuple[str, int], ...]:
    """Layout flag format: comma-separated prefix:index_bits pairs."""
    nodes = []
    for item in text.split(","):
        prefix, _, bits = item.partition(":")
        if not bits or set(prefix) - {"0", "1"}:
            raise argparse.ArgumentTypeError(
                f"bad layout item {item!r}, expected PREFIX:INDEX_BITS"
            )
        nodes.append((prefix, int(bits)))
    return tuple(nodes)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _emit_json(payload: dict, json_out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if json_out:
        Path(json_out).write_text(text + "\n")
    else:
        print(text)


def _write_manifest(path: str | None, command: str, inputs, config: dict, outputs, results: dict):
    if not path:
        return
    manifest = {
        "command": command,
        "inputs": [str(p) for p in inputs],
        "config": config,
        "version": __version__,
        "outputs": {str(p): _sha256(Path(p)) for p in outputs},
        "results": results,
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load_kernels(paths) -> list[bintensor.BinaryKernel]:
    kernels = []
    for path in paths:
        try:
            kernels.append(bintensor.load_kernel(path))
        except FileNotFoundError:
            raise BnkitError(f"cannot read kernel file {path}: no such file")
        except BnkitError as exc:
            raise BnkitError(f"{path}: {exc}")
    return kernels


# -- subcommands -------------------------------------------------------------


def cmd_analyze(args) -> int:
    kernels = _load_kernels(args.kernels)
    table = stats.count_frequencies(kernels)
    report = stats.coverage_report(table)
    _emit_json(report, args.json_out)
    _write_manifest(
        args.manifest, "analyze", args.kernels, {"seed": args.seed}, [],
        {"total": report["total"], "coverage": report["coverage"]},
    )
    return EXIT_OK


def _compress_group(kernels, layout):
    table = stats.count_frequencies(kernels)
    spec = codec.build_spec(table, layout)
    stream = codec.encode(kernels, spec)
    analytic = codec.compression_ratio(table, spec)
    measured = 9 * stream.count / stream.bit_length
    return table, spec, stream, analytic, measured


def cmd_compress(args) -> int:
    kernels = _load_kernels(args.kernels)
    layout = args.layout
    outputs = []
    try:
        if args.per_kernel:
            ratios = []
            for i, kernel in enumerate(kernels):
                _, spec, stream, analytic, measured = _compress_group([kernel], layout)
                path = f"{args.out}.k{i}"
                codec.write_compressed(path, stream, spec)
                outputs.append(path)
                ratios.append({"kernel": i, "analytic_ratio": analytic, "measured_ratio": measured})
            total_seq = sum(k.sequences.size for k in kernels)
            mean_measured = float(np.mean([r["measured_ratio"] for r in ratios]))
            report = {
                "granularity": "per-kernel",
                "total_sequences": total_seq,
                "per_kernel": ratios,
                "measured_ratio": mean_measured,
                "analytic_ratio": float(np.mean([r["analytic_ratio"] for r in ratios])),
            }
        else:
            _, spec, stream, analytic, measured = _compress_group(kernels, layout)
            codec.write_compressed(args.out, stream, spec)
            outputs.append(args.out)
            report = {
                "granularity": "per-block",
                "total_sequences": stream.count,
                "payload_bits": stream.bit_length,
                "analytic_ratio": analytic,
                "measured_ratio": measured,
            }
    except CapacityError as exc:
        print(
            f"error: {exc}; run `bnkit cluster` first to fold rare sequences"
            " into frequent ones",
            file=sys.stderr,
        )
        return EXIT_USAGE
    report["layout"] = [list(n) for n in layout]
    report["label"] = args.label
    _emit_json(report, args.json_out)
    _write_manifest(
        args.manifest, "compress", args.kernels,
        {
            "layout": [list(n) for n in layout],
            "per_kernel": args.per_kernel,
            "label": args.label,
            "tag": args.tag,
            "seed": args.seed,
        },
        outputs, report,
    )
    return EXIT_OK


def cmd_cluster(args) -> int:
    kernels = _load_kernels(args.kernels)
    table = stats.count_frequencies(kernels)
    if args.sweep:
        grid = []
        ms, _, ns = args.sweep.partition("x")
        for m in (int(v) for v in ms.split(",")):
            for n in (int(v) for v in ns.split(",")):
                cfg = cluster.ClusterConfig(m, n)
                subs = cluster.build_substitution(table, cfg)
                rewritten = cluster.apply_substitution(kernels, subs)
                new_table = stats.count_frequencies(rewritten)
                spec = codec.build_spec(new_table, args.layout)
                grid.append(
                    {
                        "M": m,
                        "N": n,
                        "replaced": len(subs.pairs),
                        "ratio": codec.compression_ratio(new_table, spec),
                    }
                )
        _emit_json({"sweep": grid}, args.json_out)
        _write_manifest(
            args.manifest, "cluster", args.kernels,
            {"sweep": args.sweep, "seed": args.seed}, [], {"sweep": grid},
        )
        return EXIT_OK

    cfg = cluster.ClusterConfig(args.frequent, args.rare)
    subs = cluster.build_substitution(table, cfg)
    rewritten = cluster.apply_substitution(kernels, subs)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for src, kernel in zip(args.kernels, rewritten):
        dest = out_dir / Path(src).name
        bintensor.save_kernel(kernel, dest)
        outputs.append(dest)
    report = cluster.substitution_report(table, subs, kernels, rewritten)
    _emit_json(report, args.json_out)
    _write_manifest(
        args.manifest, "cluster", args.kernels,
        {"M": args.frequent, "N": args.rare, "seed": args.seed},
        outputs, {k: report[k] for k in ("coverage_before", "coverage_after", "residual_rare_mass")},
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    kernel = _load_kernels([args.kernel])[0]
    fmap = bconv.load_bit_feature_map(args.input, args.register_width)
    packed = bintensor.channel_pack(kernel, args.register_width)
    if args.check:
        ref = bconv.conv_reference(kernel, fmap, args.stride, args.padding)
        fast = bconv.conv_packed(packed, fmap, args.stride, args.padding)
        if ref != fast:
            print("error: packed and reference outputs disagree", file=sys.stderr)
            return 1
        result = ref
    elif args.mode == "reference":
        result = bconv.conv_reference(kernel, fmap, args.stride, args.padding)
    else:
        result = bconv.conv_packed(packed, fmap, args.stride, args.padding)
    bconv.save_int_feature_map(result, args.out)
    _write_manifest(
        args.manifest, "eval", [args.kernel, args.input],
        {
            "mode": args.mode,
            "check": args.check,
            "stride": args.stride,
            "padding": args.padding,
            "register_width": args.register_width,
            "seed": args.seed,
        },
        [args.out], {"shape": list(result.data.shape)},
    )
    return EXIT_OK


def _write_packed_sets(path, sets, register_width: int) -> None:
    word_bytes = (register_width + 7) // 8
    with open(path, "wb") as fh:
        fh.write(PACKED_SETS_MAGIC)
        fh.write(len(sets).to_bytes(4, "little"))
        fh.write(register_width.to_bytes(4, "little"))
        for regs in sets:
            for word in regs:
                fh.write(int(word).to_bytes(word_bytes, "little"))


def cmd_simulate(args) -> int:
    try:
        stream, spec = codec.read_compressed(args.compressed)
    except FileNotFoundError:
        print(f"error: cannot read {args.compressed}", file=sys.stderr)
        return EXIT_USAGE

    # Memory image: configuration blob at address 0, stream right behind it.
    blob_len = len(dusim.DecodingUnitConfig(stream.count, 0, len(stream.payload), spec).pack_blob())
    config = dusim.DecodingUnitConfig(stream.count, blob_len, len(stream.payload), spec)
    memory = config.pack_blob() + stream.payload
    try:
        state = dusim.lddu(
            0, memory,
            fetch_granularity=args.fetch_bytes,
            packing_width=args.register_width,
            fetch_latency=args.fetch_latency,
        )
        state, sets, report = dusim.run_to_completion(state)
    except SimulatorFault as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SIM_FAULT

    decoded = codec.decode(stream, spec)
    expected = []
    if decoded:
        reference = bintensor.channel_pack(
            bintensor.BinaryKernel(1, len(decoded), np.asarray([decoded], dtype=np.uint16)),
            args.register_width,
        )
        expected = [list(group) for group in reference.words[0]]
    passed = sets == expected
    _write_packed_sets(args.out, sets, args.register_width)
    payload = {
        "status": "PASS" if passed else "FAIL",
        "register_sets": len(sets),
        "cycle_report": report.to_dict(),
    }
    _emit_json(payload, args.json_out)
    _write_manifest(
        args.manifest, "simulate", [args.compressed],
        {
            "register_width": args.register_width,
            "fetch_bytes": args.fetch_bytes,
            "fetch_latency": args.fetch_latency,
            "seed": args.seed,
        },
        [args.out], payload,
    )
    return EXIT_OK if passed else 1


def cmd_report(args) -> int:
    rows: dict[str, dict[str, float]] = {}
    for path in args.manifests:
        try:
            manifest = json.loads(Path(path).read_text())
            label = manifest["config"]["label"]
            tag = manifest["config"].get("tag", "encoding")
            ratio = manifest["results"]["measured_ratio"]
        except (FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
            print(f"error: manifest {path} unusable: {exc!r}", file=sys.stderr)
            return EXIT_USAGE
        rows.setdefault(label, {})[tag] = ratio

    clustering = [r["clustering"] for r in rows.values() if "clustering" in r]
    encoding = [r["encoding"] for r in rows.values() if "encoding" in r]
    per_layer = float(np.mean(clustering if clustering else encoding))
    shares = dict(DEFAULT_STORAGE_SHARES)
    shares["conv3x3"] = args.conv3x3_share
    scale = sum(v for k, v in shares.items() if k != "conv3x3")
    for key in shares:
        if key != "conv3x3":
            shares[key] *= (1.0 - args.conv3x3_share) / scale
    overall = codec.model_ratio(shares, per_layer)

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["block", "encoding_ratio", "clustering_ratio"])
        for label in sorted(rows):
            writer.writerow(
                [
                    label,
                    rows[label].get("encoding", ""),
                    rows[label].get("clustering", ""),
                ]
            )
        writer.writerow(["model_ratio", overall, ""])
    _emit_json({"model_ratio": overall, "per_layer_ratio": per_layer}, args.json_out)
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bnkit", description="Binary 3x3 kernel compression toolkit"
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="seed recorded in manifests")
        p.add_argument("--json-out", help="write the JSON report here instead of stdout")
        p.add_argument("--manifest", help="write a run manifest to this path")

    p = sub.add_parser("analyze", help="frequency and coverage report for kernel files")
    p.add_argument("kernels", nargs="+")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compress", help="encode kernels into a compressed stream")
    p.add_argument("kernels", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--layout", type=_parse_layout, default=codec.DEFAULT_LAYOUT)
    p.add_argument("--per-kernel", action="store_true", help="one code per kernel (default: per block)")
    p.add_argument("--label", default="block")
    p.add_argument("--tag", choices=("encoding", "clustering"), default="encoding")
    common(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("cluster", help="substitute rare sequences by frequent neighbors")
    p.add_argument("kernels", nargs="+")
    p.add_argument("--out-dir", default="clustered")
    p.add_argument("--frequent", "-M", type=int, default=32, help="size of the frequent set")
    p.add_argument("--rare", "-N", type=int, default=256, help="size of the rare set")
    p.add_argument("--sweep", help="grid search, e.g. 16,32,64x128,256")
    p.add_argument("--layout", type=_parse_layout, default=codec.DEFAULT_LAYOUT)
    common(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("eval", help="run a binary convolution")
    p.add_argument("--kernel", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("packed", "reference"), default="packed")
    p.add_argument("--check", action="store_true", help="run both paths and compare")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--padding", choices=(bconv.PAD_VALID, bconv.PAD_MINUS_ONE), default=bconv.PAD_VALID)
    p.add_argument("--register-width", type=int, default=128)
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="run the decoding-unit model on a compressed file")
    p.add_argument("compressed")
    p.add_argument("--out", required=True)
    p.add_argument("--register-width", type=int, default=128)
    p.add_argument("--fetch-bytes", type=int, default=dusim.DEFAULT_FETCH_BYTES)
    p.add_argument("--fetch-latency", type=int, default=dusim.DEFAULT_FETCH_LATENCY)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="consolidate run manifests into a CSV")
    p.add_argument("manifests", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--conv3x3-share", type=float, default=0.68)
    common(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SimulatorFault as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SIM_FAULT
    except BnkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
