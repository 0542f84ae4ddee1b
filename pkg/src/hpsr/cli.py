"""Command-line interface: ``hpsr encode|decode|eval|sweep``.

Exit status is 0 on success, 1 on usage errors and 2 on data errors
(malformed streams, bad PLY files, invalid parameters).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .codec import CodecConfig, decode_stream, encode_cloud, stream_allocation
from .config import thread_count
from .errors import HPSRError, MetricError, ParameterError
from .geometry import NeighborSet, as_rational
from .metrics import DEFAULT_NORMAL_K, estimate_normals, evaluate
from .pcio import load_voxel_cloud, on_grid, read_point_file, write_ply
from .priorcodec import PriorMode
from .pyramid import DEFAULT_K_MAX, DEFAULT_KPRIME_MAX
from .report import bd_summary, write_csv
from .sweep import DEFAULT_S_LADDER, run_sweep

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    """A flag combination argparse cannot check by itself."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _rational(text: str) -> Fraction:
    try:
        return as_rational(text)
    except ParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _normals_option(text: str) -> tuple[str, int]:
    if text == "file":
        return "file", DEFAULT_NORMAL_K
    if text.startswith("estimate"):
        _, _, k = text.partition(":")
        try:
            return "estimate", int(k) if k else DEFAULT_NORMAL_K
        except ValueError:
            pass
    raise argparse.ArgumentTypeError(f"expected 'file' or 'estimate:k', got {text!r}")


def _add_codec_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--bitdepth", type=int, help="grid precision (inferred for integer clouds)")
    parser.add_argument("--K", dest="k_max", type=int, default=DEFAULT_K_MAX,
                        help="upper bound on pyramid steps K (default %(default)s)")
    parser.add_argument("--Kprime", dest="kprime_max", type=int, default=DEFAULT_KPRIME_MAX,
                        help="upper bound on pattern-reuse iterations K' (default %(default)s)")
    parser.add_argument("--nbrK", type=int, choices=(6, 18, 26), default=18,
                        help="base-level neighbor set (default %(default)s)")
    parser.add_argument("--nbrI", type=int, choices=(6, 18, 26), default=6,
                        help="intermediate-level neighbor set (default %(default)s)")
    parser.add_argument("--prior-mode", choices=("raw", "entropy"), default="raw",
                        help="prior serialization (default %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hpsr", description="Point-cloud geometry codec with hierarchical super resolution.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    encode = commands.add_parser("encode", help="encode a PLY cloud into an HPSR stream")
    encode.add_argument("input", type=Path)
    encode.add_argument("output", type=Path)
    scale = encode.add_mutually_exclusive_group(required=True)
    scale.add_argument("--q", type=_rational, help="downsampling factor a/b")
    scale.add_argument("--s", type=_rational, help="MPEG geometry scale a/b, mapped to q")
    _add_codec_flags(encode)

    decode = commands.add_parser("decode", help="decode an HPSR stream into a PLY cloud")
    decode.add_argument("input", type=Path)
    decode.add_argument("output", type=Path)
    decode.add_argument("--skip-kprime", action="store_true", help="skip the K' reuse iterations")
    decode.add_argument("--ascii", action="store_true", help="write ASCII PLY")

    evaluate_cmd = commands.add_parser("eval", help="D1/D2 PSNR of a test cloud against a reference")
    evaluate_cmd.add_argument("reference", type=Path)
    evaluate_cmd.add_argument("test", type=Path)
    evaluate_cmd.add_argument("--bitdepth", type=int, required=True)
    evaluate_cmd.add_argument("--stream", type=Path, help="HPSR stream whose rate to report")
    evaluate_cmd.add_argument("--normals", type=_normals_option, help="file | estimate:k")
    evaluate_cmd.add_argument("--d2", action="store_true", help="also report D2 (needs --normals)")

    sweep = commands.add_parser("sweep", help="RD sweep of HPSR against the naive baseline")
    sweep.add_argument("input", type=Path)
    rates = sweep.add_mutually_exclusive_group()
    rates.add_argument("--q", type=_rational, nargs="+", help="q values")
    rates.add_argument("--s", type=_rational, nargs="+", help="s values (default 1/16 .. 7/8)")
    _add_codec_flags(sweep)
    sweep.add_argument("--normals", type=_normals_option, default=("estimate", DEFAULT_NORMAL_K),
                       help="reference normals: file | estimate:k (default estimate:12)")
    sweep.add_argument("--no-d2", action="store_true", help="skip D2")
    sweep.add_argument("--bd", action="store_true", help="print BD-rate(naive -> hpsr) as JSON")
    sweep.add_argument("--csv", type=Path, help="write the CSV here instead of stdout")
    return parser


def _infer_bitdepth(path: Path, bitdepth: int | None) -> int:
    if bitdepth is not None:
        return bitdepth
    positions, _normals = read_point_file(path)
    if positions.size and on_grid(positions, 21):
        return max(1, int(positions.max()).bit_length())
    raise UsageError(f"{path} is not an integer voxel cloud; pass --bitdepth")


def _config(args, q: Fraction | None = None, s: Fraction | None = None) -> CodecConfig:
    options = dict(
        k_max=args.k_max,
        kprime_max=args.kprime_max,
        nbr_k=NeighborSet.from_size(args.nbrK),
        nbr_i=NeighborSet.from_size(args.nbrI),
        prior_mode=PriorMode.parse(args.prior_mode),
    )
    if s is not None:
        return CodecConfig.from_s(s, **options)
    return CodecConfig(q, **options)


def cmd_encode(args) -> int:
    bitdepth = _infer_bitdepth(args.input, args.bitdepth)
    cloud = load_voxel_cloud(args.input, bitdepth)
    config = _config(args, q=args.q, s=args.s)
    result = encode_cloud(cloud, config)
    args.output.write_bytes(result.stream)

    allocation = result.allocation
    stats = {
        "config": config.describe(),
        "q": str(result.params.q),
        "K": result.params.K,
        "Kprime": result.params.Kprime,
        "points": len(cloud),
        "base_points": len(result.base),
        "header_bits": allocation.header_bits,
        "base_bits": allocation.base_bits,
        "prior_bits": allocation.prior_bits,
        "total_bits": allocation.total_bits,
        "bpp": allocation.bpp(len(cloud)),
    }
    print(json.dumps(stats))
    return EXIT_OK


def cmd_decode(args) -> int:
    try:
        data = args.input.read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc.strerror}") from None
    cloud = decode_stream(data, skip_kprime=args.skip_kprime)
    args.output.write_bytes(write_ply(cloud, binary=not args.ascii))
    return EXIT_OK


def _eval_normals(option, positions: np.ndarray, from_file: np.ndarray | None):
    mode, k = option
    if mode == "file" and from_file is not None:
        return from_file
    return estimate_normals(positions, k)


def cmd_eval(args) -> int:
    reference, reference_file_normals = read_point_file(args.reference)
    test, test_file_normals = read_point_file(args.test)
    with_d2 = args.d2 or args.normals is not None
    if with_d2 and args.normals is None:
        raise MetricError("D2 needs normals: pass --normals file or --normals estimate:k")

    reference_normals = test_normals = None
    if with_d2:
        reference_normals = _eval_normals(args.normals, reference, reference_file_normals)
        test_normals = _eval_normals(args.normals, test, test_file_normals)

    allocation = stream_allocation(args.stream.read_bytes()) if args.stream else None
    point = evaluate(
        reference,
        test,
        args.bitdepth,
        reference_normals=reference_normals,
        test_normals=test_normals,
        with_d2=with_d2,
        allocation=allocation,
        rate_id="eval",
    )
    sys.stdout.write(write_csv([point]))
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.q:
        ladder = [dict(q=q) for q in args.q]
    else:
        ladder = [dict(s=s) for s in (args.s or DEFAULT_S_LADDER)]
    if args.bd and len(ladder) < 4:
        raise UsageError(f"--bd needs at least 4 rate points, got {len(ladder)}")

    bitdepth = _infer_bitdepth(args.input, args.bitdepth)
    loaded = load_voxel_cloud(args.input, bitdepth, return_metadata=True)
    cloud = loaded['cloud']
    configs = [_config(args, **rate) for rate in ladder]

    mode, k = args.normals
    reference_normals = None
    if not args.no_d2 and mode == "file":
        if loaded['normals'] is None:
            raise MetricError(f"{args.input} carries no usable normals; use --normals estimate:k")
        reference_normals = loaded['normals']

    hpsr, naive = run_sweep(
        cloud,
        configs,
        threads=thread_count(),
        with_d2=not args.no_d2,
        reference_normals=reference_normals,
        normal_k=k,
    )
    text = write_csv(hpsr + naive)
    if args.csv:
        args.csv.write_text(text)
    else:
        sys.stdout.write(text)
    if args.bd:
        summary = bd_summary(naive, hpsr, with_d2=not args.no_d2)
        print(json.dumps(summary))
    return EXIT_OK


COMMANDS = {
    "encode": cmd_encode,
    "decode": cmd_decode,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"hpsr {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HPSRError as exc:
        print(f"hpsr {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"hpsr {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
