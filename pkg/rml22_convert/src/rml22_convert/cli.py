"""Command line: `rml22-convert <in> <out> [--verify]`.

Extras: `--verify-only <path.sigds>` checks an existing file, and
`--make-fixture <out.pkl>` writes the synthetic mini-fixture. Exit codes:
0 success, 2 usage/schema error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import sys

from .converter import SchemaError, convert, verify
from .fixture import make_fixture
from .sigds import FormatError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rml22-convert",
        description="Convert the RML22 dataset distribution to .sigds.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("paths", nargs="*", metavar="IN OUT",
                        help="upstream pickle and output .sigds path")
    parser.add_argument("--verify", action="store_true",
                        help="verify the output after conversion")
    parser.add_argument("--verify-only", metavar="SIGDS", default=None,
                        help="verify an existing .sigds file and exit")
    parser.add_argument("--make-fixture", metavar="OUT", default=None,
                        help="write a synthetic mini-fixture pickle and exit")
    parser.add_argument("--fixture-classes", type=int, default=2)
    parser.add_argument("--fixture-snrs", type=int, default=3)
    parser.add_argument("--fixture-frames", type=int, default=4)
    parser.add_argument("--seed", type=int, default=0,
                        help="fixture RNG seed")
    return parser


def _run_verify(path) -> int:
    summary = verify(path)
    for line in summary.lines():
        print(line)
    return 0 if summary.ok else 3


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.make_fixture is not None:
            out = make_fixture(args.make_fixture, args.fixture_classes,
                               args.fixture_snrs, args.fixture_frames,
                               args.seed)
            print(f"wrote fixture {out}")
            return 0
        if args.verify_only is not None:
            return _run_verify(args.verify_only)
        if len(args.paths) != 2:
            print("usage: rml22-convert <in> <out> [--verify]", file=sys.stderr)
            return 2
        in_path, out_path = args.paths
        crc = convert(in_path, out_path)
        print(f"wrote {out_path} (crc32 {crc:#010x})")
        if args.verify:
            return _run_verify(out_path)
        return 0
    except (SchemaError, FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
