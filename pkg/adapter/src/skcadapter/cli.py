"""Adapter CLI: `export` backbone dumps to SKC1, `validate` SKC1 files.

Exit codes: 0 success, 2 invalid inputs, 1 runtime error.
"""

from __future__ import annotations

import argparse
import sys

from .convert import convert
from .manifest import ExportManifest, ManifestError
from .skc1 import Skc1Error
from .validate import validate


def _cmd_export(args) -> int:
    manifest = ExportManifest(
        features_path=args.features,
        logits_path=args.logits,
        labels_path=args.labels,
        classes_path=args.classes,
        split_path=args.split,
    )
    stream = convert(manifest, args.out)
    print(f"wrote {stream.sample_count} samples, {stream.class_count} classes, "
          f"dims ({stream.channels}, {stream.frames}, {stream.joints}) to {args.out}")
    return 0


def _cmd_validate(args) -> int:
    report = validate(args.path)
    for line in report.lines():
        print(line)
    return 0 if report.ok else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skc-adapter",
        description="Bridge NumPy feature/logit dumps into SKC1 stream containers.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    exp = subs.add_parser("export", help="convert a dump manifest into an SKC1 file")
    exp.add_argument("--features", required=True, help=".npy/.npz per-sample feature arrays")
    exp.add_argument("--logits", required=True, help=".npy/.npz per-sample zero-shot logits")
    exp.add_argument("--labels", required=True, help=".npy vector or text file of labels")
    exp.add_argument("--classes", required=True, help="text/JSON file of class names")
    exp.add_argument("--split", default=None, help="optional text file of seen classes")
    exp.add_argument("--out", required=True, help="output SKC1 path")
    exp.set_defaults(fn=_cmd_export)

    val = subs.add_parser("validate", help="independently re-parse and summarise an SKC1 file")
    val.add_argument("path", help="SKC1 file to check")
    val.set_defaults(fn=_cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ManifestError, Skc1Error, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
