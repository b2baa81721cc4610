"""Command line for the exporter: one subcommand, export."""

import argparse
import sys

from .exporter import EncoderError, export


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # Tolerate the bare flag form: `embed-export --corpus ...`.
    if argv and argv[0] == "export":
        argv = argv[1:]
    parser = argparse.ArgumentParser(
        prog="embed-export export",
        description="Export frozen-encoder token vectors for a corpus to a TKV1 file.",
    )
    parser.add_argument("--corpus", required=True, help="sentence-level corpus JSON Lines")
    parser.add_argument("--encoder", required=True, help="model id or local checkpoint directory")
    parser.add_argument("--layer", type=int, default=-1, help="hidden-state layer to export (default: last)")
    parser.add_argument("--out", required=True, help="TKV1 output path")
    parser.add_argument("--manifest", help="manifest JSON path (default: <out>.manifest.json)")
    parser.add_argument("--batch-size", dest="batch_size", type=int, default=8)
    args = parser.parse_args(argv)

    try:
        manifest = export(
            args.corpus,
            args.encoder,
            args.out,
            layer=args.layer,
            batch_size=max(1, args.batch_size),
            manifest_path=args.manifest or args.out + ".manifest.json",
        )
    except EncoderError as exc:
        print(f"embed-export: encoder error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"embed-export: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"embed-export: i/o error: {exc}", file=sys.stderr)
        return 2
    n_rows = sum(n for _, _, n in manifest["sentences"])
    print(
        f"wrote {len(manifest['sentences'])} sentences, {n_rows} rows, dim {manifest['dim']}",
        file=sys.stderr,
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
