"""Command-line entry point: ``spoofextract extract``.

Mirrors the primary CLI's artifact plumbing: resolved config and a
hash manifest of written artifacts land next to the output store.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from .extract import extract
from .registry import resolve

log = logging.getLogger("spoofextract")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spoofextract")
    parser.add_argument("--log-level", default="INFO")
    sub = parser.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("extract", help="dump embeddings for a manifest")
    pe.add_argument("--manifest", required=True)
    pe.add_argument("--model", required=True, help="registry model id")
    pe.add_argument("--out", required=True, help="output .spb path")
    pe.add_argument("--no-pool", action="store_true", help="keep framewise TxD records")
    pe.add_argument("--audio-root", default=".")
    pe.add_argument("--device", default="cpu")
    pe.add_argument("--allow-restricted", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(message)s")
    try:
        spec = resolve(args.model, allow_restricted=args.allow_restricted)
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        skipped = extract(
            args.manifest, spec, out,
            audio_root=args.audio_root,
            pool=not args.no_pool,
            device=args.device,
        )
        config = {k: str(v) for k, v in vars(args).items()}
        config["revision"] = spec.revision
        with open(out.with_suffix(out.suffix + ".run.json"), "w", encoding="utf-8") as fh:
            json.dump({"config": config, "artifacts": {str(out): _sha256(out)},
                       "skipped": skipped}, fh, indent=2, sort_keys=True)
    except Exception as exc:
        log.error("extract failed: %s", exc)
        return 1
    if skipped:
        log.error("skipped %d unreadable trials", len(skipped))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
