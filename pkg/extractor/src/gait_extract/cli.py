"""The ``gait-extract`` command: clips in, canonical landmark JSONL out."""

from __future__ import annotations

import argparse
import json
import sys

from .backends import MODEL_VARIANTS, MediapipeBackend
from .extract import ExtractionError, ExtractionJob, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gait-extract",
        description="Extract 33-landmark gait trajectories from videos or image folders.",
    )
    parser.add_argument("--input", action="append", required=True,
                        help="video file or image folder; repeat for multiple clips")
    parser.add_argument("--subject", required=True, help="subject id for all clips")
    parser.add_argument("--view", type=float, required=True, help="camera view angle in degrees")
    parser.add_argument("--condition", default="NM", help="walking condition tag (default: NM)")
    parser.add_argument("--out", required=True, help="output landmark JSONL file")
    parser.add_argument("--min-confidence", type=float, default=0.5,
                        help="drop frames below this detection confidence (default: 0.5)")
    parser.add_argument("--model-variant", choices=sorted(MODEL_VARIANTS), default="full",
                        help="pose model size (default: full)")
    parser.add_argument("--tracking", action="store_true",
                        help="use stateful tracking between frames instead of per-frame detection "
                             "(faster, less repeatable)")
    parser.add_argument("--verbose", action="store_true", help="log dropped-frame counts")
    return parser


def make_backend(args):
    return MediapipeBackend(
        model_variant=args.model_variant,
        static=not args.tracking,
        min_detection_confidence=args.min_confidence,
    )


def main(argv=None) -> int:
    import logging

    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO)
    try:
        job = ExtractionJob(
            inputs=tuple(args.input),
            subject_id=args.subject,
            view_deg=args.view,
            condition=args.condition,
            out_path=args.out,
            min_confidence=args.min_confidence,
        )
        backend = make_backend(args)
        try:
            result = extract(job, backend)
        finally:
            backend.close()
    except (ExtractionError, ValueError, RuntimeError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    print(json.dumps({
        "out": result.out_path,
        "clips": [
            {"source": c.source, "kept": c.kept_frames, "dropped": c.dropped_frames, "fps": c.fps}
            for c in result.clips
        ],
    }, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
