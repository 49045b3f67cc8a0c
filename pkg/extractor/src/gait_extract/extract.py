"""Clip decoding and landmark extraction into the canonical gait JSONL.

Output format (the contract with the downstream gait toolkit), one record
per input clip:

    {"subject_id": str, "view_deg": number, "condition": str,
     "fps": number?, "frames": [[[x, y, z] x33] xT]}

Frames where the estimator finds nobody, or where confidence falls below
the job threshold, are dropped (never interpolated) and counted in the
result. A clip with zero surviving frames is an error.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backends import PoseBackend

log = logging.getLogger("gait_extract")

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


class ExtractionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExtractionJob:
    inputs: tuple[str, ...]
    subject_id: str
    view_deg: float
    condition: str
    out_path: str
    min_confidence: float = 0.5

    def __post_init__(self):
        if not self.inputs:
            raise ValueError("need at least one input clip")
        if not self.subject_id:
            raise ValueError("subject_id must be non-empty")
        if not self.condition:
            raise ValueError("condition must be non-empty")
        if not 0.0 <= self.min_confidence <= 1.0:
            raise ValueError("min_confidence must lie in [0, 1]")


@dataclass
class ClipResult:
    source: str
    kept_frames: int
    dropped_frames: int
    fps: float | None


@dataclass
class ExtractionResult:
    out_path: str
    clips: list[ClipResult] = field(default_factory=list)


def iter_clip_frames(path):
    """Yield BGR frames from a video file or a folder of images.

    Returns (frames iterator, fps or None). Image folders are read in
    sorted name order and carry no frame rate.
    """
    import cv2

    p = Path(path)
    if p.is_dir():
        files = sorted(f for f in p.iterdir() if f.suffix.lower() in IMAGE_SUFFIXES)
        if not files:
            raise ExtractionError(f"{path}: no image frames found")

        def frames():
            for f in files:
                img = cv2.imread(str(f))
                if img is None:
                    raise ExtractionError(f"{f}: unreadable image")
                yield img

        return frames(), None

    if not p.exists():
        raise ExtractionError(f"{path}: no such file or directory")
    capture = cv2.VideoCapture(str(p))
    if not capture.isOpened():
        raise ExtractionError(f"{path}: cannot decode video")
    fps = capture.get(cv2.CAP_PROP_FPS) or None
    if fps is not None and fps <= 0:
        fps = None

    def frames():
        try:
            while True:
                ok, img = capture.read()
                if not ok:
                    break
                yield img
        finally:
            capture.release()

    return frames(), fps


def extract_clip(path, backend: PoseBackend, min_confidence: float):
    """Run the backend over one clip; returns (T x 33 x 3 array, ClipResult)."""
    frames, fps = iter_clip_frames(path)
    kept = []
    dropped = 0
    for frame in frames:
        detection = backend.detect(frame)
        if detection is None:
            dropped += 1
            continue
        coords, confidence = detection
        if confidence < min_confidence:
            dropped += 1
            continue
        kept.append(np.asarray(coords, dtype=np.float64))
    if dropped:
        log.info("%s: dropped %d low-confidence/undetected frame(s)", path, dropped)
    if not kept:
        raise ExtractionError(f"{path}: no frame passed pose detection")
    return np.stack(kept), ClipResult(str(path), len(kept), dropped, fps)


def extract(job: ExtractionJob, backend: PoseBackend) -> ExtractionResult:
    """Process every input clip and write one JSONL record per clip."""
    result = ExtractionResult(out_path=job.out_path)
    records = []
    for source in job.inputs:
        coords, clip = extract_clip(source, backend, job.min_confidence)
        record = {
            "subject_id": job.subject_id,
            "view_deg": float(job.view_deg),
            "condition": job.condition,
            "frames": coords.tolist(),
        }
        if clip.fps is not None:
            record["fps"] = float(clip.fps)
        records.append(record)
        result.clips.append(clip)
    with open(job.out_path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, separators=(",", ":")))
            fh.write("\n")
    return result
