"""Landmark-file I/O, dataset manifests, and segmented-sequence files.

The canonical landmark file is UTF-8 JSON Lines, one object per line:

    {"subject_id": str, "view_deg": number, "condition": str,
     "fps": number?, "frames": [[[x, y, z] x33] xT]}

Numbers are serialized with full round-trip precision, so write -> read is
bit-exact. This format is the contract between the pose extractor tool and
this toolkit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import N_COORDS, N_LANDMARKS, GaitSequence, LandmarkFrame, RawTrajectory

MANIFEST_SPLITS = ("train", "test", "gallery", "probe")


class SchemaError(ValueError):
    """A landmark/sequence/manifest file violated the expected schema."""

    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


def _require(record: dict, field: str, line: int):
    if field not in record:
        raise SchemaError("missing", line=line, field=field)
    return record[field]


def _number(value, field: str, line: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"expected a number, got {type(value).__name__}", line=line, field=field)
    out = float(value)
    if not np.isfinite(out):  # json.loads accepts NaN/Infinity tokens
        raise SchemaError("expected a finite number", line=line, field=field)
    return out


def _string(value, field: str, line: int) -> str:
    if not isinstance(value, str) or not value:
        raise SchemaError("expected a non-empty string", line=line, field=field)
    return value


def _frames_array(value, line: int, n_frames: int | None = None) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise SchemaError("expected a non-empty list of frames", line=line, field="frames")
    if n_frames is not None and len(value) != n_frames:
        raise SchemaError(f"expected {n_frames} frames, got {len(value)}", line=line, field="frames")
    for t, frame in enumerate(value):
        if not isinstance(frame, list) or len(frame) != N_LANDMARKS:
            got = len(frame) if isinstance(frame, list) else type(frame).__name__
            raise SchemaError(
                f"frame {t}: expected {N_LANDMARKS} landmarks, got {got}", line=line, field="frames"
            )
        for l, lm in enumerate(frame):
            if not isinstance(lm, list) or len(lm) != N_COORDS:
                raise SchemaError(
                    f"frame {t}, landmark {l}: expected {N_COORDS} coordinates",
                    line=line,
                    field="frames",
                )
    try:
        arr = np.array(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"non-numeric coordinate: {exc}", line=line, field="frames") from None
    if not np.all(np.isfinite(arr)):
        raise SchemaError("non-finite coordinate", line=line, field="frames")
    return arr


def _parse_trajectory(record: dict, line: int) -> RawTrajectory:
    if not isinstance(record, dict):
        raise SchemaError("expected a JSON object", line=line)
    subject_id = _string(_require(record, "subject_id", line), "subject_id", line)
    view_deg = _number(_require(record, "view_deg", line), "view_deg", line)
    condition = _string(_require(record, "condition", line), "condition", line)
    fps = None
    if record.get("fps") is not None:
        fps = _number(record["fps"], "fps", line)
        if fps <= 0:
            raise SchemaError("fps must be positive", line=line, field="fps")
    arr = _frames_array(_require(record, "frames", line), line)
    frames = tuple(LandmarkFrame(a) for a in arr)
    return RawTrajectory(subject_id, view_deg, condition, frames, fps=fps)


def read_landmark_file(path) -> list[RawTrajectory]:
    """Read a canonical landmark JSONL file, one RawTrajectory per line.

    Raises SchemaError (with line number and offending field) on malformed
    records; I/O errors propagate as OSError.
    """
    out: list[RawTrajectory] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", line=lineno) from None
            out.append(_parse_trajectory(record, lineno))
    return out


def _trajectory_record(traj: RawTrajectory) -> dict:
    record = {
        "subject_id": traj.subject_id,
        "view_deg": traj.view_deg,
        "condition": traj.condition,
        "frames": traj.stacked().tolist(),
    }
    if traj.fps is not None:
        record["fps"] = traj.fps
    return record


def write_landmark_file(trajectories, path) -> None:
    """Write trajectories as canonical JSONL; values re-read bit-identically."""
    trajectories = list(trajectories)
    for traj in trajectories:
        if not isinstance(traj, RawTrajectory):
            raise TypeError("write_landmark_file expects RawTrajectory instances")
    with open(path, "w", encoding="utf-8") as fh:
        for traj in trajectories:
            fh.write(json.dumps(_trajectory_record(traj), separators=(",", ":")))
            fh.write("\n")


def read_sequence_file(path) -> list[GaitSequence]:
    """Read a segmented-sequence JSONL file (output of the segment command)."""
    out: list[GaitSequence] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", line=lineno) from None
            if not isinstance(record, dict):
                raise SchemaError("expected a JSON object", line=lineno)
            subject_id = _string(_require(record, "subject_id", lineno), "subject_id", lineno)
            view_deg = _number(_require(record, "view_deg", lineno), "view_deg", lineno)
            condition = _string(_require(record, "condition", lineno), "condition", lineno)
            src = _require(record, "source_indices", lineno)
            if not isinstance(src, list) or not all(isinstance(i, int) for i in src):
                raise SchemaError("expected a list of integers", line=lineno, field="source_indices")
            arr = _frames_array(_require(record, "frames", lineno), lineno, n_frames=len(src))
            frames = tuple(LandmarkFrame(a) for a in arr)
            try:
                out.append(GaitSequence(subject_id, view_deg, condition, frames, tuple(src)))
            except ValueError as exc:
                raise SchemaError(str(exc), line=lineno) from None
    return out


def write_sequence_file(sequences, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seq in sequences:
            record = {
                "subject_id": seq.subject_id,
                "view_deg": seq.view_deg,
                "condition": seq.condition,
                "source_indices": list(seq.source_indices),
                "frames": seq.stacked().tolist(),
            }
            fh.write(json.dumps(record, separators=(",", ":")))
            fh.write("\n")


@dataclass(frozen=True)
class ManifestEntry:
    """One dataset record: ``record`` is ``"<jsonl filename>#<line index>"``."""

    record: str
    subject_id: str
    view_deg: float
    condition: str


@dataclass(frozen=True)
class DatasetManifest:
    split: str
    entries: tuple[ManifestEntry, ...]

    def __post_init__(self):
        if self.split not in MANIFEST_SPLITS:
            raise ValueError(f"split must be one of {MANIFEST_SPLITS}, got {self.split!r}")
        entries = tuple(self.entries)
        seen = set()
        for e in entries:
            if not e.subject_id:
                raise ValueError("manifest entries need non-empty subject ids")
            if e.record in seen:
                raise ValueError(f"duplicate record id {e.record!r} in split {self.split!r}")
            seen.add(e.record)
        object.__setattr__(self, "entries", entries)

    def subjects(self) -> list[str]:
        """Distinct subject ids in first-appearance order."""
        seen: dict[str, None] = {}
        for e in self.entries:
            seen.setdefault(e.subject_id, None)
        return list(seen)


def build_manifest(trajectories, jsonl_name: str, split: str) -> DatasetManifest:
    """Manifest for trajectories already written (in order) to ``jsonl_name``."""
    entries = tuple(
        ManifestEntry(f"{jsonl_name}#{i}", t.subject_id, t.view_deg, t.condition)
        for i, t in enumerate(trajectories)
    )
    return DatasetManifest(split, entries)


def save_manifest(manifest: DatasetManifest, path) -> None:
    doc = {
        "split": manifest.split,
        "entries": [
            {
                "record": e.record,
                "subject_id": e.subject_id,
                "view_deg": e.view_deg,
                "condition": e.condition,
            }
            for e in manifest.entries
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path) -> DatasetManifest:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise SchemaError("expected a JSON object")
    split = _string(_require(doc, "split", 0), "split", 0)
    raw_entries = _require(doc, "entries", 0)
    if not isinstance(raw_entries, list):
        raise SchemaError("expected a list", field="entries")
    entries = []
    for i, e in enumerate(raw_entries):
        if not isinstance(e, dict):
            raise SchemaError(f"entry {i}: expected an object", field="entries")
        entries.append(
            ManifestEntry(
                _string(_require(e, "record", 0), "record", 0),
                _string(_require(e, "subject_id", 0), "subject_id", 0),
                _number(_require(e, "view_deg", 0), "view_deg", 0),
                _string(_require(e, "condition", 0), "condition", 0),
            )
        )
    try:
        return DatasetManifest(split, tuple(entries))
    except ValueError as exc:
        raise SchemaError(str(exc)) from None


def load_manifest_trajectories(manifest: DatasetManifest, base_dir) -> list[RawTrajectory]:
    """Resolve manifest entries to trajectories; referenced files read once."""
    base = Path(base_dir)
    cache: dict[str, list[RawTrajectory]] = {}
    out: list[RawTrajectory] = []
    for e in manifest.entries:
        name, sep, idx_s = e.record.partition("#")
        if not sep:
            raise SchemaError(f"record id {e.record!r} lacks '#<line index>'", field="record")
        if name not in cache:
            cache[name] = read_landmark_file(base / name)
        records = cache[name]
        idx = int(idx_s)
        if idx < 0 or idx >= len(records):
            raise SchemaError(f"record index {idx} out of range for {name!r}", field="record")
        traj = records[idx]
        if traj.subject_id != e.subject_id:
            raise SchemaError(
                f"manifest subject {e.subject_id!r} != file subject {traj.subject_id!r}",
                field="subject_id",
            )
        out.append(traj)
    return out
