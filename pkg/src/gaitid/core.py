"""Core domain types: landmark frames, trajectories, gait sequences, feature tensors.

Everything here is an immutable value object (frozen dataclasses over read-only
float64 arrays); behavior is limited to validation and the sequence-to-tensor
flattening that defines the feature layout for the rest of the toolkit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_LANDMARKS = 33
N_COORDS = 3
DEFAULT_N_FRAMES = 6

# canonical walking-condition tags; anything else is carried through verbatim
CONDITION_NORMAL = "NM"
CONDITION_BAG = "BG"
CONDITION_COAT = "CL"


def _readonly_array(values, shape: tuple[int, ...], what: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.shape != shape:
        raise ValueError(f"{what}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what}: non-finite entries")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class LandmarkFrame:
    """One pose-estimator frame: 33 landmarks, each an (x, y, z) coordinate.

    x and y are in image-normalized units, z is the estimator's relative
    depth. All entries must be finite.
    """

    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "coords", _readonly_array(self.coords, (N_LANDMARKS, N_COORDS), "coords")
        )


def _check_meta(subject_id: str, view_deg: float, condition: str) -> float:
    if not isinstance(subject_id, str) or not subject_id:
        raise ValueError("subject_id must be a non-empty string")
    if not isinstance(condition, str) or not condition:
        raise ValueError("condition must be a non-empty string")
    view = float(view_deg)
    if not np.isfinite(view):
        raise ValueError("view_deg must be finite")
    return view


@dataclass(frozen=True)
class RawTrajectory:
    """A variable-length capture of landmark frames for one walking sequence."""

    subject_id: str
    view_deg: float
    condition: str
    frames: tuple[LandmarkFrame, ...]
    fps: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "view_deg", _check_meta(self.subject_id, self.view_deg, self.condition))
        frames = tuple(self.frames)
        if not frames:
            raise ValueError("frames must be non-empty")
        for f in frames:
            if not isinstance(f, LandmarkFrame):
                raise TypeError("frames must contain LandmarkFrame instances")
        object.__setattr__(self, "frames", frames)
        if self.fps is not None:
            fps = float(self.fps)
            if not np.isfinite(fps) or fps <= 0:
                raise ValueError("fps must be positive and finite")
            object.__setattr__(self, "fps", fps)

    def __len__(self) -> int:
        return len(self.frames)

    def stacked(self) -> np.ndarray:
        """All frames as a (T, 33, 3) array."""
        return np.stack([f.coords for f in self.frames])


@dataclass(frozen=True)
class GaitSequence:
    """Exactly N frames spanning one gait cycle, plus where they came from.

    ``source_indices`` are strictly increasing indices into the originating
    RawTrajectory.
    """

    subject_id: str
    view_deg: float
    condition: str
    frames: tuple[LandmarkFrame, ...]
    source_indices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "view_deg", _check_meta(self.subject_id, self.view_deg, self.condition))
        frames = tuple(self.frames)
        idx = tuple(int(i) for i in self.source_indices)
        if not frames:
            raise ValueError("frames must be non-empty")
        for f in frames:
            if not isinstance(f, LandmarkFrame):
                raise TypeError("frames must contain LandmarkFrame instances")
        if len(idx) != len(frames):
            raise ValueError("source_indices must match frames in length")
        if any(i < 0 for i in idx):
            raise ValueError("source_indices must be non-negative")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("source_indices must be strictly increasing")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "source_indices", idx)

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    def stacked(self) -> np.ndarray:
        return np.stack([f.coords for f in self.frames])


@dataclass(frozen=True)
class LandmarkSubset:
    """A strictly increasing selection of landmark indices in [0, 32]."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise ValueError("subset must be non-empty")
        if any(i < 0 or i >= N_LANDMARKS for i in idx):
            raise ValueError(f"subset indices must lie in [0, {N_LANDMARKS - 1}]")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("subset indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def feature_dim(self) -> int:
        """Per-frame feature count: 3 coordinates per selected landmark."""
        return N_COORDS * len(self.indices)

    @classmethod
    def full(cls) -> "LandmarkSubset":
        return cls(tuple(range(N_LANDMARKS)))

    @classmethod
    def parse(cls, text: str) -> "LandmarkSubset":
        """Parse ``"0-32"`` range syntax (inclusive) or comma lists like ``"11,23,31"``."""
        text = text.strip()
        if not text:
            raise ValueError("empty landmark spec")
        indices: list[int] = []
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                lo_s, hi_s = part.split("-", 1)
                lo, hi = int(lo_s), int(hi_s)
                if hi < lo:
                    raise ValueError(f"descending range {part!r}")
                indices.extend(range(lo, hi + 1))
            elif part:
                indices.append(int(part))
        return cls(tuple(sorted(set(indices))))

    def spec(self) -> str:
        """Compact textual form (inverse of parse for contiguous runs)."""
        runs: list[str] = []
        start = prev = self.indices[0]
        for i in self.indices[1:]:
            if i == prev + 1:
                prev = i
                continue
            runs.append(f"{start}-{prev}" if prev > start else f"{start}")
            start = prev = i
        runs.append(f"{start}-{prev}" if prev > start else f"{start}")
        return ",".join(runs)


@dataclass(frozen=True)
class SequenceTensor:
    """An N x F feature matrix for one gait sequence; row t holds frame t.

    F = 3 * |subset|; columns are (x, y, z) per selected landmark in ascending
    landmark order. Provenance metadata travels with the values.
    """

    values: np.ndarray
    subject_id: str
    view_deg: float
    condition: str

    def __post_init__(self):
        object.__setattr__(self, "view_deg", _check_meta(self.subject_id, self.view_deg, self.condition))
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"values must be a non-empty 2-D matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("values: non-finite entries")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray) -> "SequenceTensor":
        """Same provenance, new values (used by standardization)."""
        return SequenceTensor(values, self.subject_id, self.view_deg, self.condition)


def flatten_sequence(seq: GaitSequence, subset: LandmarkSubset) -> SequenceTensor:
    """Lay out a sequence as an N x F tensor.

    Row t contains the subset landmarks of frame t in ascending index order,
    coordinates ordered (x, y, z) within each landmark. For the full
    33-landmark subset and N=6 this gives 6 x 99 = 594 values.
    """
    idx = list(subset.indices)
    rows = [frame.coords[idx, :].reshape(-1) for frame in seq.frames]
    return SequenceTensor(np.stack(rows), seq.subject_id, seq.view_deg, seq.condition)
