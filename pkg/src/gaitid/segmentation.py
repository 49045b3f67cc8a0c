"""Gait-cycle segmentation: pick N frames covering one walking cycle.

The cycle is located on a single tracking landmark's coordinate (left foot
index, x by default). The signal is smoothed with a centered moving average,
then the first ascent whose rise covers at least ``amplitude_fraction`` of
the signal's global range is taken as the cycle: the foot coordinate runs
from its most negative to its most positive value. N frames are spread
evenly across that ascent and taken from the original, unsmoothed
trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import N_LANDMARKS, GaitSequence, RawTrajectory

LEFT_FOOT_INDEX = 31

# relative tolerance below which the smoothed signal counts as constant
_FLAT_RTOL = 1e-12


class SegmentationError(ValueError):
    pass


class TrajectoryTooShort(SegmentationError):
    """Fewer frames than the requested sequence length."""


class NoCycleFound(SegmentationError):
    """Tracking signal has no usable ascent (flat, or every ascent too weak/short)."""


@dataclass(frozen=True)
class SegmentationConfig:
    tracking_landmark: int = LEFT_FOOT_INDEX
    axis: int = 0  # 0=x, 1=y, 2=z
    smoothing_window: int = 5
    amplitude_fraction: float = 0.5
    n_frames: int = 6

    def __post_init__(self):
        if not 0 <= self.tracking_landmark < N_LANDMARKS:
            raise ValueError(f"tracking_landmark must lie in [0, {N_LANDMARKS - 1}]")
        if self.axis not in (0, 1, 2):
            raise ValueError("axis must be 0, 1 or 2")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ValueError("smoothing_window must be an odd integer >= 1")
        if not 0.0 < self.amplitude_fraction <= 1.0:
            raise ValueError("amplitude_fraction must lie in (0, 1]")
        if self.n_frames < 2:
            raise ValueError("n_frames must be >= 2")


def moving_average(signal: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average; windows truncate at the edges."""
    signal = np.asarray(signal, dtype=np.float64)
    if window == 1:
        return signal.copy()
    kernel = np.ones(window)
    sums = np.convolve(signal, kernel, mode="same")
    counts = np.convolve(np.ones_like(signal), kernel, mode="same")
    return sums / counts


def _ascending_runs(s: np.ndarray) -> list[tuple[int, int]]:
    """Maximal index runs [a, b] with non-decreasing s and s[b] > s[a]."""
    runs = []
    a = 0
    for t in range(1, len(s)):
        if s[t] < s[t - 1]:
            if s[t - 1] > s[a]:
                runs.append((a, t - 1))
            a = t
    if s[-1] > s[a]:
        runs.append((a, len(s) - 1))
    return runs


def round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def find_cycle(signal: np.ndarray, cfg: SegmentationConfig) -> tuple[int, int]:
    """Locate (i_min, i_max) bounding the first qualifying ascent.

    Qualifying means the smoothed rise is at least ``amplitude_fraction`` of
    the smoothed signal's global range. Ties in extremum location break
    toward the earliest index.
    """
    s = moving_average(signal, cfg.smoothing_window)
    lo, hi = float(s.min()), float(s.max())
    span = hi - lo
    scale = max(1.0, abs(lo), abs(hi))
    if span <= _FLAT_RTOL * scale:
        raise NoCycleFound("tracking signal is constant (zero range)")
    threshold = cfg.amplitude_fraction * span
    for a, b in _ascending_runs(s):
        if s[b] - s[a] >= threshold:
            # earliest index attaining the run's max (min is s[a] at a itself)
            top = a + int(np.argmax(s[a : b + 1] == s[b]))
            return a, top
    raise NoCycleFound(
        f"no ascent reaches {cfg.amplitude_fraction:g} of the signal range"
    )


def spread_indices(i_min: int, i_max: int, n: int) -> list[int]:
    """n distinct, strictly increasing indices spread evenly over [i_min, i_max].

    Rounds half away from zero; duplicates after rounding shift later indices
    forward by one. Fails when the span cannot host n distinct indices.
    """
    span = i_max - i_min
    idx = [round_half_away(i_min + j * span / (n - 1)) for j in range(n)]
    for j in range(1, n):
        if idx[j] <= idx[j - 1]:
            idx[j] = idx[j - 1] + 1
        if idx[j] > i_max:
            raise NoCycleFound(
                f"ascent [{i_min}, {i_max}] too short for {n} distinct frames"
            )
    return idx


def segment_cycle(traj: RawTrajectory, cfg: SegmentationConfig | None = None) -> GaitSequence:
    """Extract one gait cycle as a GaitSequence of cfg.n_frames frames.

    Deterministic; frames are taken from the original (unsmoothed)
    trajectory at indices spread evenly across the detected ascent.
    """
    cfg = cfg or SegmentationConfig()
    if len(traj) < cfg.n_frames:
        raise TrajectoryTooShort(
            f"trajectory has {len(traj)} frames, need at least {cfg.n_frames}"
        )
    signal = traj.stacked()[:, cfg.tracking_landmark, cfg.axis]
    i_min, i_max = find_cycle(signal, cfg)
    indices = spread_indices(i_min, i_max, cfg.n_frames)
    frames = tuple(traj.frames[i] for i in indices)
    return GaitSequence(traj.subject_id, traj.view_deg, traj.condition, frames, tuple(indices))
