"""Deterministic synthetic gait generator for end-to-end tests.

Subjects are sinusoidal walkers: landmark l, coordinate c at frame t is

    base[l, c] + amplitude[l, c] * sin(2*pi*frequency*t + phase[l]) + noise

with all subject parameters drawn from a seeded RNG. Inter-subject parameter
distance scales linearly with ``separation``, so identification difficulty
is tunable. Periods are integer frame counts, making noise-free signals
exactly periodic, and the tracking landmark always receives a strong
oscillation so cycle segmentation has something to find.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CONDITION_NORMAL, N_COORDS, N_LANDMARKS, LandmarkFrame, RawTrajectory
from .procrustes import SimilarityTransform
from .segmentation import LEFT_FOOT_INDEX


def _canonical_pose() -> np.ndarray:
    """A fixed, non-degenerate 33-point configuration (roughly humanoid)."""
    l = np.arange(N_LANDMARKS, dtype=np.float64)
    x = 0.18 * np.cos(2.0 * np.pi * l / N_LANDMARKS) + 0.5
    y = 0.8 - 0.6 * l / (N_LANDMARKS - 1)
    z = 0.08 * np.sin(4.0 * np.pi * l / N_LANDMARKS)
    return np.stack([x, y, z], axis=1)


CANONICAL_POSE = _canonical_pose()
CANONICAL_POSE.flags.writeable = False


@dataclass(frozen=True)
class SyntheticSubjectParams:
    subject_id: str
    base: np.ndarray  # (33, 3) resting skeleton
    amplitude: np.ndarray  # (33, 3) oscillation amplitudes
    phase: np.ndarray  # (33,) per-landmark phase offsets
    frequency: float  # cycles per frame, in (0, 0.5)
    noise_sigma: float
    seed: int

    def __post_init__(self):
        base = np.array(self.base, dtype=np.float64)
        amp = np.array(self.amplitude, dtype=np.float64)
        phase = np.array(self.phase, dtype=np.float64)
        if base.shape != (N_LANDMARKS, N_COORDS) or amp.shape != (N_LANDMARKS, N_COORDS):
            raise ValueError("base and amplitude must be 33 x 3")
        if phase.shape != (N_LANDMARKS,):
            raise ValueError("phase must have 33 entries")
        if not (np.all(np.isfinite(base)) and np.all(np.isfinite(amp)) and np.all(np.isfinite(phase))):
            raise ValueError("subject parameters must be finite")
        if not 0.0 < self.frequency < 0.5:
            raise ValueError("frequency must lie in (0, 0.5) cycles/frame")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        for arr in (base, amp, phase):
            arr.flags.writeable = False
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "phase", phase)


def generate_subject(
    seed: int,
    separation: float,
    noise_sigma: float = 0.0,
    subject_id: str | None = None,
) -> SyntheticSubjectParams:
    """Draw one subject's walking parameters; deterministic per seed.

    ``separation`` linearly scales the subject-specific part of the base
    pose and amplitudes, so expected inter-subject parameter distance grows
    with it.
    """
    if separation <= 0:
        raise ValueError("separation must be positive")
    rng = np.random.default_rng(seed)
    base = CANONICAL_POSE + separation * 0.03 * rng.normal(size=(N_LANDMARKS, N_COORDS))
    amplitude = separation * (0.02 + 0.08 * rng.uniform(size=(N_LANDMARKS, N_COORDS)))
    # the tracking landmark swings hard in x and stays in the sagittal plane
    # (no depth oscillation), so its cycle survives vertical-axis rotation
    amplitude[LEFT_FOOT_INDEX, 0] += 0.15
    amplitude[LEFT_FOOT_INDEX, 2] = 0.0
    period = int(rng.integers(12, 25))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=N_LANDMARKS)
    return SyntheticSubjectParams(
        subject_id=subject_id if subject_id is not None else f"subject-{seed}",
        base=base,
        amplitude=amplitude,
        phase=phase,
        frequency=1.0 / period,
        noise_sigma=noise_sigma,
        seed=seed,
    )


def _rotation_about_y(deg: float) -> np.ndarray:
    theta = np.deg2rad(deg)
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def generate_trajectory(
    subject: SyntheticSubjectParams,
    n_frames: int,
    view_deg: float = 0.0,
    global_transform: SimilarityTransform | None = None,
    seed: int = 0,
    condition: str = CONDITION_NORMAL,
) -> RawTrajectory:
    """Render T frames for a subject, optionally viewed from an angle and
    pushed through a global similarity transform (exercises alignment)."""
    if n_frames < 2:
        raise ValueError("n_frames must be >= 2")
    rng = np.random.default_rng(seed)
    t = np.arange(n_frames, dtype=np.float64)
    angle = 2.0 * np.pi * subject.frequency * t[:, None] + subject.phase[None, :]
    coords = subject.base[None, :, :] + subject.amplitude[None, :, :] * np.sin(angle)[:, :, None]
    if subject.noise_sigma > 0:
        coords = coords + subject.noise_sigma * rng.normal(size=coords.shape)
    if view_deg != 0.0:
        rot = _rotation_about_y(view_deg)
        coords = coords @ rot
    if global_transform is not None:
        coords = global_transform.scale * coords @ global_transform.rotation + global_transform.translation
    frames = tuple(LandmarkFrame(c) for c in coords)
    return RawTrajectory(subject.subject_id, view_deg, condition, frames)
