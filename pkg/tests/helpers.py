"""Shared fixtures-without-pytest: random transforms and small datasets."""

from __future__ import annotations

import numpy as np

from gaitid.core import LandmarkFrame, RawTrajectory
from gaitid.procrustes import SimilarityTransform
from gaitid.synthgen import generate_subject, generate_trajectory

DEFAULT_VIEWS = (0.0, 15.0, 30.0, 45.0)


def random_rotation(rng: np.random.Generator, d: int) -> np.ndarray:
    """Uniform-ish proper rotation via QR with sign fixes."""
    A = rng.normal(size=(d, d))
    Q, R = np.linalg.qr(A)
    Q = Q @ np.diag(np.sign(np.diag(R)))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def random_similarity(rng: np.random.Generator, d: int = 3, translation_scale: float = 3.0) -> SimilarityTransform:
    return SimilarityTransform(
        rng.uniform(0.5, 2.0),
        random_rotation(rng, d),
        rng.normal(0.0, translation_scale, size=d),
    )


def rotation_about_y(deg: float) -> np.ndarray:
    theta = np.deg2rad(deg)
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def vertical_axis_similarity(rng: np.random.Generator, max_deg: float = 40.0) -> SimilarityTransform:
    """Similarity whose rotation is about the vertical axis; on noise-free
    synthetic walkers this family leaves cycle segmentation untouched while
    still exercising a genuine 3-D rotation in the alignment stage."""
    return SimilarityTransform(
        rng.uniform(0.5, 2.0),
        rotation_about_y(rng.uniform(5.0, max_deg)),
        rng.normal(0.0, 5.0, size=3),
    )


def transform_trajectory(traj: RawTrajectory, t: SimilarityTransform) -> RawTrajectory:
    frames = tuple(
        LandmarkFrame(t.scale * f.coords @ t.rotation + t.translation) for f in traj.frames
    )
    return RawTrajectory(traj.subject_id, traj.view_deg, traj.condition, frames, fps=traj.fps)


def synthetic_dataset(
    n_subjects: int,
    n_trajectories: int,
    n_frames: int = 80,
    separation: float = 1.5,
    noise: float = 0.005,
    seed: int = 11,
    views=DEFAULT_VIEWS,
) -> list[RawTrajectory]:
    """Deterministic multi-subject walking dataset."""
    rng = np.random.default_rng(seed)
    out = []
    for s in range(n_subjects):
        subject = generate_subject(
            int(rng.integers(2**62)), separation, noise_sigma=noise, subject_id=f"S{s:02d}"
        )
        for j in range(n_trajectories):
            out.append(
                generate_trajectory(
                    subject, n_frames, view_deg=views[j % len(views)], seed=int(rng.integers(2**62))
                )
            )
    return out
