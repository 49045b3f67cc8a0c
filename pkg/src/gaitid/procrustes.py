"""Ordinary and generalized Procrustes alignment of landmark configurations.

A configuration is a k x d point matrix (d = 2 or 3). Alignment applies a
similarity transform, row convention:

    aligned = scale * X @ rotation + translation

Rotations are always proper (det +1); reflections are never allowed.
Scaling is a flag (on by default). Generalized alignment iterates ordinary
fits against an emergent mean shape that is kept centered and at unit
Frobenius norm, producing the normalized mean gait shape used by the rest
of the pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GaitSequence, LandmarkFrame, LandmarkSubset

_ORTHO_TOL = 1e-10


def _points(config) -> np.ndarray:
    pts = config.points if isinstance(config, ShapeConfig) else np.asarray(config, dtype=np.float64)
    return pts


@dataclass(frozen=True)
class ShapeConfig:
    """A k x d landmark configuration (k >= d, finite, not all points equal)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise ValueError(f"points must be k x d with d in {{2, 3}}, got shape {pts.shape}")
        k, d = pts.shape
        if k < d:
            raise ValueError(f"need at least d={d} points, got k={k}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points: non-finite entries")
        if np.allclose(pts, pts[0], rtol=0.0, atol=0.0):
            raise ValueError("degenerate configuration: all points identical")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def k(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class SimilarityTransform:
    """Positive scale, proper rotation, translation; applied as c*X@O + t."""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        c = float(self.scale)
        if not np.isfinite(c) or c <= 0:
            raise ValueError("scale must be positive and finite")
        O = np.array(self.rotation, dtype=np.float64)
        if O.ndim != 2 or O.shape[0] != O.shape[1]:
            raise ValueError("rotation must be square")
        d = O.shape[0]
        if np.linalg.norm(O.T @ O - np.eye(d)) > _ORTHO_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(O) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation must be proper (det +1); reflections are not allowed")
        t = np.array(self.translation, dtype=np.float64)
        if t.shape != (d,):
            raise ValueError(f"translation must have shape ({d},)")
        if not np.all(np.isfinite(t)):
            raise ValueError("translation: non-finite entries")
        O.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "scale", c)
        object.__setattr__(self, "rotation", O)
        object.__setattr__(self, "translation", t)

    @property
    def d(self) -> int:
        return self.rotation.shape[0]

    @classmethod
    def identity(cls, d: int) -> "SimilarityTransform":
        return cls(1.0, np.eye(d), np.zeros(d))


@dataclass(frozen=True)
class MeanShape:
    """Centered, unit-Frobenius-norm mean configuration."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise ValueError(f"mean shape must be k x d with d in {{2, 3}}, got {pts.shape}")
        centroid = pts.mean(axis=0)
        if np.max(np.abs(centroid)) >= _ORTHO_TOL:
            raise ValueError("mean shape must be centered")
        if abs(np.linalg.norm(pts) - 1.0) >= _ORTHO_TOL:
            raise ValueError("mean shape must have unit Frobenius norm")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def k(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def normalize_shape(points: np.ndarray) -> np.ndarray:
    """Center and scale to unit Frobenius norm."""
    pts = np.asarray(points, dtype=np.float64)
    centered = pts - pts.mean(axis=0)
    norm = np.linalg.norm(centered)
    if norm == 0:
        raise ValueError("degenerate configuration: zero norm after centering")
    return centered / norm


def apply_transform(config, transform: SimilarityTransform):
    """Apply c*X@O + t rowwise. Returns the same container type as the input."""
    pts = _points(config)
    if pts.shape[1] != transform.d:
        raise ValueError(f"dimension mismatch: points are {pts.shape[1]}-D, transform is {transform.d}-D")
    out = transform.scale * pts @ transform.rotation + transform.translation
    return ShapeConfig(out) if isinstance(config, ShapeConfig) else out


def opa_fit(source, target, allow_scale: bool = True) -> tuple[SimilarityTransform, float]:
    """Ordinary Procrustes fit of ``source`` onto ``target``.

    Returns the similarity transform minimizing
    ``|| c * X @ O + t - Y ||_F**2`` over translations, proper rotations
    (reflections excluded) and, if allow_scale, positive scale -- plus the
    minimized residual. Closed form: center both, rotation from the SVD of
    Xc^T Yc with a sign-corrected last singular direction, scale from the
    corrected singular-value sum over ||Xc||^2, translation from centroids.
    """
    X = _points(source)
    Y = _points(target)
    if X.shape != Y.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {Y.shape}")
    xbar = X.mean(axis=0)
    ybar = Y.mean(axis=0)
    Xc = X - xbar
    Yc = Y - ybar
    nx2 = float((Xc * Xc).sum())
    ny2 = float((Yc * Yc).sum())
    if nx2 == 0.0:
        raise ValueError("degenerate source configuration (rank 0 after centering)")
    U, sv, Vt = np.linalg.svd(Xc.T @ Yc)
    sign = 1.0 if np.linalg.det(U @ Vt) >= 0 else -1.0
    O = _proper_rotation(U, Vt, sign)
    trace = float(sv[:-1].sum() + sign * sv[-1])
    if allow_scale:
        if trace <= 0:
            raise ValueError("anti-correlated shapes: optimal positive scale does not exist")
        c = trace / nx2
    else:
        c = 1.0
    residual = max(c * c * nx2 - 2.0 * c * trace + ny2, 0.0)
    t = ybar - c * (xbar @ O)
    return SimilarityTransform(c, O, t), residual


def _proper_rotation(U: np.ndarray, Vt: np.ndarray, sign: float) -> np.ndarray:
    d = U.shape[0]
    D = np.ones(d)
    D[-1] = sign
    return (U * D) @ Vt


@dataclass(frozen=True)
class GpaResult:
    mean: MeanShape
    transforms: tuple[SimilarityTransform, ...]
    history: tuple[float, ...]
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.history)


def gpa_fit(
    configs,
    tol: float = 1e-7,
    max_iter: int = 100,
    allow_scale: bool = True,
) -> GpaResult:
    """Generalized Procrustes fit of many configurations to a mean shape.

    The mean starts as the first configuration centered and unit-normalized;
    each iteration aligns every configuration to the mean, then replaces the
    mean by the centered, renormalized average of the aligned copies, until
    the mean moves less than ``tol`` (Frobenius) or ``max_iter`` is reached.
    The recorded objective is G = sum_i ||aligned_i - mean||_F^2 after each
    alignment pass; it is non-increasing because the averaged-and-normalized
    update is the best unit-norm target for the current alignments.

    Non-convergence is not an error: the result is returned with
    ``converged=False`` and the history showing the final objective.
    """
    pts = [_points(c) for c in configs]
    if len(pts) < 2:
        raise ValueError("need at least 2 configurations")
    shape = pts[0].shape
    for i, p in enumerate(pts):
        if p.shape != shape:
            raise ValueError(f"configuration {i} has shape {p.shape}, expected {shape}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")

    mean = normalize_shape(pts[0])
    history: list[float] = []
    transforms: list[SimilarityTransform] = []
    converged = False
    for _ in range(max_iter):
        transforms = []
        aligned = np.empty((len(pts),) + shape)
        objective = 0.0
        for i, p in enumerate(pts):
            transform, residual = opa_fit(p, mean, allow_scale=allow_scale)
            transforms.append(transform)
            aligned[i] = apply_transform(p, transform)
            objective += residual
        history.append(objective)
        candidate = normalize_shape(aligned.mean(axis=0))
        if np.linalg.norm(candidate - mean) < tol:
            converged = True
            break
        mean = candidate
    return GpaResult(MeanShape(mean), tuple(transforms), tuple(history), converged)


def align_frame(
    frame: LandmarkFrame,
    mean: MeanShape,
    subset: LandmarkSubset,
    dims: int = 3,
    allow_scale: bool = True,
) -> LandmarkFrame:
    """OPA-align one frame's subset landmarks to the mean shape.

    With dims=2 only x, y participate and the subset landmarks' z is zeroed,
    so downstream feature tensors carry no unaligned depth. Non-subset
    landmarks are left untouched (they are dropped from tensors anyway).
    """
    if dims not in (2, 3):
        raise ValueError("dims must be 2 or 3")
    if mean.d != dims or mean.k != len(subset):
        raise ValueError(
            f"mean shape is {mean.k} x {mean.d}, expected {len(subset)} x {dims}"
        )
    idx = list(subset.indices)
    pts = frame.coords[idx, :dims]
    transform, _ = opa_fit(pts, mean.points, allow_scale=allow_scale)
    aligned = apply_transform(pts, transform)
    coords = frame.coords.copy()
    coords[idx, :dims] = aligned
    if dims == 2:
        coords[idx, 2] = 0.0
    return LandmarkFrame(coords)


def align_sequence(
    seq: GaitSequence,
    mean: MeanShape,
    subset: LandmarkSubset,
    dims: int = 3,
    allow_scale: bool = True,
) -> GaitSequence:
    """Align every frame of a sequence to the mean shape (per-frame OPA)."""
    frames = tuple(align_frame(f, mean, subset, dims=dims, allow_scale=allow_scale) for f in seq.frames)
    return GaitSequence(seq.subject_id, seq.view_deg, seq.condition, frames, seq.source_indices)
