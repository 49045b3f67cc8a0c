"""End-to-end glue: trajectories -> sequences -> aligned tensors -> embeddings.

These functions wire the per-module operations into the standard run used by
the command line and the end-to-end tests: segment every trajectory, fit the
mean shape on training frames only, align and flatten everything against the
frozen mean, standardize with training statistics, and embed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GaitSequence, LandmarkSubset, RawTrajectory, SequenceTensor, flatten_sequence
from .network import SiameseModelParams, encode
from .procrustes import GpaResult, align_sequence, gpa_fit
from .segmentation import SegmentationConfig, segment_cycle
from .training import PreprocessArtifacts, fit_feature_stats


def segment_trajectories(
    trajectories: list[RawTrajectory], cfg: SegmentationConfig | None = None
) -> list[GaitSequence]:
    cfg = cfg or SegmentationConfig()
    return [segment_cycle(t, cfg) for t in trajectories]


def sequence_shape_configs(
    sequences: list[GaitSequence], subset: LandmarkSubset, dims: int
) -> list[np.ndarray]:
    """Every frame's subset landmarks as a k x d configuration (GPA input)."""
    idx = list(subset.indices)
    configs = []
    for seq in sequences:
        for frame in seq.frames:
            configs.append(frame.coords[idx, :dims])
    return configs


def fit_mean_shape(
    train_sequences: list[GaitSequence],
    subset: LandmarkSubset,
    dims: int = 3,
    allow_scale: bool = True,
    tol: float = 1e-7,
    max_iter: int = 100,
) -> GpaResult:
    configs = sequence_shape_configs(train_sequences, subset, dims)
    return gpa_fit(configs, tol=tol, max_iter=max_iter, allow_scale=allow_scale)


def align_and_flatten(
    sequences: list[GaitSequence],
    prep: PreprocessArtifacts,
) -> list[SequenceTensor]:
    """Align each sequence to the frozen mean (when present) and flatten."""
    out = []
    for seq in sequences:
        if prep.mean_shape is not None:
            seq = align_sequence(
                seq, prep.mean_shape, prep.subset, dims=prep.dims, allow_scale=prep.allow_scale
            )
        out.append(flatten_sequence(seq, prep.subset))
    return out


def fit_preprocessing(
    train_sequences: list[GaitSequence],
    subset: LandmarkSubset,
    dims: int = 3,
    allow_scale: bool = True,
    align: bool = True,
    tol: float = 1e-7,
    max_iter: int = 100,
) -> tuple[PreprocessArtifacts, list[SequenceTensor]]:
    """Fit the mean shape and feature statistics on training sequences only.

    Returns the frozen artifacts plus the training tensors (aligned,
    flattened, not yet standardized).
    """
    if not train_sequences:
        raise ValueError("need at least one training sequence")
    n_frames = train_sequences[0].n_frames
    mean_shape = None
    if align:
        mean_shape = fit_mean_shape(
            train_sequences, subset, dims=dims, allow_scale=allow_scale, tol=tol, max_iter=max_iter
        ).mean
    partial = PreprocessArtifacts(
        subset=subset,
        feature_mean=np.zeros(subset.feature_dim),
        feature_std=np.ones(subset.feature_dim),
        n_frames=n_frames,
        dims=dims,
        allow_scale=allow_scale,
        mean_shape=mean_shape,
    )
    tensors = align_and_flatten(train_sequences, partial)
    mean, std = fit_feature_stats(tensors)
    prep = PreprocessArtifacts(
        subset=subset,
        feature_mean=mean,
        feature_std=std,
        n_frames=n_frames,
        dims=dims,
        allow_scale=allow_scale,
        mean_shape=mean_shape,
    )
    return prep, tensors


def embed_sequence(model: SiameseModelParams, seq: GaitSequence) -> np.ndarray:
    """Full inference path for one segmented sequence: align to the model's
    mean shape, flatten with its subset, standardize, encode."""
    if model.mean_shape is not None:
        seq = align_sequence(seq, model.mean_shape, model.subset, dims=model.dims, allow_scale=model.allow_scale)
    tensor = flatten_sequence(seq, model.subset)
    return encode(model, model.standardize(tensor))


@dataclass(frozen=True)
class GallerySplit:
    gallery: list[GaitSequence]
    probes: list[GaitSequence]


def split_gallery_probes(sequences: list[GaitSequence]) -> GallerySplit:
    """First sequence per subject enrolls as gallery; the rest probe."""
    seen: set[str] = set()
    gallery: list[GaitSequence] = []
    probes: list[GaitSequence] = []
    for seq in sequences:
        if seq.subject_id in seen:
            probes.append(seq)
        else:
            seen.add(seq.subject_id)
            gallery.append(seq)
    return GallerySplit(gallery, probes)
