"""Gait identification from body-landmark trajectories.

Pipeline: landmark JSONL -> gait-cycle segmentation -> Procrustes alignment
to a normalized mean gait shape -> siamese recurrent embeddings trained with
contrastive loss -> verification and rank-1 identification.
"""

from .core import (
    DEFAULT_N_FRAMES,
    N_COORDS,
    N_LANDMARKS,
    GaitSequence,
    LandmarkFrame,
    LandmarkSubset,
    RawTrajectory,
    SequenceTensor,
    flatten_sequence,
)
from .evaluation import (
    EvalReport,
    GalleryIndex,
    distance_matrix,
    pair_verification_accuracy,
    rank1_identify,
)
from .io import (
    DatasetManifest,
    ManifestEntry,
    SchemaError,
    read_landmark_file,
    read_sequence_file,
    write_landmark_file,
    write_sequence_file,
)
from .network import (
    EncoderParams,
    HeadParams,
    SiameseModelParams,
    contrastive_loss,
    encode,
    model_gradients,
    pair_distance,
    similarity_score,
)
from .pairs import PairSet, SequencePair, build_pairs
from .procrustes import (
    GpaResult,
    MeanShape,
    ShapeConfig,
    SimilarityTransform,
    align_sequence,
    apply_transform,
    gpa_fit,
    opa_fit,
)
from .segmentation import (
    NoCycleFound,
    SegmentationConfig,
    TrajectoryTooShort,
    segment_cycle,
)
from .synthgen import SyntheticSubjectParams, generate_subject, generate_trajectory
from .training import (
    Checkpoint,
    CheckpointCorruptError,
    CheckpointError,
    CheckpointVersionError,
    PreprocessArtifacts,
    TrainConfig,
    adam_step,
    fit_feature_stats,
    load_checkpoint,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"
