"""Optimization loop over pair sets, feature standardization, checkpoints.

Training is a pure function of (pairs, config): pairs are fixed for the run,
only their order is reshuffled per epoch; gradients are averaged over each
batch and applied with bias-corrected ADAM. Identical inputs give bitwise
identical checkpoints. After the encoder is trained with the contrastive
objective, the similarity head is fitted by binary cross-entropy on frozen
embeddings.

Checkpoint layout (little-endian): 8 magic bytes, u32 version, u64 header
length + UTF-8 JSON header (config echo, shapes, loss history, array
manifest), raw float64 arrays in manifest order, trailing CRC-32 over all
preceding bytes.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core import LandmarkSubset, SequenceTensor
from .network import (
    EncoderParams,
    HeadParams,
    ModelGradients,
    SiameseModelParams,
    _encode_cached,
    encoder_params_flat,
    init_encoder,
    init_head,
    model_gradients,
    set_encoder_params,
    sigmoid,
)
from .pairs import PairSet
from .procrustes import MeanShape

CHECKPOINT_MAGIC = b"GAITSIAM"
CHECKPOINT_VERSION = 1

# below this (relative) spread a feature counts as zero-variance
_ZERO_VAR_RTOL = 1e-12


class CheckpointError(Exception):
    pass


class CheckpointCorruptError(CheckpointError):
    """Not a checkpoint, truncated, or failed the CRC check."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint written by an unrecognized format version."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 32
    epochs: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    margin: float = 1.0
    hidden: int = 128
    cell_kind: str = "gru"
    stack: int = 2
    bidirectional: bool = True
    activation: str = "tanh"
    head_learning_rate: float = 1e-2

    def __post_init__(self):
        if self.learning_rate <= 0 or self.head_learning_rate <= 0:
            raise ValueError("learning rates must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.hidden < 1:
            raise ValueError("hidden must be >= 1")
        if self.stack < 1:
            raise ValueError("stack must be >= 1")


@dataclass(frozen=True)
class PreprocessArtifacts:
    """Frozen preprocessing state the model needs at inference time."""

    subset: LandmarkSubset
    feature_mean: np.ndarray
    feature_std: np.ndarray
    n_frames: int
    dims: int = 3
    allow_scale: bool = True
    mean_shape: MeanShape | None = None


def fit_feature_stats(tensors: list[SequenceTensor]) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature mean and population std over all rows of all tensors.

    Features whose spread is zero (relative to their magnitude) get std 1 so
    standardization leaves them harmlessly constant.
    """
    if not tensors:
        raise ValueError("need at least one tensor")
    rows = np.concatenate([t.values for t in tensors], axis=0)
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    zero_var = std <= _ZERO_VAR_RTOL * np.maximum(1.0, np.abs(mean))
    std = np.where(zero_var, 1.0, std)
    return mean, std


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    moments: tuple[dict[str, np.ndarray], dict[str, np.ndarray]],
    step_index: int,
    cfg: TrainConfig,
    learning_rate: float | None = None,
):
    """One bias-corrected ADAM update, elementwise over every array.

    Pure: returns (new_params, (new_m, new_v)); inputs are not mutated.
    """
    if step_index < 1:
        raise ValueError("step_index must be >= 1")
    lr = cfg.learning_rate if learning_rate is None else learning_rate
    m_prev, v_prev = moments
    new_params = {}
    new_m = {}
    new_v = {}
    bc1 = 1.0 - cfg.beta1**step_index
    bc2 = 1.0 - cfg.beta2**step_index
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        m = cfg.beta1 * m_prev[name] + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * v_prev[name] + (1.0 - cfg.beta2) * (g * g)
        new_params[name] = p - lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
        new_m[name] = m
        new_v[name] = v
    return new_params, (new_m, new_v)


def zero_moments(params: dict[str, np.ndarray]):
    return (
        {name: np.zeros_like(p) for name, p in params.items()},
        {name: np.zeros_like(p) for name, p in params.items()},
    )


@dataclass
class Checkpoint:
    model: SiameseModelParams
    config: TrainConfig
    loss_history: list[float]
    head_loss_history: list[float] = field(default_factory=list)
    version: int = CHECKPOINT_VERSION


def _standardized_pairs(pairs: PairSet, model: SiameseModelParams):
    return [
        replace(p, a=model.standardize(p.a), b=model.standardize(p.b))
        for p in pairs.pairs
    ]


def train(pairs: PairSet, cfg: TrainConfig, prep: PreprocessArtifacts) -> Checkpoint:
    """Train the siamese encoder on a fixed pair set, then fit the head.

    Per epoch: shuffle pair order (seeded), average the contrastive gradient
    over each batch, apply one ADAM step per batch, and record the mean
    epoch loss. A non-finite loss aborts with the offending batch index.
    """
    if len(pairs) == 0:
        raise ValueError("empty pair set")
    shapes = {(p.a.feature_dim, p.a.n_frames) for p in pairs.pairs}
    shapes |= {(p.b.feature_dim, p.b.n_frames) for p in pairs.pairs}
    if len(shapes) != 1:
        raise ValueError(f"pair tensors disagree on (F, N): {sorted(shapes)}")
    (feature_dim, n_frames) = next(iter(shapes))
    if n_frames != prep.n_frames:
        raise ValueError(f"pairs have N={n_frames}, preprocessing says {prep.n_frames}")

    rng = np.random.default_rng(cfg.seed)
    encoder = init_encoder(
        feature_dim,
        cfg.hidden,
        rng,
        cell_kind=cfg.cell_kind,
        stack=cfg.stack,
        bidirectional=cfg.bidirectional,
        activation=cfg.activation,
    )
    model = SiameseModelParams(
        encoder=encoder,
        head=init_head(encoder.embedding_dim),
        margin=cfg.margin,
        subset=prep.subset,
        feature_mean=prep.feature_mean,
        feature_std=prep.feature_std,
        n_frames=prep.n_frames,
        dims=prep.dims,
        allow_scale=prep.allow_scale,
        mean_shape=prep.mean_shape,
    )
    std_pairs = _standardized_pairs(pairs, model)

    params = encoder_params_flat(encoder)
    moments = zero_moments(params)
    step_index = 0
    loss_history: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(std_pairs))
        epoch_loss = 0.0
        for batch_no, start in enumerate(range(0, len(order), cfg.batch_size)):
            batch = order[start : start + cfg.batch_size]
            batch_grads = {name: np.zeros_like(p) for name, p in params.items()}
            batch_loss = 0.0
            for pi in batch:
                result: ModelGradients = model_gradients(model, std_pairs[pi])
                batch_loss += result.loss
                for name, g in result.grads.items():
                    batch_grads[name] += g
            if not np.isfinite(batch_loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch + 1}, batch {batch_no} "
                    f"(pairs {start}..{start + len(batch) - 1} of the shuffled order)"
                )
            scale = 1.0 / len(batch)
            for name in batch_grads:
                batch_grads[name] *= scale
            step_index += 1
            params, moments = adam_step(params, batch_grads, moments, step_index, cfg)
            set_encoder_params(encoder, params)
            epoch_loss += batch_loss
        loss_history.append(epoch_loss / len(std_pairs))

    head_history = _fit_head(model, std_pairs, cfg, rng)
    return Checkpoint(model, cfg, loss_history, head_history)


def _fit_head(model: SiameseModelParams, std_pairs, cfg: TrainConfig, rng) -> list[float]:
    """Logistic fit of the dense head on frozen embeddings (target 1 = similar)."""
    joints = []
    targets = []
    for p in std_pairs:
        emb_a, _, _ = _encode_cached(model.encoder, p.a.values)
        emb_b, _, _ = _encode_cached(model.encoder, p.b.values)
        joints.append(np.concatenate([emb_a, emb_b]))
        targets.append(1.0 - p.label)
    joints = np.stack(joints)
    targets = np.array(targets)

    params = {"W": model.head.weights.copy(), "b": np.array([model.head.bias])}
    moments = zero_moments(params)
    step_index = 0
    history: list[float] = []
    for _ in range(cfg.epochs):
        order = rng.permutation(len(targets))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            z = joints[batch] @ params["W"] + params["b"][0]
            s = sigmoid(z)
            t = targets[batch]
            # BCE with the stable log-sum-exp form
            epoch_loss += float(np.sum(np.logaddexp(0.0, z) - t * z))
            gz = (s - t) / len(batch)
            grads = {"W": joints[batch].T @ gz, "b": np.array([gz.sum()])}
            step_index += 1
            params, moments = adam_step(
                params, grads, moments, step_index, cfg, learning_rate=cfg.head_learning_rate
            )
        history.append(epoch_loss / len(targets))
    model.head = HeadParams(params["W"], float(params["b"][0]))
    return history


# ---------------------------------------------------------------------------
# checkpoint serialization


def _model_arrays(model: SiameseModelParams) -> list[tuple[str, np.ndarray]]:
    arrays = list(encoder_params_flat(model.encoder).items())
    arrays.append(("head.W", model.head.weights))
    arrays.append(("head.b", np.array([model.head.bias])))
    arrays.append(("feature_mean", model.feature_mean))
    arrays.append(("feature_std", model.feature_std))
    if model.mean_shape is not None:
        arrays.append(("mean_shape", model.mean_shape.points))
    return arrays


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    arrays = _model_arrays(ckpt.model)
    header = {
        "config": asdict(ckpt.config),
        "margin": ckpt.model.margin,
        "subset": list(ckpt.model.subset.indices),
        "n_frames": ckpt.model.n_frames,
        "dims": ckpt.model.dims,
        "allow_scale": ckpt.model.allow_scale,
        "feature_dim": ckpt.model.feature_dim,
        "loss_history": ckpt.loss_history,
        "head_loss_history": ckpt.head_loss_history,
        "arrays": [{"name": name, "shape": list(arr.shape)} for name, arr in arrays],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = bytearray()
    blob += CHECKPOINT_MAGIC
    blob += struct.pack("<I", ckpt.version)
    blob += struct.pack("<Q", len(header_bytes))
    blob += header_bytes
    for _, arr in arrays:
        blob += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)))
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(CHECKPOINT_MAGIC) + 4 + 8 + 4:
        raise CheckpointCorruptError("file too short to be a checkpoint")
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointCorruptError("bad magic bytes")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(blob[:-4]) != stored_crc:
        raise CheckpointCorruptError("CRC mismatch (truncated or corrupted)")
    offset = len(CHECKPOINT_MAGIC)
    (version,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version}")
    (header_len,) = struct.unpack_from("<Q", blob, offset)
    offset += 8
    try:
        header = json.loads(blob[offset : offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointCorruptError(f"unreadable header: {exc}") from None
    offset += header_len

    arrays: dict[str, np.ndarray] = {}
    for meta in header["arrays"]:
        shape = tuple(meta["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(blob) - 4:
            raise CheckpointCorruptError(f"array {meta['name']!r} overruns the file")
        arrays[meta["name"]] = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
        offset += nbytes

    cfg = TrainConfig(**header["config"])
    feature_dim = int(header["feature_dim"])
    encoder = init_encoder(
        feature_dim,
        cfg.hidden,
        np.random.default_rng(0),  # placeholder values; overwritten below
        cell_kind=cfg.cell_kind,
        stack=cfg.stack,
        bidirectional=cfg.bidirectional,
        activation=cfg.activation,
    )
    flat = encoder_params_flat(encoder)
    missing = set(flat) - set(arrays)
    if missing:
        raise CheckpointCorruptError(f"missing encoder arrays: {sorted(missing)}")
    for name, current in flat.items():
        if arrays[name].shape != current.shape:
            raise CheckpointCorruptError(
                f"array {name!r} has shape {arrays[name].shape}, expected {current.shape}"
            )
    set_encoder_params(encoder, arrays)

    mean_shape = MeanShape(arrays["mean_shape"]) if "mean_shape" in arrays else None
    try:
        model = SiameseModelParams(
            encoder=encoder,
            head=HeadParams(arrays["head.W"], float(arrays["head.b"][0])),
            margin=float(header["margin"]),
            subset=LandmarkSubset(tuple(header["subset"])),
            feature_mean=arrays["feature_mean"],
            feature_std=arrays["feature_std"],
            n_frames=int(header["n_frames"]),
            dims=int(header["dims"]),
            allow_scale=bool(header["allow_scale"]),
            mean_shape=mean_shape,
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise CheckpointCorruptError(f"inconsistent checkpoint contents: {exc}") from None
    return Checkpoint(
        model,
        cfg,
        [float(x) for x in header["loss_history"]],
        [float(x) for x in header["head_loss_history"]],
        version=version,
    )


def write_loss_csv(history: list[float], path) -> None:
    """Per-epoch loss log: one ``epoch,loss`` row per epoch."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for i, loss in enumerate(history, start=1):
            fh.write(f"{i},{float(loss)!r}\n")
