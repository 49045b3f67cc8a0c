"""Command-line entry point wiring the pipeline into reproducible runs.

One binary, subcommand style. Every run is deterministic given ``--seed``;
flags override values from an optional JSON/TOML config file, which in turn
override the built-in defaults. Errors leave a machine-readable JSON object
on stderr and a nonzero exit code.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from .core import DEFAULT_N_FRAMES, LandmarkSubset
from .evaluation import (
    EvalReport,
    GalleryIndex,
    breakdown,
    distance_matrix,
    mean_pair_loss,
    pair_verification_accuracy,
    rank1_identify,
    write_breakdown_csv,
    write_distance_csv,
)
from .io import (
    build_manifest,
    load_manifest,
    load_manifest_trajectories,
    read_landmark_file,
    read_sequence_file,
    save_manifest,
    write_landmark_file,
    write_sequence_file,
)
from .network import pair_distance, similarity_score
from .pairs import build_pairs, all_positives_counts, ratio_counts
from .pipeline import (
    align_and_flatten,
    embed_sequence,
    fit_mean_shape,
    fit_preprocessing,
    segment_trajectories,
    split_gallery_probes,
)
from .segmentation import SegmentationConfig
from .synthgen import generate_subject, generate_trajectory
from .training import TrainConfig, load_checkpoint, save_checkpoint, train, write_loss_csv

DEFAULTS = {
    "seed": 0,
    "landmarks": "0-32",
    "n_frames": DEFAULT_N_FRAMES,
    "hidden": 128,
    "cell": "gru",
    "bidirectional": True,
    "stack": 2,
    "margin": 1.0,
    "lr": 1e-4,
    "batch": 32,
    "epochs": 10,
    "dims": 3,
    "allow_scale": True,
    "threshold": None,  # verification threshold; None means margin/2
    "activation": "tanh",
    "tracking_landmark": 31,
    "axis": 0,
    "smoothing_window": 5,
    "amplitude_fraction": 0.5,
    # synth
    "subjects": 20,
    "train_subjects": 12,
    "sequences": 8,
    "frames": 80,
    "separation": 1.5,
    "noise": 0.005,
    "views": "0,15,30,45",
    # pairs
    "pairs_total": 400,
    "pair_mode": "all-pos",
    "pair_ratio": "1:2",
    # gpa
    "gpa_tol": 1e-7,
    "gpa_max_iter": 100,
}


class CliError(Exception):
    """User-facing command error (bad config, missing file, bad data)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse usage errors as JSON on stderr
        print(json.dumps({"error": "usage", "message": message}), file=sys.stderr)
        raise SystemExit(2)


def _d(key):
    return f"(default: {DEFAULTS[key]})"


def _add_common(p):
    p.add_argument("--seed", type=int, help=f"master RNG seed {_d('seed')}")
    p.add_argument("--config", help="JSON or TOML file with defaults for any flag")


def _add_model_flags(p):
    p.add_argument("--landmarks", help=f"landmark subset, e.g. 0-32, 23-32, or comma list {_d('landmarks')}")
    p.add_argument("--n-frames", type=int, dest="n_frames", help=f"frames per gait cycle {_d('n_frames')}")
    p.add_argument("--hidden", type=int, help=f"recurrent units per direction {_d('hidden')}")
    p.add_argument("--cell", choices=["rnn", "lstm", "gru"], help=f"recurrent cell kind {_d('cell')}")
    p.add_argument(
        "--bidirectional",
        choices=["on", "off"],
        help=f"scan both time directions {_d('bidirectional')}",
    )
    p.add_argument("--stack", type=int, choices=[1, 2], help=f"stacked recurrent layers {_d('stack')}")
    p.add_argument("--margin", type=float, help=f"contrastive margin {_d('margin')}")
    p.add_argument("--lr", type=float, help=f"learning rate {_d('lr')}")
    p.add_argument("--batch", type=int, help=f"batch size {_d('batch')}")
    p.add_argument("--epochs", type=int, help=f"training epochs {_d('epochs')}")
    p.add_argument("--dims", type=int, choices=[2, 3], help=f"alignment dimensionality {_d('dims')}")
    p.add_argument(
        "--allow-scale",
        dest="allow_scale",
        choices=["on", "off"],
        help=f"scaling in Procrustes fits {_d('allow_scale')}",
    )
    p.add_argument("--activation", choices=["tanh", "relu"], help=f"candidate activation {_d('activation')}")


def _add_segment_flags(p):
    p.add_argument("--tracking-landmark", type=int, dest="tracking_landmark",
                   help=f"landmark index driving segmentation {_d('tracking_landmark')}")
    p.add_argument("--axis", type=int, choices=[0, 1, 2], help=f"tracked coordinate {_d('axis')}")
    p.add_argument("--smoothing-window", type=int, dest="smoothing_window",
                   help=f"odd moving-average window {_d('smoothing_window')}")
    p.add_argument("--amplitude-fraction", type=float, dest="amplitude_fraction",
                   help=f"required ascent rise as a fraction of range {_d('amplitude_fraction')}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gaitid", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="generate a synthetic landmark dataset + manifests")
    _add_common(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--subjects", type=int, help=f"total subjects {_d('subjects')}")
    p.add_argument("--train-subjects", type=int, dest="train_subjects",
                   help=f"subjects assigned to the train split {_d('train_subjects')}")
    p.add_argument("--sequences", type=int, help=f"trajectories per subject {_d('sequences')}")
    p.add_argument("--frames", type=int, help=f"frames per trajectory {_d('frames')}")
    p.add_argument("--separation", type=float, help=f"inter-subject separation {_d('separation')}")
    p.add_argument("--noise", type=float, help=f"per-coordinate noise sigma {_d('noise')}")
    p.add_argument("--views", help=f"comma list of view angles cycled over sequences {_d('views')}")

    p = sub.add_parser("segment", help="segment trajectories into gait-cycle sequences")
    _add_common(p)
    _add_segment_flags(p)
    p.add_argument("--input", required=True, help="landmark JSONL file")
    p.add_argument("--out", required=True, help="segmented-sequence JSONL file")
    p.add_argument("--n-frames", type=int, dest="n_frames", help=f"frames per cycle {_d('n_frames')}")

    p = sub.add_parser("fit-align", help="fit the normalized mean gait shape on training sequences")
    _add_common(p)
    p.add_argument("--sequences", required=True, help="segmented-sequence JSONL file")
    p.add_argument("--out", required=True, help="mean-shape JSON artifact")
    p.add_argument("--landmarks", help=f"landmark subset {_d('landmarks')}")
    p.add_argument("--dims", type=int, choices=[2, 3], help=f"alignment dimensionality {_d('dims')}")
    p.add_argument("--allow-scale", dest="allow_scale", choices=["on", "off"],
                   help=f"scaling in Procrustes fits {_d('allow_scale')}")
    p.add_argument("--gpa-tol", type=float, dest="gpa_tol", help=f"convergence tolerance {_d('gpa_tol')}")
    p.add_argument("--gpa-max-iter", type=int, dest="gpa_max_iter", help=f"iteration cap {_d('gpa_max_iter')}")

    p = sub.add_parser("train", help="train the siamese encoder on a manifest's trajectories")
    _add_common(p)
    _add_model_flags(p)
    _add_segment_flags(p)
    p.add_argument("--manifest", required=True, help="train-split manifest JSON")
    p.add_argument("--base-dir", help="directory the manifest's records resolve against (default: manifest dir)")
    p.add_argument("--out", required=True, help="checkpoint file")
    p.add_argument("--loss-csv", dest="loss_csv", help="per-epoch loss CSV (default: <out>.loss.csv)")
    p.add_argument("--pairs-total", type=int, dest="pairs_total", help=f"total training pairs {_d('pairs_total')}")
    p.add_argument("--pair-mode", dest="pair_mode", choices=["all-pos", "ratio"],
                   help=f"all-pos: one positive per subject, rest negative; ratio: split by --pair-ratio {_d('pair_mode')}")
    p.add_argument("--pair-ratio", dest="pair_ratio", help=f"positives:negatives for ratio mode {_d('pair_ratio')}")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest (rank-1 + verification)")
    _add_common(p)
    _add_segment_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True, help="test-split manifest JSON")
    p.add_argument("--base-dir", help="directory the manifest's records resolve against (default: manifest dir)")
    p.add_argument("--out-dir", required=True, help="directory for report.json and CSV tables")
    p.add_argument("--landmarks", help="must match the checkpoint subset when given")
    p.add_argument("--threshold", type=float, help="verification distance threshold (default: margin/2)")
    p.add_argument("--use-head", dest="use_head", action="store_true",
                   help="verify with the sigmoid head instead of the distance threshold")
    p.add_argument("--pairs-total", type=int, dest="pairs_total",
                   help="verification pairs to sample (default: one positive per subject, 1:2 ratio)")

    p = sub.add_parser("compare", help="score two captures against each other (accept/deny)")
    _add_common(p)
    _add_segment_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--a", required=True, help="landmark JSONL (first record is used)")
    p.add_argument("--b", required=True, help="landmark JSONL (first record is used)")
    p.add_argument("--segmented", action="store_true", help="inputs are segmented-sequence files")
    p.add_argument("--threshold", type=float, help="accept distance threshold (default: margin/2)")
    return parser


def _load_config_file(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise CliError(f"config file not found: {path}")
    text = p.read_text(encoding="utf-8")
    if p.suffix.lower() == ".toml":
        try:
            import tomllib  # py311+
        except ModuleNotFoundError:
            import tomli as tomllib
        doc = tomllib.loads(text)
    else:
        doc = json.loads(text)
    if not isinstance(doc, dict):
        raise CliError("config file must hold a table/object of flag values")
    return doc


def resolve(args, *keys):
    """Flag value > config-file value > built-in default; unknown config keys rejected."""
    config = {}
    if getattr(args, "config", None):
        config = _load_config_file(args.config)
        unknown = sorted(set(config) - set(DEFAULTS))
        if unknown:
            raise CliError(f"unknown config keys: {', '.join(unknown)}")
    out = {}
    for key in keys:
        value = getattr(args, key, None)
        if value is None:
            value = config.get(key, DEFAULTS[key])
        if isinstance(DEFAULTS[key], bool) and isinstance(value, str):
            if value not in ("on", "off"):
                raise CliError(f"{key} must be 'on' or 'off', got {value!r}")
            value = value == "on"
        out[key] = value
    return out


def _parse_views(text) -> list[float]:
    views = [float(v) for v in str(text).split(",") if str(v).strip()]
    if not views:
        raise CliError("need at least one view angle")
    return views


def _seg_config(opt, n_frames) -> SegmentationConfig:
    return SegmentationConfig(
        tracking_landmark=opt["tracking_landmark"],
        axis=opt["axis"],
        smoothing_window=opt["smoothing_window"],
        amplitude_fraction=opt["amplitude_fraction"],
        n_frames=n_frames,
    )

_SEG_KEYS = ("tracking_landmark", "axis", "smoothing_window", "amplitude_fraction")


def cmd_synth(args) -> int:
    opt = resolve(args, "seed", "subjects", "train_subjects", "sequences", "frames",
                  "separation", "noise", "views")
    if not 0 < opt["train_subjects"] < opt["subjects"]:
        raise CliError("train-subjects must lie strictly between 0 and subjects")
    views = _parse_views(opt["views"])
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(opt["seed"])
    train_trajs = []
    test_trajs = []
    for s in range(opt["subjects"]):
        subject = generate_subject(
            int(rng.integers(2**62)), opt["separation"], noise_sigma=opt["noise"],
            subject_id=f"S{s:03d}",
        )
        bucket = train_trajs if s < opt["train_subjects"] else test_trajs
        for j in range(opt["sequences"]):
            bucket.append(
                generate_trajectory(
                    subject, opt["frames"], view_deg=views[j % len(views)],
                    seed=int(rng.integers(2**62)),
                )
            )
    write_landmark_file(train_trajs, out_dir / "train.jsonl")
    write_landmark_file(test_trajs, out_dir / "test.jsonl")
    save_manifest(build_manifest(train_trajs, "train.jsonl", "train"), out_dir / "manifest-train.json")
    save_manifest(build_manifest(test_trajs, "test.jsonl", "test"), out_dir / "manifest-test.json")
    print(json.dumps({
        "out_dir": str(out_dir),
        "train_records": len(train_trajs),
        "test_records": len(test_trajs),
        "seed": opt["seed"],
    }, sort_keys=True))
    return 0


def cmd_segment(args) -> int:
    opt = resolve(args, "seed", "n_frames", *_SEG_KEYS)
    trajectories = read_landmark_file(args.input)
    cfg = _seg_config(opt, opt["n_frames"])
    sequences = segment_trajectories(trajectories, cfg)
    write_sequence_file(sequences, args.out)
    print(json.dumps({"sequences": len(sequences), "n_frames": opt["n_frames"]}, sort_keys=True))
    return 0


def cmd_fit_align(args) -> int:
    opt = resolve(args, "landmarks", "dims", "allow_scale", "gpa_tol", "gpa_max_iter")
    sequences = read_sequence_file(args.sequences)
    if not sequences:
        raise CliError("no sequences in input")
    subset = LandmarkSubset.parse(opt["landmarks"])
    result = fit_mean_shape(
        sequences, subset, dims=opt["dims"], allow_scale=opt["allow_scale"],
        tol=opt["gpa_tol"], max_iter=opt["gpa_max_iter"],
    )
    doc = {
        "points": result.mean.points.tolist(),
        "subset": list(subset.indices),
        "dims": opt["dims"],
        "allow_scale": opt["allow_scale"],
        "converged": result.converged,
        "iterations": result.iterations,
        "objective": result.history[-1],
    }
    Path(args.out).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(json.dumps({"converged": result.converged, "iterations": result.iterations,
                      "objective": result.history[-1]}, sort_keys=True))
    return 0


def _train_config(opt) -> TrainConfig:
    return TrainConfig(
        learning_rate=opt["lr"],
        batch_size=opt["batch"],
        epochs=opt["epochs"],
        seed=opt["seed"],
        margin=opt["margin"],
        hidden=opt["hidden"],
        cell_kind=opt["cell"],
        stack=opt["stack"],
        bidirectional=opt["bidirectional"],
        activation=opt["activation"],
    )


def _pair_counts(opt, subjects: int) -> tuple[int, int]:
    if opt["pair_mode"] == "all-pos":
        return all_positives_counts(subjects, opt["pairs_total"])
    parts = str(opt["pair_ratio"]).split(":")
    if len(parts) != 2:
        raise CliError("pair-ratio must look like 1:2")
    return ratio_counts((int(parts[0]), int(parts[1])), opt["pairs_total"])


def cmd_train(args) -> int:
    opt = resolve(args, "seed", "landmarks", "n_frames", "hidden", "cell", "bidirectional",
                  "stack", "margin", "lr", "batch", "epochs", "dims", "allow_scale",
                  "activation", "pairs_total", "pair_mode", "pair_ratio",
                  "gpa_tol", "gpa_max_iter", *_SEG_KEYS)
    manifest = load_manifest(args.manifest)
    base_dir = args.base_dir or Path(args.manifest).parent
    trajectories = load_manifest_trajectories(manifest, base_dir)
    if not trajectories:
        raise CliError("manifest resolves to no trajectories")
    subset = LandmarkSubset.parse(opt["landmarks"])
    sequences = segment_trajectories(trajectories, _seg_config(opt, opt["n_frames"]))
    prep, tensors = fit_preprocessing(
        sequences, subset, dims=opt["dims"], allow_scale=opt["allow_scale"],
        tol=opt["gpa_tol"], max_iter=opt["gpa_max_iter"],
    )
    n_pos, n_neg = _pair_counts(opt, len({s.subject_id for s in sequences}))
    pair_set = build_pairs(tensors, n_pos, n_neg, seed=opt["seed"])
    checkpoint = train(pair_set, _train_config(opt), prep)
    save_checkpoint(checkpoint, args.out)
    loss_csv = args.loss_csv or f"{args.out}.loss.csv"
    write_loss_csv(checkpoint.loss_history, loss_csv)
    print(json.dumps({
        "checkpoint": str(args.out),
        "loss_csv": str(loss_csv),
        "pairs": [n_pos, n_neg],
        "feature_dim": checkpoint.model.feature_dim,
        "final_loss": checkpoint.loss_history[-1],
    }, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    opt = resolve(args, "seed", "threshold", *_SEG_KEYS)
    checkpoint = load_checkpoint(args.checkpoint)
    model = checkpoint.model
    if args.landmarks is not None:
        requested = LandmarkSubset.parse(args.landmarks)
        if requested != model.subset:
            raise CliError(
                f"--landmarks {args.landmarks} does not match the checkpoint subset {model.subset.spec()}"
            )
    manifest = load_manifest(args.manifest)
    base_dir = args.base_dir or Path(args.manifest).parent
    trajectories = load_manifest_trajectories(manifest, base_dir)
    if not trajectories:
        raise CliError("manifest resolves to no trajectories")
    sequences = segment_trajectories(trajectories, _seg_config(opt, model.n_frames))
    split = split_gallery_probes(sequences)
    if not split.probes:
        raise CliError("every subject has a single sequence; nothing to probe")
    gallery = GalleryIndex(tuple((s.subject_id, embed_sequence(model, s)) for s in split.gallery))
    probes = [(s.subject_id, embed_sequence(model, s)) for s in split.probes]
    rank1 = rank1_identify(gallery, probes)

    tensors = align_and_flatten(sequences, _prep_from_model(model))
    subjects = {s.subject_id for s in sequences}
    counts = Counter(t.subject_id for t in tensors)
    eligible = sum(1 for c in counts.values() if c >= 2)
    if args.pairs_total is not None:
        n_pos, n_neg = all_positives_counts(len(subjects), args.pairs_total)
    else:
        n_pos = eligible
        n_neg = min(2 * n_pos, len(subjects) * (len(subjects) - 1) // 2) if len(subjects) > 1 else 0
    pair_set = build_pairs(tensors, n_pos, n_neg, seed=opt["seed"])
    pair_acc = pair_verification_accuracy(model, pair_set, threshold=opt["threshold"], use_head=args.use_head)
    loss = mean_pair_loss(model, pair_set)

    per_view = breakdown(gallery, probes, [f"{s.view_deg:g}" for s in split.probes])
    per_condition = breakdown(gallery, probes, [s.condition for s in split.probes])
    report = EvalReport(
        rank1_accuracy=rank1.accuracy,
        pair_accuracy=pair_acc,
        mean_loss=loss,
        counts={
            "gallery": len(gallery),
            "probes": rank1.total,
            "pairs": len(pair_set),
            "feature_dim": model.feature_dim,
        },
        per_view=per_view,
        per_condition=per_condition,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    write_breakdown_csv(per_view, "view_deg", out_dir / "breakdown_view.csv")
    write_breakdown_csv(per_condition, "condition", out_dir / "breakdown_condition.csv")
    labeled = [(f"{sid}/{i}", emb) for i, (sid, emb) in enumerate(probes)]
    ids, matrix = distance_matrix(labeled)
    write_distance_csv(ids, matrix, out_dir / "distances.csv")
    print(report.to_json(), end="")
    return 0


def _prep_from_model(model):
    from .training import PreprocessArtifacts

    return PreprocessArtifacts(
        subset=model.subset,
        feature_mean=model.feature_mean,
        feature_std=model.feature_std,
        n_frames=model.n_frames,
        dims=model.dims,
        allow_scale=model.allow_scale,
        mean_shape=model.mean_shape,
    )


def _first_sequence(path, segmented: bool, model, opt):
    if segmented:
        sequences = read_sequence_file(path)
        if not sequences:
            raise CliError(f"no sequences in {path}")
        return sequences[0]
    trajectories = read_landmark_file(path)
    if not trajectories:
        raise CliError(f"no trajectories in {path}")
    return segment_trajectories(trajectories[:1], _seg_config(opt, model.n_frames))[0]


def cmd_compare(args) -> int:
    opt = resolve(args, "threshold", *_SEG_KEYS)
    model = load_checkpoint(args.checkpoint).model
    seq_a = _first_sequence(args.a, args.segmented, model, opt)
    seq_b = _first_sequence(args.b, args.segmented, model, opt)
    emb_a = embed_sequence(model, seq_a)
    emb_b = embed_sequence(model, seq_b)
    distance = pair_distance(emb_a, emb_b)
    score = similarity_score(model, emb_a, emb_b)
    tau = model.margin / 2.0 if opt["threshold"] is None else opt["threshold"]
    print(json.dumps({
        "distance": distance,
        "similarity": score,
        "threshold": tau,
        "accept": bool(distance < tau),
    }, sort_keys=True))
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "segment": cmd_segment,
    "fit-align": cmd_fit_align,
    "train": cmd_train,
    "eval": cmd_eval,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (CliError, OSError, ValueError, RuntimeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
