"""Verification and identification metrics, distance matrices, reports.

Identification follows the gallery/probe protocol: each probe embedding is
matched to the gallery entry at minimum Euclidean distance (ties break to
the lowest gallery position), and the rank-1 accuracy is the percentage of
probes whose match carries the true subject id.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .network import SiameseModelParams, pair_distance, similarity_score
from .pairs import PairSet


@dataclass(frozen=True)
class GalleryIndex:
    """Enrolled (subject_id, embedding) references."""

    entries: tuple[tuple[str, np.ndarray], ...]
    filters: tuple[str, ...] = ()  # view/condition filters applied upstream

    def __post_init__(self):
        entries = tuple((sid, np.asarray(e, dtype=np.float64)) for sid, e in self.entries)
        if not entries:
            raise ValueError("gallery must be non-empty")
        length = entries[0][1].shape
        for sid, e in entries:
            if not sid:
                raise ValueError("gallery subject ids must be non-empty")
            if e.shape != length or e.ndim != 1:
                raise ValueError("gallery embeddings must share one length")
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class Rank1Result:
    accuracy: float  # percentage in [0, 100]
    correct: int
    total: int
    assignments: tuple[int, ...]  # gallery position chosen per probe


def rank1_identify(gallery: GalleryIndex, probes: list[tuple[str, np.ndarray]]) -> Rank1Result:
    """Match each probe to its nearest gallery entry; accuracy = correct/total*100."""
    if not probes:
        raise ValueError("probes must be non-empty")
    gallery_matrix = np.stack([e for _, e in gallery.entries])
    correct = 0
    assignments = []
    for sid, emb in probes:
        emb = np.asarray(emb, dtype=np.float64)
        dists = np.linalg.norm(gallery_matrix - emb, axis=1)
        best = int(np.argmin(dists))  # argmin takes the lowest index on ties
        assignments.append(best)
        if gallery.entries[best][0] == sid:
            correct += 1
    accuracy = 100.0 * correct / len(probes)
    return Rank1Result(accuracy, correct, len(probes), tuple(assignments))


def pair_scores(model: SiameseModelParams, pairs: PairSet):
    """Distances, head scores and labels for every pair (tensors are raw;
    standardization and encoding happen here)."""
    from .network import encode  # local import keeps module load light

    distances = np.empty(len(pairs))
    scores = np.empty(len(pairs))
    labels = np.empty(len(pairs), dtype=int)
    for i, p in enumerate(pairs.pairs):
        e_a = encode(model, model.standardize(p.a))
        e_b = encode(model, model.standardize(p.b))
        distances[i] = pair_distance(e_a, e_b)
        scores[i] = similarity_score(model, e_a, e_b)
        labels[i] = p.label
    return distances, scores, labels


def pair_verification_accuracy(
    model: SiameseModelParams,
    pairs: PairSet,
    threshold: float | None = None,
    use_head: bool = False,
) -> float:
    """Percentage of pairs classified correctly.

    Distance mode predicts similar iff D < threshold (default margin/2);
    head mode predicts similar iff the sigmoid score exceeds 0.5.
    """
    if len(pairs) == 0:
        raise ValueError("empty pair set")
    distances, scores, labels = pair_scores(model, pairs)
    if use_head:
        predicted_similar = scores > 0.5
    else:
        tau = model.margin / 2.0 if threshold is None else threshold
        predicted_similar = distances < tau
    correct = predicted_similar == (labels == 0)
    return 100.0 * float(np.count_nonzero(correct)) / len(pairs)


def mean_pair_loss(model: SiameseModelParams, pairs: PairSet) -> float:
    from .network import contrastive_loss

    distances, _, labels = pair_scores(model, pairs)
    losses = [contrastive_loss(d, int(y), model.margin) for d, y in zip(distances, labels)]
    return float(np.mean(losses))


def distance_matrix(embeddings: list[tuple[str, np.ndarray]]):
    """Symmetric pairwise Euclidean distance matrix with a zero diagonal."""
    if not embeddings:
        raise ValueError("need at least one embedding")
    ids = [sid for sid, _ in embeddings]
    vectors = np.stack([np.asarray(e, dtype=np.float64) for _, e in embeddings])
    n = len(ids)
    matrix = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = float(np.linalg.norm(vectors[i] - vectors[j]))
            matrix[i, j] = d
            matrix[j, i] = d
    return ids, matrix


def write_distance_csv(ids: list[str], matrix: np.ndarray, path) -> None:
    """CSV with an ``id`` header row/column and full-precision decimals."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id," + ",".join(ids) + "\n")
        for i, sid in enumerate(ids):
            fh.write(sid + "," + ",".join(repr(float(x)) for x in matrix[i]) + "\n")


@dataclass
class EvalReport:
    rank1_accuracy: float
    pair_accuracy: float
    mean_loss: float
    counts: dict[str, int]
    per_view: dict[str, dict] = field(default_factory=dict)
    per_condition: dict[str, dict] = field(default_factory=dict)

    def __post_init__(self):
        for v in (self.rank1_accuracy, self.pair_accuracy):
            if not 0.0 <= v <= 100.0:
                raise ValueError("percentages must lie in [0, 100]")

    def to_json(self) -> str:
        doc = {
            "rank1_accuracy": self.rank1_accuracy,
            "pair_accuracy": self.pair_accuracy,
            "mean_loss": self.mean_loss,
            "counts": self.counts,
            "per_view": self.per_view,
            "per_condition": self.per_condition,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def breakdown(
    gallery: GalleryIndex,
    probes: list[tuple[str, np.ndarray]],
    tags: list[str],
) -> dict[str, dict]:
    """Rank-1 per tag group (probes grouped, gallery shared)."""
    groups: dict[str, list[tuple[str, np.ndarray]]] = {}
    for probe, tag in zip(probes, tags):
        groups.setdefault(tag, []).append(probe)
    out = {}
    for tag in sorted(groups):
        result = rank1_identify(gallery, groups[tag])
        out[tag] = {"rank1_accuracy": result.accuracy, "probes": result.total}
    return out


def write_breakdown_csv(table: dict[str, dict], key_name: str, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{key_name},rank1_accuracy,probes\n")
        for tag, row in table.items():
            fh.write(f"{tag},{row['rank1_accuracy']!r},{row['probes']}\n")
