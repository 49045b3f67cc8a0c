"""Labeled training pairs: same-subject positives, cross-subject negatives.

Label convention: 0 = similar (same subject), 1 = dissimilar. Positive pairs
are dealt round-robin over subjects (so asking for one per subject gives
exactly that), sampling each subject's distinct sequence pairs uniformly
without replacement. Negatives draw unordered subject pairs uniformly
without replacement, then one sequence of each subject uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SequenceTensor


@dataclass(frozen=True)
class SequencePair:
    a: SequenceTensor
    b: SequenceTensor
    label: int  # 0 similar, 1 dissimilar

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")
        same = self.a.subject_id == self.b.subject_id
        if same != (self.label == 0):
            raise ValueError(
                f"label {self.label} inconsistent with subjects "
                f"{self.a.subject_id!r} / {self.b.subject_id!r}"
            )


@dataclass(frozen=True)
class PairSet:
    pairs: tuple[SequencePair, ...]
    seed: int
    ratio: tuple[int, int]  # (positives, negatives) as requested

    def __post_init__(self):
        pairs = tuple(self.pairs)
        n_pos = sum(1 for p in pairs if p.label == 0)
        n_neg = len(pairs) - n_pos
        if (n_pos, n_neg) != tuple(self.ratio):
            raise ValueError(f"pair counts ({n_pos}, {n_neg}) do not match declared ratio {self.ratio}")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "ratio", (int(self.ratio[0]), int(self.ratio[1])))

    def __len__(self) -> int:
        return len(self.pairs)


def _group_by_subject(sequences) -> dict[str, list[int]]:
    groups: dict[str, list[int]] = {}
    for i, seq in enumerate(sequences):
        groups.setdefault(seq.subject_id, []).append(i)
    return groups


def build_pairs(
    sequences: list[SequenceTensor],
    n_positive: int,
    n_negative: int,
    seed: int,
) -> PairSet:
    """Sample exactly n_positive same-subject and n_negative cross-subject
    pairs, deterministically for a fixed seed.

    Raises ValueError when the requested counts exceed what the sequences
    can supply (distinct same-subject sequence pairs for positives, distinct
    subject pairs for negatives).
    """
    if n_positive < 0 or n_negative < 0:
        raise ValueError("pair counts must be non-negative")
    groups = _group_by_subject(sequences)
    subjects = list(groups)
    rng = np.random.default_rng(seed)

    positives: list[SequencePair] = []
    if n_positive:
        eligible = [s for s in subjects if len(groups[s]) >= 2]
        capacity = sum(len(groups[s]) * (len(groups[s]) - 1) // 2 for s in eligible)
        if capacity < n_positive:
            raise ValueError(
                f"cannot build {n_positive} positive pairs: only {capacity} distinct "
                f"same-subject pairs available"
            )
        order = list(rng.permutation(len(eligible)))
        pools: dict[str, list[tuple[int, int]]] = {}
        for s in eligible:
            idx = groups[s]
            combos = [(idx[i], idx[j]) for i in range(len(idx)) for j in range(i + 1, len(idx))]
            pools[s] = [combos[i] for i in rng.permutation(len(combos))]
        while len(positives) < n_positive:
            progressed = False
            for oi in order:
                if len(positives) == n_positive:
                    break
                pool = pools[eligible[oi]]
                if pool:
                    ia, ib = pool.pop()
                    positives.append(SequencePair(sequences[ia], sequences[ib], 0))
                    progressed = True
            if not progressed:  # unreachable given the capacity check
                raise ValueError("exhausted positive pairs")

    negatives: list[SequencePair] = []
    if n_negative:
        if len(subjects) < 2:
            raise ValueError("cannot build negative pairs: need at least 2 subjects")
        n_subjects = len(subjects)
        subject_pairs = [
            (subjects[i], subjects[j]) for i in range(n_subjects) for j in range(i + 1, n_subjects)
        ]
        capacity = sum(len(groups[a]) * len(groups[b]) for a, b in subject_pairs)
        if capacity < n_negative:
            raise ValueError(
                f"cannot build {n_negative} negative pairs: only {capacity} distinct "
                f"cross-subject sequence pairs available"
            )
        # uniform over subject pairs, then uniform over their sequences;
        # duplicate sequence pairs are rejected so emitted pairs are distinct
        seen: set[tuple[int, int]] = set()
        attempts = 0
        limit = 10_000 + 1_000 * n_negative
        while len(negatives) < n_negative:
            attempts += 1
            if attempts > limit:
                raise RuntimeError("negative-pair rejection sampling did not terminate")
            sa, sb = subject_pairs[rng.integers(len(subject_pairs))]
            ia = groups[sa][rng.integers(len(groups[sa]))]
            ib = groups[sb][rng.integers(len(groups[sb]))]
            key = (ia, ib) if ia < ib else (ib, ia)
            if key in seen:
                continue
            seen.add(key)
            negatives.append(SequencePair(sequences[ia], sequences[ib], 1))

    return PairSet(tuple(positives + negatives), seed, (n_positive, n_negative))


def all_positives_counts(n_subjects: int, total: int = 400) -> tuple[int, int]:
    """One positive per training subject, the rest negatives (400 total)."""
    if total <= n_subjects:
        raise ValueError(f"total pairs {total} must exceed subject count {n_subjects}")
    return n_subjects, total - n_subjects


def ratio_counts(ratio: tuple[int, int], total: int) -> tuple[int, int]:
    """Split a pair budget by a positives:negatives ratio (e.g. 1:1, 1:2)."""
    rp, rn = ratio
    if rp <= 0 or rn <= 0:
        raise ValueError("ratio parts must be positive")
    n_positive = round(total * rp / (rp + rn))
    return n_positive, total - n_positive
