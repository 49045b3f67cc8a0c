import numpy as np
import pytest

from gaitid.core import SequenceTensor
from gaitid.pairs import PairSet, SequencePair, build_pairs, all_positives_counts, ratio_counts


def tensor(subject, value, rng=None):
    values = np.full((6, 9), float(value))
    if rng is not None:
        values = values + rng.normal(size=values.shape)
    return SequenceTensor(values, subject, 0.0, "NM")


def corpus(n_subjects, per_subject, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for s in range(n_subjects):
        for j in range(per_subject):
            out.append(tensor(f"S{s:03d}", s, rng))
    return out


class TestSequencePair:
    def test_label_subject_consistency(self):
        a, b = tensor("A", 0), tensor("A", 1)
        SequencePair(a, b, 0)
        with pytest.raises(ValueError):
            SequencePair(a, b, 1)
        c = tensor("B", 2)
        SequencePair(a, c, 1)
        with pytest.raises(ValueError):
            SequencePair(a, c, 0)

    def test_label_domain(self):
        with pytest.raises(ValueError):
            SequencePair(tensor("A", 0), tensor("A", 1), 2)


class TestPairSetInvariant:
    def test_declared_ratio_checked(self):
        p = SequencePair(tensor("A", 0), tensor("A", 1), 0)
        with pytest.raises(ValueError):
            PairSet((p,), seed=0, ratio=(0, 1))
        PairSet((p,), seed=0, ratio=(1, 0))


class TestBuildPairs:
    def test_training_regime_74_subjects(self):
        # one positive per subject plus sampled negatives, 400 total
        sequences = corpus(74, 2)
        n_pos, n_neg = all_positives_counts(74, 400)
        assert (n_pos, n_neg) == (74, 326)
        pairs = build_pairs(sequences, n_pos, n_neg, seed=1)
        assert len(pairs) == 400
        positives = [p for p in pairs.pairs if p.label == 0]
        negatives = [p for p in pairs.pairs if p.label == 1]
        assert len(positives) == 74 and len(negatives) == 326
        # exactly one positive per subject in this regime
        subjects = [p.a.subject_id for p in positives]
        assert len(set(subjects)) == 74
        # emitted negative pairs are distinct
        keys = {(id(p.a), id(p.b)) for p in negatives}
        assert len(keys) == 326

    def test_ratio_presets(self):
        assert ratio_counts((1, 1), 400) == (200, 200)
        assert ratio_counts((1, 2), 600) == (200, 400)

    def test_small_brute_force(self):
        # 2 subjects x 2 sequences: enumerate everything and verify labels
        sequences = corpus(2, 2)
        pairs = build_pairs(sequences, 2, 1, seed=7)
        same_subject_pairs = {
            frozenset((i, j))
            for i in range(4)
            for j in range(i + 1, 4)
            if sequences[i].subject_id == sequences[j].subject_id
        }
        ids = {id(t): k for k, t in enumerate(sequences)}
        for p in pairs.pairs:
            key = frozenset((ids[id(p.a)], ids[id(p.b)]))
            if p.label == 0:
                assert key in same_subject_pairs
            else:
                assert key not in same_subject_pairs
        assert pairs.ratio == (2, 1)

    def test_deterministic_for_seed(self):
        sequences = corpus(10, 3)
        a = build_pairs(sequences, 10, 20, seed=42)
        b = build_pairs(sequences, 10, 20, seed=42)
        for pa, pb in zip(a.pairs, b.pairs):
            assert pa.label == pb.label
            assert pa.a is pb.a and pa.b is pb.b

    def test_labels_always_consistent(self):
        rng = np.random.default_rng(0)
        for trial in range(10):
            n_sub = int(rng.integers(3, 8))
            per = int(rng.integers(2, 5))
            sequences = corpus(n_sub, per, seed=trial)
            cap_neg = n_sub * (n_sub - 1) // 2
            pairs = build_pairs(sequences, n_sub, min(cap_neg, 2 * n_sub), seed=trial)
            for p in pairs.pairs:
                assert (p.a.subject_id == p.b.subject_id) == (p.label == 0)

    def test_insufficient_positive_capacity(self):
        sequences = corpus(2, 2)  # capacity: 2 same-subject pairs
        with pytest.raises(ValueError):
            build_pairs(sequences, 3, 0, seed=0)

    def test_insufficient_negative_capacity(self):
        sequences = corpus(2, 1)  # capacity: 1 cross-subject sequence pair
        with pytest.raises(ValueError):
            build_pairs(sequences, 0, 2, seed=0)

    def test_single_subject_no_negatives(self):
        sequences = corpus(1, 4)
        with pytest.raises(ValueError):
            build_pairs(sequences, 0, 1, seed=0)

    def test_negatives_from_few_subjects_exceed_subject_pairs(self):
        # without-replacement applies to emitted sequence pairs, so many
        # negatives can come from few subjects
        sequences = corpus(4, 8)
        pairs = build_pairs(sequences, 4, 100, seed=3)
        negatives = [p for p in pairs.pairs if p.label == 1]
        assert len(negatives) == 100
        keys = set()
        ids = {id(t): k for k, t in enumerate(sequences)}
        for p in negatives:
            key = frozenset((ids[id(p.a)], ids[id(p.b)]))
            assert key not in keys
            keys.add(key)
