"""Tests for dataset bundles, stratified folds, F1 reports, learning curves,
and Cohen's kappa."""

import json
import random

import numpy as np
import pytest

from oracles import bf_cohens_kappa, bf_f1
from patentscape.corpus import CATEGORIES, LabeledExample
from patentscape.errors import PatentscapeError, TrainingError
from patentscape.evaluation import (
    DatasetBundle,
    MetricsReport,
    build_bundle,
    cohens_kappa,
    curve_to_csv,
    evaluate,
    f1,
    format_reports_table,
    kfold,
    learning_curve,
    per_class_f1,
)

CATEGORY_FIELDS = {
    "Hard+": ("positive", "hard", "annotator", "ann-1"),
    "Hard-": ("negative", "hard", "annotator", "ann-1"),
    "Easy+": ("positive", "easy", "seed", None),
    "Easy-": ("negative", "easy", "anti_seed", None),
}
PREFIX = {"Hard+": "HP", "Hard-": "HN", "Easy+": "EP", "Easy-": "EN"}


def make_labels(counts):
    out = []
    for category, n in counts.items():
        label, difficulty, source, annotator = CATEGORY_FIELDS[category]
        for i in range(n):
            out.append(
                LabeledExample(
                    patent_id=f"{PREFIX[category]}{i:05d}",
                    label=label,
                    difficulty=difficulty,
                    source=source,
                    annotator_id=annotator,
                )
            )
    return out


def gold_map(examples):
    return {ex.patent_id: ex.label for ex in examples}


def oracle_fit(gold):
    return lambda train: (lambda pid: gold[pid])


def anti_oracle_fit(gold):
    flip = {"positive": "negative", "negative": "positive"}
    return lambda train: (lambda pid: flip[gold[pid]])


def constant_fit(label):
    return lambda train: (lambda pid: label)


def small_bundle(per_category=10, rng_seed=0):
    return build_bundle(make_labels({c: per_category for c in CATEGORIES}), rng_seed)


class TestBuildBundle:
    def test_reference_corpus_counts(self):
        labels = make_labels(
            {"Hard+": 395, "Hard-": 754, "Easy+": 2020, "Easy-": 56093}
        )
        bundle = build_bundle(labels, rng_seed=1)
        bundle.check()
        assert len(bundle.balanced) == 1580
        assert bundle.balanced_counts() == {c: 395 for c in CATEGORIES}
        assert len(bundle.holdout) == 57682
        assert bundle.holdout_counts() == {
            "Hard+": 0,
            "Hard-": 359,
            "Easy+": 1625,
            "Easy-": 55698,
        }

    def test_equal_categories_leave_empty_holdout(self):
        bundle = build_bundle(make_labels({c: 6 for c in CATEGORIES}))
        bundle.check()
        assert bundle.holdout == ()
        assert len(bundle.balanced) == 24

    def test_small_arithmetic(self):
        labels = make_labels({"Hard+": 10, "Hard-": 20, "Easy+": 30, "Easy-": 40})
        bundle = build_bundle(labels)
        bundle.check()
        assert len(bundle.balanced) == 40
        assert len(bundle.holdout) == 60
        assert bundle.holdout_counts() == {
            "Hard+": 0,
            "Hard-": 10,
            "Easy+": 20,
            "Easy-": 30,
        }

    def test_short_category_error_states_counts(self):
        labels = make_labels({"Hard+": 10, "Hard-": 4, "Easy+": 30, "Easy-": 40})
        with pytest.raises(PatentscapeError, match=r"Hard-.*4"):
            build_bundle(labels)

    def test_empty_category_rejected(self):
        labels = make_labels({"Hard+": 5, "Hard-": 5, "Easy+": 5, "Easy-": 0})
        with pytest.raises(PatentscapeError, match="Easy-"):
            build_bundle(labels)

    def test_reproducible_per_seed(self):
        labels = make_labels({"Hard+": 5, "Hard-": 9, "Easy+": 9, "Easy-": 9})
        a = build_bundle(labels, rng_seed=3)
        b = build_bundle(labels, rng_seed=3)
        assert [ex.patent_id for ex in a.balanced] == [ex.patent_id for ex in b.balanced]
        c = build_bundle(labels, rng_seed=4)
        assert [ex.patent_id for ex in a.balanced] != [ex.patent_id for ex in c.balanced]

    def test_input_order_ignored(self):
        labels = make_labels({"Hard+": 5, "Hard-": 9, "Easy+": 9, "Easy-": 9})
        shuffled = labels[:]
        random.Random(1).shuffle(shuffled)
        a = build_bundle(labels, rng_seed=2)
        b = build_bundle(shuffled, rng_seed=2)
        assert [ex.patent_id for ex in a.balanced] == [ex.patent_id for ex in b.balanced]
        assert [ex.patent_id for ex in a.holdout] == [ex.patent_id for ex in b.holdout]

    @pytest.mark.parametrize("seed", range(5))
    def test_invariants_hold_for_any_seed(self, seed):
        labels = make_labels({"Hard+": 4, "Hard-": 7, "Easy+": 11, "Easy-": 13})
        bundle = build_bundle(labels, rng_seed=seed)
        bundle.check()
        assert len(bundle.balanced) + len(bundle.holdout) == len(labels)


class TestKfold:
    def test_ten_items_five_folds_of_two(self):
        data = make_labels({"Hard+": 10})
        splits = kfold(data, k=5)
        assert all(len(test) == 2 for _, test in splits)
        assert all(len(train) == 8 for train, _ in splits)

    def test_folds_partition_data(self):
        data = make_labels({"Hard+": 7, "Hard-": 6, "Easy+": 5, "Easy-": 9})
        splits = kfold(data, k=4)
        seen = [ex.patent_id for _, test in splits for ex in test]
        assert sorted(seen) == sorted(ex.patent_id for ex in data)
        assert len(seen) == len(set(seen))

    def test_balanced_forty_stratifies_two_per_category(self):
        data = make_labels({c: 10 for c in CATEGORIES})
        for _, test in kfold(data, k=5):
            per_cat = {c: 0 for c in CATEGORIES}
            for ex in test:
                per_cat[ex.category] += 1
            assert per_cat == {c: 2 for c in CATEGORIES}

    def test_fold_sizes_differ_by_at_most_one(self):
        data = make_labels({"Hard+": 5, "Hard-": 4, "Easy+": 3, "Easy-": 1})
        sizes = [len(test) for _, test in kfold(data, k=5)]
        assert max(sizes) - min(sizes) <= 1
        assert sum(sizes) == 13

    def test_per_category_counts_differ_by_at_most_one(self):
        data = make_labels({"Hard+": 7, "Hard-": 11, "Easy+": 4, "Easy-": 6})
        splits = kfold(data, k=3)
        for category in CATEGORIES:
            counts = [
                sum(1 for ex in test if ex.category == category) for _, test in splits
            ]
            assert max(counts) - min(counts) <= 1

    def test_input_order_ignored(self):
        data = make_labels({"Hard+": 6, "Hard-": 6, "Easy+": 6, "Easy-": 6})
        shuffled = data[:]
        random.Random(0).shuffle(shuffled)
        a = kfold(data, k=4, rng_seed=5)
        b = kfold(shuffled, k=4, rng_seed=5)
        for (_, test_a), (_, test_b) in zip(a, b):
            assert [ex.patent_id for ex in test_a] == [ex.patent_id for ex in test_b]

    def test_k_exceeding_size_rejected(self):
        with pytest.raises(PatentscapeError):
            kfold(make_labels({"Hard+": 3}), k=5)

    def test_k_below_two_rejected(self):
        with pytest.raises(PatentscapeError):
            kfold(make_labels({"Hard+": 3}), k=1)


class TestF1:
    def test_hand_arithmetic(self):
        assert f1(2, 1, 1) == pytest.approx(2 / 3)

    def test_zero_denominator(self):
        assert f1(0, 0, 0) == 0.0

    def test_negative_counts_rejected(self):
        with pytest.raises(PatentscapeError):
            f1(1, -1, 0)

    def test_matches_reference_formula(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            golds = rng.choice([0, 1], 12).tolist()
            preds = rng.choice([0, 1], 12).tolist()
            tp = sum(1 for g, p in zip(golds, preds) if g == 1 and p == 1)
            fp = sum(1 for g, p in zip(golds, preds) if g == 0 and p == 1)
            fn = sum(1 for g, p in zip(golds, preds) if g == 1 and p == 0)
            assert f1(tp, fp, fn) == pytest.approx(bf_f1(golds, preds))


class TestPerClassF1:
    def table(self, pairs):
        ids = [f"x{i}" for i in range(len(pairs))]
        golds = {i: g for i, (g, _) in zip(ids, pairs)}
        preds = {i: p for i, (_, p) in zip(ids, pairs)}
        return preds, golds

    def test_perfect_predictions(self):
        preds, golds = self.table(
            [("positive", "positive"), ("negative", "negative")] * 2
        )
        assert per_class_f1(preds, golds) == (1.0, 1.0)

    def test_constant_positive_on_balanced_four(self):
        preds, golds = self.table(
            [("positive", "positive"), ("positive", "positive"),
             ("negative", "positive"), ("negative", "positive")]
        )
        pos, neg = per_class_f1(preds, golds)
        assert pos == pytest.approx(2 / 3)
        assert neg == 0.0

    def test_polarity_flip_swaps_pair(self):
        rng = np.random.default_rng(4)
        flip = {"positive": "negative", "negative": "positive"}
        for _ in range(20):
            pairs = [
                (rng.choice(["positive", "negative"]), rng.choice(["positive", "negative"]))
                for _ in range(10)
            ]
            preds, golds = self.table(pairs)
            flipped_preds = {i: flip[p] for i, p in preds.items()}
            flipped_golds = {i: flip[g] for i, g in golds.items()}
            pos, neg = per_class_f1(preds, golds)
            assert per_class_f1(flipped_preds, flipped_golds) == (neg, pos)

    def test_subset_restricts_scoring(self):
        preds, golds = self.table(
            [("positive", "positive"), ("positive", "negative"),
             ("negative", "negative"), ("negative", "negative")]
        )
        assert per_class_f1(preds, golds, subset=["x0", "x2"]) == (1.0, 1.0)


class TestMetricsReport:
    def report(self):
        return MetricsReport(
            category_f1={"Hard+": 0.8, "Hard-": 0.6, "Easy+": 1.0, "Easy-": 0.9},
            holdout_recall={"Easy-": 0.95},
            fold_count=5,
        )

    def test_averaging_structure(self):
        r = self.report()
        assert r.hard_avg == pytest.approx(0.7)
        assert r.easy_avg == pytest.approx(0.95)
        assert r.overall == pytest.approx(0.825)

    def test_json_shape(self):
        obj = json.loads(self.report().to_json())
        assert obj["overall"] == pytest.approx(0.825)
        assert obj["holdout_recall"] == {"Easy-": 0.95}
        assert obj["fold_count"] == 5

    def test_table_layout(self):
        text = format_reports_table({"svm-tfidf": self.report()})
        lines = text.splitlines()
        assert lines[0].split() == [
            "Model", "Hard+", "Hard-", "Hard", "avg", "Easy+", "Easy-",
            "Easy", "avg", "Overall", "HO", "Easy-",
        ]
        assert "svm-tfidf" in lines[2]
        assert "0.825" in lines[2]

    def test_table_marks_missing_holdout_columns(self):
        with_holdout = self.report()
        without = MetricsReport(
            category_f1={"Hard+": 1.0, "Hard-": 1.0, "Easy+": 1.0, "Easy-": 1.0}
        )
        text = format_reports_table({"a": with_holdout, "b": without})
        row_b = text.splitlines()[3]
        assert row_b.rstrip().endswith("-")


class TestEvaluate:
    def test_oracle_scores_one_everywhere(self):
        labels = make_labels({"Hard+": 10, "Hard-": 12, "Easy+": 15, "Easy-": 20})
        bundle = build_bundle(labels)
        report = evaluate(oracle_fit(gold_map(labels)), bundle)
        assert report.category_f1 == {c: 1.0 for c in CATEGORIES}
        assert report.overall == 1.0
        assert report.holdout_recall == {"Hard-": 1.0, "Easy+": 1.0, "Easy-": 1.0}

    def test_anti_oracle_scores_zero_everywhere(self):
        labels = make_labels({"Hard+": 10, "Hard-": 12, "Easy+": 15, "Easy-": 20})
        bundle = build_bundle(labels)
        report = evaluate(anti_oracle_fit(gold_map(labels)), bundle)
        assert report.category_f1 == {c: 0.0 for c in CATEGORIES}
        assert report.overall == 0.0
        assert set(report.holdout_recall.values()) == {0.0}

    def test_constant_positive_zeroes_negative_classes(self):
        bundle = small_bundle()
        report = evaluate(constant_fit("positive"), bundle, k=5)
        assert report.category_f1["Hard-"] == 0.0
        assert report.category_f1["Easy-"] == 0.0
        assert report.category_f1["Hard+"] > 0.0

    def test_constant_positive_holdout_recall_by_class(self):
        labels = make_labels({"Hard+": 5, "Hard-": 8, "Easy+": 9, "Easy-": 10})
        bundle = build_bundle(labels)
        report = evaluate(constant_fit("positive"), bundle)
        assert report.holdout_recall["Easy+"] == 1.0
        assert report.holdout_recall["Hard-"] == 0.0
        assert report.holdout_recall["Easy-"] == 0.0

    def test_training_error_names_fold(self):
        def broken_fit(train):
            raise TrainingError("solver exploded")

        with pytest.raises(TrainingError, match="fold 0"):
            evaluate(broken_fit, small_bundle())

    def test_empty_holdout_reported_empty(self):
        bundle = build_bundle(make_labels({c: 8 for c in CATEGORIES}))
        report = evaluate(oracle_fit(gold_map(bundle.balanced)), bundle)
        assert report.holdout_recall == {}


class TestLearningCurve:
    def test_full_size_equals_evaluate(self):
        labels = make_labels({"Hard+": 10, "Hard-": 12, "Easy+": 15, "Easy-": 20})
        bundle = build_bundle(labels, rng_seed=6)
        fit = oracle_fit(gold_map(labels))

        flaky_gold = gold_map(labels)
        noisy = {
            pid: ("negative" if i % 3 == 0 else label)
            for i, (pid, label) in enumerate(sorted(flaky_gold.items()))
        }
        noisy_fit = lambda train: (lambda pid: noisy[pid])

        curve = learning_curve(noisy_fit, bundle, sizes=[40])
        report = evaluate(noisy_fit, bundle, include_holdout=False)
        assert curve[40] == pytest.approx(report.overall, abs=0.0)

        assert learning_curve(fit, bundle, sizes=[40])[40] == 1.0

    def test_oracle_curve_is_flat_one(self):
        bundle = small_bundle(per_category=10)
        fit = oracle_fit(gold_map(bundle.balanced))
        curve = learning_curve(fit, bundle, sizes=[40, 20, 8])
        assert curve == {40: 1.0, 20: 1.0, 8: 1.0}

    def test_scores_stay_in_unit_interval(self):
        bundle = small_bundle(per_category=4)
        rng = np.random.default_rng(1)

        def noisy_fit(train):
            return lambda pid: rng.choice(["positive", "negative"])

        curve = learning_curve(noisy_fit, bundle, sizes=[16, 8], k=2)
        assert all(0.0 <= v <= 1.0 for v in curve.values())

    def test_subsets_are_nested(self):
        bundle = small_bundle(per_category=10)
        calls = []

        def recording_fit(train):
            calls.append(frozenset(ex.patent_id for ex in train))
            return lambda pid: "positive"

        k = 5
        learning_curve(recording_fit, bundle, sizes=[40, 20, 8], k=k)
        subsets = [
            frozenset().union(*calls[i * k : (i + 1) * k]) for i in range(3)
        ]
        assert subsets[2] <= subsets[1] <= subsets[0]
        assert [len(s) for s in subsets] == [40, 20, 8]

    def test_indivisible_size_rejected(self):
        with pytest.raises(PatentscapeError, match="divisible"):
            learning_curve(constant_fit("positive"), small_bundle(), sizes=[10])

    def test_oversized_request_rejected(self):
        with pytest.raises(PatentscapeError, match="needs"):
            learning_curve(constant_fit("positive"), small_bundle(4), sizes=[32])

    def test_csv_export(self):
        csv_text = curve_to_csv({24: 0.5, 400: 0.987654321, 100: 0.75})
        lines = csv_text.strip().splitlines()
        assert lines[0] == "size,overall"
        assert lines[1] == "400,0.987654"
        assert lines[3] == "24,0.500000"


class TestCohensKappa:
    def test_identical_raters(self):
        labels = {f"p{i}": ("positive" if i % 2 else "negative") for i in range(10)}
        assert cohens_kappa(labels, dict(labels)) == 1.0

    def test_reference_confusion_table(self):
        a, b = {}, {}
        idx = 0
        for count, (la, lb) in [
            (40, ("positive", "positive")),
            (10, ("positive", "negative")),
            (10, ("negative", "positive")),
            (40, ("negative", "negative")),
        ]:
            for _ in range(count):
                a[f"p{idx}"] = la
                b[f"p{idx}"] = lb
                idx += 1
        assert cohens_kappa(a, b) == pytest.approx(0.6)

    def test_constant_rater_scores_zero(self):
        a = {f"p{i}": "positive" for i in range(100)}
        b = {f"p{i}": ("positive" if i < 50 else "negative") for i in range(100)}
        assert cohens_kappa(a, b) == pytest.approx(0.0)

    def test_both_constant_same_class(self):
        a = {f"p{i}": "positive" for i in range(5)}
        assert cohens_kappa(a, dict(a)) == 1.0

    def test_disjoint_raters_rejected(self):
        with pytest.raises(PatentscapeError):
            cohens_kappa({"a": "positive"}, {"b": "positive"})

    def test_extra_items_ignored(self):
        a = {"p1": "positive", "p2": "negative", "extra": "positive"}
        b = {"p1": "positive", "p2": "negative"}
        assert cohens_kappa(a, b) == 1.0

    def test_symmetry_and_relabeling_on_random_tables(self):
        rng = np.random.default_rng(9)
        flip = {"positive": "negative", "negative": "positive"}
        for _ in range(100):
            n = int(rng.integers(2, 30))
            a_list = [str(rng.choice(["positive", "negative"])) for _ in range(n)]
            b_list = [str(rng.choice(["positive", "negative"])) for _ in range(n)]
            ids = [f"p{i}" for i in range(n)]
            a = dict(zip(ids, a_list))
            b = dict(zip(ids, b_list))
            k_ab = cohens_kappa(a, b)
            assert k_ab == pytest.approx(cohens_kappa(b, a))
            assert k_ab == pytest.approx(bf_cohens_kappa(a_list, b_list))
            relabeled = cohens_kappa(
                {i: flip[v] for i, v in a.items()}, {i: flip[v] for i, v in b.items()}
            )
            assert k_ab == pytest.approx(relabeled)
