"""Dataset bundles, stratified cross-validation, F1 reports, learning curves,
and inter-annotator agreement.

The labeled data splits into four categories (Hard+/Hard-/Easy+/Easy-);
the balanced set draws equally from all four, sized by the scarcest
(always Hard+), and everything else forms the holdout. Reports follow the
same shape everywhere: per-category F1 on the balanced folds, Hard/Easy
averages, their mean as Overall, and per-category recall on the holdout.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .corpus import CATEGORIES, LabeledExample
from .errors import PatentscapeError, TrainingError

DEFAULT_FOLDS = 5
DEFAULT_CURVE_SIZES = (400, 200, 100, 48, 24)

# fit(train examples) -> predict(patent_id) -> "positive" | "negative"
FitFunction = Callable[[Sequence[LabeledExample]], Callable[[str], str]]


def _by_category(labels: Iterable[LabeledExample]) -> dict[str, list[LabeledExample]]:
    out: dict[str, list[LabeledExample]] = {c: [] for c in CATEGORIES}
    for ex in labels:
        out[ex.category].append(ex)
    # canonical order first so downstream sampling ignores input order
    for items in out.values():
        items.sort(key=lambda ex: ex.patent_id)
    return out


@dataclass(frozen=True)
class DatasetBundle:
    """Balanced training set plus the unsampled remainder."""

    balanced: tuple[LabeledExample, ...]
    holdout: tuple[LabeledExample, ...]
    rng_seed: int

    def balanced_counts(self) -> dict[str, int]:
        return {c: len(items) for c, items in _by_category(self.balanced).items()}

    def holdout_counts(self) -> dict[str, int]:
        return {c: len(items) for c, items in _by_category(self.holdout).items()}

    def check(self) -> None:
        """Assert balance, disjointness, and Hard+ exhaustion."""
        balanced_ids = {ex.patent_id for ex in self.balanced}
        holdout_ids = {ex.patent_id for ex in self.holdout}
        assert not balanced_ids & holdout_ids, "balanced and holdout overlap"
        counts = self.balanced_counts()
        assert len(set(counts.values())) == 1, f"unbalanced: {counts}"
        assert self.holdout_counts()["Hard+"] == 0, "Hard+ not fully consumed"


def build_bundle(all_labels: Sequence[LabeledExample], rng_seed: int = 0) -> DatasetBundle:
    """Balanced set of size 4x|Hard+|: all of Hard+, the other three
    categories sampled uniformly without replacement; holdout is the rest.
    """
    groups = _by_category(all_labels)
    for category in CATEGORIES:
        if not groups[category]:
            raise PatentscapeError(f"category {category} is empty")
    quota = len(groups["Hard+"])
    short = {c: len(g) for c, g in groups.items() if len(g) < quota}
    if short:
        raise PatentscapeError(
            f"balanced set needs {quota} per category (the Hard+ count); "
            f"too small: {short}"
        )
    rng = np.random.default_rng(rng_seed)
    balanced: list[LabeledExample] = []
    holdout: list[LabeledExample] = []
    for category in CATEGORIES:
        items = groups[category]
        chosen = sorted(rng.choice(len(items), size=quota, replace=False).tolist())
        chosen_set = set(chosen)
        balanced.extend(items[i] for i in chosen)
        holdout.extend(items[i] for i in range(len(items)) if i not in chosen_set)
    return DatasetBundle(balanced=tuple(balanced), holdout=tuple(holdout), rng_seed=rng_seed)


def kfold(
    data: Sequence[LabeledExample], k: int = DEFAULT_FOLDS, rng_seed: int = 0
) -> list[tuple[list[LabeledExample], list[LabeledExample]]]:
    """Stratified k-fold splits: (train, test) pairs.

    Items are dealt round-robin per category after a seeded shuffle, so both
    the total fold sizes and every per-category count differ by at most one.
    Input order never matters: categories are canonicalized before shuffling.
    """
    if k < 2:
        raise PatentscapeError(f"k must be >= 2, got {k}")
    if k > len(data):
        raise PatentscapeError(f"k={k} exceeds dataset size {len(data)}")
    rng = np.random.default_rng(rng_seed)
    groups = _by_category(data)
    folds: list[list[LabeledExample]] = [[] for _ in range(k)]
    cursor = 0
    for category in CATEGORIES:
        items = groups[category]
        for i in rng.permutation(len(items)):
            folds[cursor % k].append(items[i])
            cursor += 1
    out = []
    for i in range(k):
        test = folds[i]
        train = [ex for j, fold in enumerate(folds) if j != i for ex in fold]
        out.append((train, test))
    return out


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def f1(tp: int, fp: int, fn: int) -> float:
    """2tp / (2tp + fp + fn); zero when the denominator is zero."""
    if min(tp, fp, fn) < 0:
        raise PatentscapeError("confusion counts must be nonnegative")
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def per_class_f1(
    preds: Mapping[str, str],
    golds: Mapping[str, str],
    subset: Iterable[str] | None = None,
) -> tuple[float, float]:
    """(positive-class F1, negative-class F1) over the given ids.

    The negative-class score is the same computation with polarity flipped.
    """
    ids = list(subset) if subset is not None else list(golds)
    scores = []
    for positive in ("positive", "negative"):
        tp = sum(1 for i in ids if golds[i] == positive and preds[i] == positive)
        fp = sum(1 for i in ids if golds[i] != positive and preds[i] == positive)
        fn = sum(1 for i in ids if golds[i] == positive and preds[i] != positive)
        scores.append(f1(tp, fp, fn))
    return scores[0], scores[1]


@dataclass(frozen=True)
class MetricsReport:
    """Fold-averaged scores in the four-category layout."""

    category_f1: dict[str, float]  # keyed by CATEGORIES
    holdout_recall: dict[str, float] = field(default_factory=dict)
    fold_count: int = DEFAULT_FOLDS

    @property
    def hard_avg(self) -> float:
        return (self.category_f1["Hard+"] + self.category_f1["Hard-"]) / 2

    @property
    def easy_avg(self) -> float:
        return (self.category_f1["Easy+"] + self.category_f1["Easy-"]) / 2

    @property
    def overall(self) -> float:
        return (self.hard_avg + self.easy_avg) / 2

    def to_dict(self) -> dict:
        return {
            "category_f1": dict(self.category_f1),
            "hard_avg": self.hard_avg,
            "easy_avg": self.easy_avg,
            "overall": self.overall,
            # recall, not F1: these holdout slices are single-class
            "holdout_recall": dict(self.holdout_recall),
            "fold_count": self.fold_count,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def format_reports_table(reports: Mapping[str, MetricsReport]) -> str:
    """Aligned text table, one row per model."""
    headers = ["Model", "Hard+", "Hard-", "Hard avg", "Easy+", "Easy-",
               "Easy avg", "Overall"]
    holdout_cats = sorted({c for r in reports.values() for c in r.holdout_recall})
    headers += [f"HO {c}" for c in holdout_cats]
    rows = []
    for name, r in reports.items():
        row = [
            name,
            f"{r.category_f1['Hard+']:.3f}",
            f"{r.category_f1['Hard-']:.3f}",
            f"{r.hard_avg:.3f}",
            f"{r.category_f1['Easy+']:.3f}",
            f"{r.category_f1['Easy-']:.3f}",
            f"{r.easy_avg:.3f}",
            f"{r.overall:.3f}",
        ]
        row += [
            f"{r.holdout_recall[c]:.3f}" if c in r.holdout_recall else "-"
            for c in holdout_cats
        ]
        rows.append(row)
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    def fmt(row):
        return "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
    lines = [fmt(headers), fmt(["-" * w for w in widths])]
    lines += [fmt(row) for row in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Cross-validated evaluation
# ---------------------------------------------------------------------------


def evaluate(
    fit: FitFunction,
    bundle: DatasetBundle,
    k: int = DEFAULT_FOLDS,
    include_holdout: bool = True,
) -> MetricsReport:
    """k-fold evaluation on the balanced set, plus holdout recall.

    Per fold: train on the balanced train split; positive/negative F1 within
    the Hard subset of the test split gives Hard+/Hard-, likewise Easy; the
    fold's model also classifies the holdout, scored as per-category recall
    (those slices are single-class, where F1 degenerates). All numbers are
    means across folds. A fold contributes to a category only when its test
    slice contains that category (tiny folds can miss one), so a perfect
    model scores 1.0 at every size.
    """
    splits = kfold(bundle.balanced, k=k, rng_seed=bundle.rng_seed)
    cat_scores: dict[str, list[float]] = {c: [] for c in CATEGORIES}
    holdout_groups = _by_category(bundle.holdout) if include_holdout else {}
    holdout_scores: dict[str, list[float]] = {
        c: [] for c, items in holdout_groups.items() if items
    }
    for fold_no, (train, test) in enumerate(splits):
        try:
            predict = fit(train)
        except TrainingError as e:
            raise TrainingError(f"fold {fold_no}: {e}") from e
        preds = {ex.patent_id: predict(ex.patent_id) for ex in test}
        golds = {ex.patent_id: ex.label for ex in test}
        for difficulty, plus, minus in (
            ("hard", "Hard+", "Hard-"),
            ("easy", "Easy+", "Easy-"),
        ):
            subset = [ex.patent_id for ex in test if ex.difficulty == difficulty]
            pos, neg = per_class_f1(preds, golds, subset)
            if any(golds[i] == "positive" for i in subset):
                cat_scores[plus].append(pos)
            if any(golds[i] == "negative" for i in subset):
                cat_scores[minus].append(neg)
        for category, items in holdout_groups.items():
            if not items:
                continue
            correct = sum(1 for ex in items if predict(ex.patent_id) == ex.label)
            holdout_scores[category].append(correct / len(items))
    empty = [c for c, s in cat_scores.items() if not s]
    if empty:
        # unreachable for valid bundles (folds partition the balanced set)
        raise PatentscapeError(f"categories never reached a test fold: {empty}")
    return MetricsReport(
        category_f1={c: float(np.mean(s)) for c, s in cat_scores.items()},
        holdout_recall={c: float(np.mean(s)) for c, s in holdout_scores.items()},
        fold_count=k,
    )


def learning_curve(
    fit: FitFunction,
    bundle: DatasetBundle,
    sizes: Sequence[int] = DEFAULT_CURVE_SIZES,
    rng_seed: int | None = None,
    k: int = DEFAULT_FOLDS,
) -> dict[int, float]:
    """Overall score at each balanced-subset size.

    Subsets draw size/4 items per category and are nested (every smaller
    subset is contained in every larger one) to keep the curve stable.
    Holdout scoring is skipped; Overall only needs the balanced folds.
    """
    rng = np.random.default_rng(bundle.rng_seed if rng_seed is None else rng_seed)
    groups = _by_category(bundle.balanced)
    order = {c: rng.permutation(len(groups[c])).tolist() for c in CATEGORIES}
    out: dict[int, float] = {}
    for size in sizes:
        if size % 4 != 0:
            raise PatentscapeError(f"size {size} is not divisible by 4")
        per_cat = size // 4
        if any(per_cat > len(groups[c]) for c in CATEGORIES):
            have = {c: len(items) for c, items in groups.items()}
            raise PatentscapeError(
                f"size {size} needs {per_cat} per category; have {have}"
            )
        subset = [
            groups[c][i] for c in CATEGORIES for i in order[c][:per_cat]
        ]
        sub_bundle = DatasetBundle(
            balanced=tuple(subset), holdout=(), rng_seed=bundle.rng_seed
        )
        out[size] = evaluate(fit, sub_bundle, k=k, include_holdout=False).overall
    return out


def curve_to_csv(curve: Mapping[int, float]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["size", "overall"])
    for size in sorted(curve, reverse=True):
        writer.writerow([size, f"{curve[size]:.6f}"])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Inter-annotator agreement
# ---------------------------------------------------------------------------


def cohens_kappa(labels_a: Mapping[str, str], labels_b: Mapping[str, str]) -> float:
    """Cohen's kappa over the items both raters labeled.

    kappa = (p_o - p_e) / (1 - p_e); when chance agreement p_e is 1 both
    raters were constant on the same class, so agreement is perfect and the
    result is 1.0.
    """
    items = sorted(set(labels_a) & set(labels_b))
    if not items:
        raise PatentscapeError("raters share no items")
    n = len(items)
    p_o = sum(1 for i in items if labels_a[i] == labels_b[i]) / n
    classes = {labels_a[i] for i in items} | {labels_b[i] for i in items}
    p_e = sum(
        (sum(1 for i in items if labels_a[i] == c) / n)
        * (sum(1 for i in items if labels_b[i] == c) / n)
        for c in classes
    )
    if p_e >= 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)
