"""Accuracy metrics, error breakdowns, significance, and curve tables.

Exact-match accuracy is parameterized by a feature subset: the core POS tag
alone, the full schema (ALL TAGS), the cross-dialect 10-feature set
(ALL TAGS 10), or the variant-specific comparison set (ALL TAGS*).  A token
counts as correct only when prediction and gold agree on every feature in the
subset after default filling.  Paired system comparisons use McNemar's test,
exact below a configurable discordant-pair threshold and continuity-corrected
chi-squared above it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import Corpus, oov_vocabulary
from .errors import (
    AlignmentError,
    InconsistentMetric,
    LengthMismatch,
    UnknownFeature,
)
from .schema import FeatureSchema, serialize_unfactored

TEN_FEATURE_SET = (
    "pos", "per", "gen", "num", "asp", "prc3", "prc2", "prc1", "prc0", "enc0",
)

CHI2_CRITICAL_1DF = 3.841
SLICES = ("all", "oov")


@dataclass(frozen=True)
class EvalReport:
    metric_name: str
    feature_subset: tuple[str, ...]
    total_tokens: int
    correct_tokens: int
    accuracy: float
    slice: str = "all"
    # per-token outcomes in corpus order, for paired significance tests;
    # deliberately excluded from serialized records
    token_correct: tuple[bool, ...] | None = field(default=None, compare=False)

    def to_record(self) -> dict:
        return {
            "metric": self.metric_name,
            "subset": list(self.feature_subset),
            "slice": self.slice,
            "total": self.total_tokens,
            "correct": self.correct_tokens,
            "accuracy": self.accuracy,
        }


def resolve_subset(
    spec: str | Sequence[str], schema: FeatureSchema
) -> tuple[str, tuple[str, ...]]:
    """Map a subset name (pos, all, all10, all-star:<variant>) or an explicit
    feature list to (metric name, ordered feature tuple)."""
    if not isinstance(spec, str):
        features = tuple(spec)
        for name in features:
            schema.feature(name)
        return "CUSTOM", features
    names = schema.feature_names()
    if spec == "pos":
        if "pos" not in names:
            raise UnknownFeature(f"schema {schema.variant!r} has no pos feature")
        return "POS", ("pos",)
    if spec == "all":
        return "ALL TAGS", names
    if spec == "all10":
        missing = [f for f in TEN_FEATURE_SET if f not in names]
        if missing:
            raise UnknownFeature(
                f"schema {schema.variant!r} lacks {missing} for ALL TAGS 10"
            )
        return "ALL TAGS 10", tuple(f for f in names if f in TEN_FEATURE_SET)
    if spec.startswith("all-star:"):
        variant = spec.split(":", 1)[1]
        if variant == "glf":
            missing = [f for f in TEN_FEATURE_SET if f not in names]
            if missing:
                raise UnknownFeature(
                    f"schema {schema.variant!r} lacks {missing} for glf ALL TAGS*"
                )
            return "ALL TAGS*", tuple(f for f in names if f in TEN_FEATURE_SET)
        return "ALL TAGS*", tuple(f for f in names if f not in ("enc1", "enc2"))
    raise UnknownFeature(f"unknown feature subset {spec!r}")


def _aligned_tokens(pred: Corpus, gold: Corpus):
    if len(pred.sentences) != len(gold.sentences):
        raise AlignmentError(
            f"{len(pred.sentences)} predicted sentences vs {len(gold.sentences)} gold"
        )
    for ps, gs in zip(pred.sentences, gold.sentences):
        if ps.id != gs.id:
            raise AlignmentError(f"sentence id {ps.id!r} != gold {gs.id!r}")
        if len(ps.tokens) != len(gs.tokens):
            raise AlignmentError(
                f"sentence {ps.id!r}: {len(ps.tokens)} tokens vs {len(gs.tokens)} gold"
            )
        for pt, gt in zip(ps.tokens, gs.tokens):
            if pt.raw != gt.raw:
                raise AlignmentError(
                    f"sentence {ps.id!r}: form {pt.raw!r} != gold {gt.raw!r}"
                )
            yield pt, gt


def accuracy(
    pred: Corpus,
    gold: Corpus,
    schema: FeatureSchema,
    subset: str | Sequence[str] = "all",
    slice: str = "all",
    train_ref: Corpus | None = None,
) -> EvalReport:
    """Exact-match accuracy over the subset, on all tokens or the OOV slice."""
    if slice not in SLICES:
        raise ValueError(f"unknown slice {slice!r}; expected one of {SLICES}")
    metric_name, features = resolve_subset(subset, schema)
    oov: set[str] | None = None
    if slice == "oov":
        if train_ref is None:
            raise ValueError("the oov slice needs a train_ref corpus")
        oov = oov_vocabulary(train_ref, gold)
    total = 0
    correct = 0
    outcomes: list[bool] = []
    for pt, gt in _aligned_tokens(pred, gold):
        if oov is not None and pt.raw not in oov:
            continue
        pb = pt.analysis.filled(schema)
        gb = gt.analysis.filled(schema)
        ok = all(pb[name] == gb[name] for name in features)
        total += 1
        correct += ok
        outcomes.append(ok)
    return EvalReport(
        metric_name=metric_name,
        feature_subset=features,
        total_tokens=total,
        correct_tokens=correct,
        accuracy=correct / total if total else 0.0,
        slice=slice,
        token_correct=tuple(outcomes),
    )


def unseen_tag_rate(
    eval_corpus: Corpus, train: Corpus, schema: FeatureSchema
) -> float:
    """Fraction of eval tokens whose gold unfactored tag never occurs in train."""
    seen = {
        serialize_unfactored(t.analysis.features, schema) for t in train.iter_tokens()
    }
    total = 0
    unseen = 0
    for token in eval_corpus.iter_tokens():
        total += 1
        unseen += serialize_unfactored(token.analysis.features, schema) not in seen
    return unseen / total if total else 0.0


def load_pos_categories(path: str | Path | None = None) -> dict[str, str]:
    """pos value -> category name; unlisted values report as 'other'."""
    if path is None:
        text = (
            resources.files("morphdis.data")
            .joinpath("pos_categories.json")
            .read_text(encoding="utf-8")
        )
    else:
        text = Path(path).read_text(encoding="utf-8")
    doc = json.loads(text)
    mapping: dict[str, str] = {}
    for category, members in doc["categories"].items():
        for pos in members:
            mapping[pos] = category
    return mapping


@dataclass(frozen=True)
class ErrorStats:
    feature_subset: tuple[str, ...]
    per_feature_error_counts: Mapping[str, int]
    total_error_tokens: int
    mean_failures_per_error: float
    pos_confusion: Mapping[tuple[str, str], int]

    def percentages(self) -> dict[str, float]:
        if not self.total_error_tokens:
            return {name: 0.0 for name in self.per_feature_error_counts}
        return {
            name: 100.0 * count / self.total_error_tokens
            for name, count in self.per_feature_error_counts.items()
        }

    def to_record(self) -> dict:
        confusion: dict[str, dict[str, int]] = {}
        for (gold_cat, pred_cat), count in sorted(self.pos_confusion.items()):
            confusion.setdefault(gold_cat, {})[pred_cat] = count
        return {
            "subset": list(self.feature_subset),
            "error_tokens": self.total_error_tokens,
            "per_feature_errors": dict(self.per_feature_error_counts),
            "per_feature_error_pct": self.percentages(),
            "mean_failures_per_error": self.mean_failures_per_error,
            "pos_confusion": confusion,
        }


def feature_error_stats(
    pred: Corpus,
    gold: Corpus,
    schema: FeatureSchema,
    subset: str | Sequence[str] = "all",
    pos_categories: Mapping[str, str] | None = None,
) -> ErrorStats:
    """Which features fail, how many at once, and POS confusion by category,
    restricted to tokens wrong under the subset."""
    _, features = resolve_subset(subset, schema)
    if pos_categories is None:
        pos_categories = load_pos_categories()
    counts = {name: 0 for name in features}
    confusion: dict[tuple[str, str], int] = {}
    error_tokens = 0
    for pt, gt in _aligned_tokens(pred, gold):
        pb = pt.analysis.filled(schema)
        gb = gt.analysis.filled(schema)
        wrong = [name for name in features if pb[name] != gb[name]]
        if not wrong:
            continue
        error_tokens += 1
        for name in wrong:
            counts[name] += 1
        if "pos" in wrong:
            key = (
                pos_categories.get(gb["pos"], "other"),
                pos_categories.get(pb["pos"], "other"),
            )
            confusion[key] = confusion.get(key, 0) + 1
    failures = sum(counts.values())
    return ErrorStats(
        feature_subset=features,
        per_feature_error_counts=counts,
        total_error_tokens=error_tokens,
        mean_failures_per_error=failures / error_tokens if error_tokens else 0.0,
        pos_confusion=confusion,
    )


def mcnemar(
    correct_a: Sequence[bool],
    correct_b: Sequence[bool],
    alpha: float = 0.05,
    exact_threshold: int = 25,
) -> dict:
    """Paired significance of two systems' per-token outcomes.

    b counts tokens only system A got right, c tokens only system B got
    right.  Below the threshold on b+c the exact two-sided binomial is used;
    above it the continuity-corrected chi-squared statistic with one degree
    of freedom.
    """
    if len(correct_a) != len(correct_b):
        raise LengthMismatch(
            f"paired outcome lengths differ: {len(correct_a)} vs {len(correct_b)}"
        )
    b = sum(1 for x, y in zip(correct_a, correct_b) if x and not y)
    c = sum(1 for x, y in zip(correct_a, correct_b) if y and not x)
    n = b + c
    result = {"b": b, "c": c, "alpha": alpha}
    if n == 0:
        result.update(method="exact", statistic=None, p_value=1.0, significant=False)
        return result
    if n < exact_threshold:
        tail = sum(math.comb(n, k) for k in range(min(b, c) + 1))
        p = min(1.0, 2.0 * tail / 2.0**n)
        result.update(method="exact", statistic=None, p_value=p)
    else:
        statistic = (abs(b - c) - 1.0) ** 2 / n
        p = math.erfc(math.sqrt(statistic / 2.0))
        result.update(
            method="asymptotic",
            statistic=statistic,
            critical=CHI2_CRITICAL_1DF,
            p_value=p,
        )
    result["significant"] = result["p_value"] < alpha
    return result


@dataclass(frozen=True)
class LearningCurveTable:
    metric_name: str
    slice: str
    sizes: tuple
    systems: tuple[str, ...]
    accuracies: Mapping[tuple, float]
    best: frozenset
    indistinguishable_from_best: frozenset
    p_values: Mapping[tuple, float]

    def to_records(self) -> list[dict]:
        records = []
        for size in self.sizes:
            for system in self.systems:
                key = (size, system)
                if key not in self.accuracies:
                    continue
                records.append(
                    {
                        "metric": self.metric_name,
                        "slice": self.slice,
                        "size": size,
                        "system": system,
                        "accuracy": self.accuracies[key],
                        "best": key in self.best,
                        "indistinguishable_from_best": key
                        in self.indistinguishable_from_best,
                        "p_vs_best": self.p_values.get(key),
                    }
                )
        return records

    def render_text(self) -> str:
        def cell(size, system) -> str:
            key = (size, system)
            if key not in self.accuracies:
                return "-"
            text = f"{100.0 * self.accuracies[key]:.2f}"
            if key in self.best:
                text += "*"
            elif key in self.indistinguishable_from_best:
                text += "~"
            return text

        header = ["size"] + list(self.systems)
        rows = [[str(size)] + [cell(size, s) for s in self.systems] for size in self.sizes]
        widths = [
            max(len(r[i]) for r in [header] + rows) for i in range(len(header))
        ]
        lines = [
            "  ".join(text.rjust(widths[i]) for i, text in enumerate(row))
            for row in [header] + rows
        ]
        legend = f"metric: {self.metric_name} ({self.slice});  * best  ~ not significantly below best"
        return "\n".join(lines + [legend])


def learning_curve_report(
    results: Mapping[tuple, EvalReport], alpha: float = 0.05
) -> LearningCurveTable:
    """Sizes-by-systems accuracy table with best and same-as-best flags.

    Keys are (size, system) pairs.  Cells carrying per-token outcomes are
    McNemar-tested against the first best cell; a non-best cell whose p-value
    is at or above alpha is flagged statistically indistinguishable.
    """
    if not results:
        raise InconsistentMetric("no results to tabulate")
    reports = list(results.values())
    metric = reports[0].metric_name
    slice_name = reports[0].slice
    for r in reports:
        if r.metric_name != metric or r.slice != slice_name:
            raise InconsistentMetric(
                f"mixed cells: {metric}/{slice_name} vs {r.metric_name}/{r.slice}"
            )
    size_values = {k[0] for k in results}
    try:
        sizes = tuple(sorted(size_values))
    except TypeError:
        sizes = tuple(sorted(size_values, key=str))
    size_order = {size: i for i, size in enumerate(sizes)}
    systems = tuple(sorted({k[1] for k in results}))
    keys = sorted(results, key=lambda k: (size_order[k[0]], str(k[1])))
    accuracies = {k: results[k].accuracy for k in keys}
    top = max(accuracies.values())
    best = frozenset(k for k, a in accuracies.items() if a == top)
    reference = min(best, key=lambda k: (size_order[k[0]], str(k[1])))
    ref_outcomes = results[reference].token_correct
    indistinguishable = set()
    p_values: dict[tuple, float] = {}
    for key in keys:
        if key in best:
            continue
        outcomes = results[key].token_correct
        if (
            ref_outcomes is None
            or outcomes is None
            or len(outcomes) != len(ref_outcomes)
        ):
            continue
        test = mcnemar(ref_outcomes, outcomes, alpha=alpha)
        p_values[key] = test["p_value"]
        if not test["significant"]:
            indistinguishable.add(key)
    return LearningCurveTable(
        metric_name=metric,
        slice=slice_name,
        sizes=sizes,
        systems=systems,
        accuracies=accuracies,
        best=best,
        indistinguishable_from_best=frozenset(indistinguishable),
        p_values=p_values,
    )
