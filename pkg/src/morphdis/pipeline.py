"""Experiment orchestration: train, optionally retag, evaluate, on a size grid.

A run folds the whole toolkit together.  Training corpora are sampled as
nested token-budget prefixes, the tagger's epoch is picked on TUNE (ties go
to the earliest epoch), predictions are optionally constrained by an
analyzer, and DEV/TEST are scored under every resolvable metric subset plus
the OOV slice.  MERGED and CONTINUED move everything into the harmonized
reduced schema first, mirroring the cross-variant training setups.

Run directories are append-only: each call creates a fresh timestamped
directory, while the files inside carry no timestamps so reruns of the same
spec produce byte-identical artifacts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Mapping, Sequence

from .analyzer import AnalyzerDB, canonical_analysis_key, load_db
from .corpus import (
    AnnotatedToken,
    Corpus,
    Sentence,
    read_corpus,
    sample_learning_curve,
    write_corpus,
)
from .disambiguator import UnigramModel, build_unigrams, disambiguate_corpus
from .errors import UnknownFeature
from .evaluation import (
    ErrorStats,
    EvalReport,
    LearningCurveTable,
    accuracy,
    feature_error_stats,
    learning_curve_report,
    resolve_subset,
    unseen_tag_rate,
)
from .harmonizer import Harmonizer, load_harmonization_config
from .schema import FeatureSchema, resolve_schema
from .tagger import (
    FACTORED,
    SentenceDistributions,
    TaggerModel,
    TrainConfig,
    UNFACTORED,
    distributions_for_corpus,
    load_external_distributions,
    save_model,
    train,
)
from .corpus import Analysis

SINGLE = "SINGLE"
MERGED = "MERGED"
CONTINUED = "CONTINUED"
STRATEGIES = (SINGLE, MERGED, CONTINUED)


@dataclass(frozen=True)
class ExperimentPaths:
    train: str | Path
    tune: str | Path
    dev: str | Path
    test: str | Path
    analyzer: str | Path | None = None
    # split name (TUNE/DEV/TEST) -> interchange file from an external tagger
    external_distributions: Mapping[str, str | Path] = field(default_factory=dict)
    # (variant, corpus path) pairs for MERGED / CONTINUED
    high_resource: tuple[tuple[str, str | Path], ...] = ()


@dataclass(frozen=True)
class ExperimentSpec:
    paths: ExperimentPaths
    variant: str = "lev"
    kind: str = FACTORED
    use_analyzer: bool = False
    sizes: tuple[int, ...] = (500,)
    strategy: str = SINGLE
    seed: int = 12345
    epochs: int = 10
    tie_break_source: str = "unigram"

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.kind not in (FACTORED, UNFACTORED):
            raise ValueError(f"unknown tagger kind {self.kind!r}")
        if not self.sizes or any(s <= 0 for s in self.sizes):
            raise ValueError("sizes must be positive token budgets")
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ValueError("sizes must be strictly increasing")
        if self.epochs <= 0:
            raise ValueError("epochs must be positive")
        if self.use_analyzer and self.paths.analyzer is None:
            raise ValueError("use_analyzer requires paths.analyzer")
        if not self.use_analyzer and self.paths.analyzer is not None:
            raise ValueError("paths.analyzer set but use_analyzer is false")
        if self.strategy in (MERGED, CONTINUED) and not self.paths.high_resource:
            raise ValueError(f"{self.strategy} requires high-resource corpora")
        external = self.paths.external_distributions
        if external:
            keys = {k.upper() for k in external}
            if not keys <= {"TUNE", "DEV", "TEST"}:
                raise ValueError(f"unknown external distribution splits {sorted(keys)}")
            if not {"DEV", "TEST"} <= keys:
                raise ValueError("external distributions need DEV and TEST entries")

    def to_document(self) -> dict:
        return {
            "variant": self.variant,
            "kind": self.kind,
            "use_analyzer": self.use_analyzer,
            "sizes": list(self.sizes),
            "strategy": self.strategy,
            "seed": self.seed,
            "epochs": self.epochs,
            "tie_break_source": self.tie_break_source,
            "paths": {
                "train": str(self.paths.train),
                "tune": str(self.paths.tune),
                "dev": str(self.paths.dev),
                "test": str(self.paths.test),
                "analyzer": None
                if self.paths.analyzer is None
                else str(self.paths.analyzer),
                "external_distributions": {
                    k.upper(): str(v)
                    for k, v in sorted(self.paths.external_distributions.items())
                },
                "high_resource": [
                    [variant, str(path)] for variant, path in self.paths.high_resource
                ],
            },
        }


def spec_from_document(document: Mapping) -> ExperimentSpec:
    """Inverse of :meth:`ExperimentSpec.to_document`, with spec defaults."""
    paths_doc = document.get("paths")
    if not isinstance(paths_doc, Mapping):
        raise ValueError("experiment document needs a 'paths' object")
    missing = [k for k in ("train", "tune", "dev", "test") if not paths_doc.get(k)]
    if missing:
        raise ValueError(f"experiment paths missing {missing}")
    paths = ExperimentPaths(
        train=paths_doc["train"],
        tune=paths_doc["tune"],
        dev=paths_doc["dev"],
        test=paths_doc["test"],
        analyzer=paths_doc.get("analyzer"),
        external_distributions=dict(paths_doc.get("external_distributions", {})),
        high_resource=tuple(
            (variant, path) for variant, path in paths_doc.get("high_resource", [])
        ),
    )
    return ExperimentSpec(
        paths=paths,
        variant=document.get("variant", "lev"),
        kind=document.get("kind", FACTORED),
        use_analyzer=bool(document.get("use_analyzer", False)),
        sizes=tuple(document.get("sizes", [500])),
        strategy=document.get("strategy", SINGLE),
        seed=int(document.get("seed", 12345)),
        epochs=int(document.get("epochs", 10)),
        tie_break_source=document.get("tie_break_source", "unigram"),
    )


@dataclass(frozen=True)
class SizeResult:
    size: int
    reports: tuple[EvalReport, ...]
    error_stats: ErrorStats
    disambiguation: Mapping[str, Mapping] | None
    unseen_rates: Mapping[str, float]
    artifacts: Mapping[str, str]


@dataclass(frozen=True)
class ExperimentResult:
    run_dir: Path
    spec: ExperimentSpec
    sizes: tuple[SizeResult, ...]
    curve: LearningCurveTable

    def dev_report(self, size: int, metric: str = "ALL TAGS") -> EvalReport:
        for result in self.sizes:
            if result.size != size:
                continue
            for report in result.reports:
                if report.metric_name == metric and report.slice == "all":
                    return report
        raise KeyError(f"no DEV report for size {size} metric {metric!r}")


def _write_json(path: Path, document) -> None:
    path.write_text(
        json.dumps(document, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def _new_run_dir(out_dir: str | Path) -> Path:
    base = Path(out_dir)
    base.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now().strftime("%Y%m%dT%H%M%S")
    candidate = base / f"run-{stamp}"
    counter = 1
    while candidate.exists():
        counter += 1
        candidate = base / f"run-{stamp}-{counter}"
    candidate.mkdir()
    return candidate


def _select_epoch(
    model: TaggerModel, tune: Corpus, schema: FeatureSchema
) -> TaggerModel:
    """Checkpoint with the best TUNE exact-match accuracy; ties -> earliest."""
    best_index = 0
    best_accuracy = -1.0
    for index in range(len(model.checkpoints)):
        candidate = model.at_epoch(index)
        predicted = _argmax_corpus(tune, distributions_for_corpus(candidate, tune), schema)
        score = accuracy(predicted, tune, schema, subset="all").accuracy
        if score > best_accuracy:
            best_index = index
            best_accuracy = score
    selected = model.at_epoch(best_index)
    meta = dict(selected.meta, tune_accuracy=best_accuracy)
    return replace(selected, meta=meta)


def _argmax_corpus(
    gold: Corpus, dists: Sequence[SentenceDistributions], schema: FeatureSchema
) -> Corpus:
    sentences = []
    for sentence, sd in zip(gold.sentences, dists):
        tokens = tuple(
            AnnotatedToken(
                raw=token.raw,
                analysis=Analysis(
                    features=dist.argmax_bundle(schema), lex=token.raw, diac=token.raw
                ),
            )
            for token, dist in zip(sentence.tokens, sd.distributions)
        )
        sentences.append(
            Sentence(id=sentence.id, tokens=tokens, provenance=sentence.provenance)
        )
    return Corpus(schema_ref=gold.schema_ref, sentences=tuple(sentences), split=gold.split)


def _harmonize_db(
    db: AnalyzerDB, harmonizer: Harmonizer, source_variant: str
) -> AnalyzerDB:
    schema = harmonizer.target_schema
    entries = {}
    for form, analyses in db.entries.items():
        seen: set[str] = set()
        kept = []
        for analysis in analyses:
            mapped = harmonizer.harmonize_analysis(analysis, source_variant)
            key = canonical_analysis_key(mapped, schema)
            if key in seen:
                continue
            seen.add(key)
            kept.append(mapped)
        kept.sort(key=lambda a: canonical_analysis_key(a, schema))
        entries[form] = tuple(kept)
    return AnalyzerDB(
        schema_ref=schema.variant,
        entries=entries,
        backoff=db.backoff,
        provenance=db.provenance,
    )


def _evaluate_split(
    pred: Corpus,
    gold: Corpus,
    schema: FeatureSchema,
    variant: str,
    train_ref: Corpus,
) -> list[EvalReport]:
    reports = []
    for name in ("pos", "all", "all10", f"all-star:{variant}"):
        try:
            reports.append(accuracy(pred, gold, schema, subset=name))
        except UnknownFeature:
            continue
    reports.append(
        accuracy(pred, gold, schema, subset="all", slice="oov", train_ref=train_ref)
    )
    return reports


def _retag(
    gold: Corpus,
    dists: Sequence[SentenceDistributions],
    db: AnalyzerDB | None,
    unigrams: UnigramModel | None,
    schema: FeatureSchema,
    tie_break_source: str,
) -> tuple[Corpus, Mapping | None]:
    if db is None:
        return _argmax_corpus(gold, dists, schema), None
    result = disambiguate_corpus(
        gold, dists, db, unigrams, schema, tie_break_source=tie_break_source
    )
    return result.corpus, dict(result.stats)


def run_experiment(spec: ExperimentSpec, out_dir: str | Path) -> ExperimentResult:
    schema = resolve_schema(spec.variant)
    train_corpus = read_corpus(spec.paths.train, schema, "TRAIN")
    tune_corpus = read_corpus(spec.paths.tune, schema, "TUNE")
    dev_corpus = read_corpus(spec.paths.dev, schema, "DEV")
    test_corpus = read_corpus(spec.paths.test, schema, "TEST")
    db = load_db(spec.paths.analyzer) if spec.use_analyzer else None
    samples = sample_learning_curve(train_corpus, list(spec.sizes), spec.seed)

    run_dir = _new_run_dir(out_dir)
    _write_json(run_dir / "spec.json", spec.to_document())

    harmonizer: Harmonizer | None = None
    eval_schema = schema
    if spec.strategy in (MERGED, CONTINUED):
        config = replace(load_harmonization_config(), target_variant=spec.variant)
        harmonizer = Harmonizer(config)
        eval_schema = harmonizer.target_schema
        highs = [
            (read_corpus(path, resolve_schema(variant), "TRAIN"), variant)
            for variant, path in spec.paths.high_resource
        ]
        tune_corpus = harmonizer.harmonize_corpus(tune_corpus, spec.variant)
        dev_corpus = harmonizer.harmonize_corpus(dev_corpus, spec.variant)
        test_corpus = harmonizer.harmonize_corpus(test_corpus, spec.variant)
        if db is not None:
            db = _harmonize_db(db, harmonizer, spec.variant)

    stage1_model: TaggerModel | None = None
    if spec.strategy == CONTINUED:
        if len(highs) == 1:
            stage1_corpus = harmonizer.harmonize_corpus(highs[0][0], highs[0][1])
        else:
            stage1_corpus = harmonizer.build_merged(highs, seed=spec.seed)
        stage1_full = train(
            stage1_corpus,
            eval_schema,
            spec.kind,
            TrainConfig(epochs=spec.epochs, seed=spec.seed),
        )
        stage1_model = _select_epoch(stage1_full, tune_corpus, eval_schema)
        save_model(stage1_model, run_dir / "stage1-model.json")

    external = {
        k.upper(): Path(v) for k, v in spec.paths.external_distributions.items()
    }

    size_results = []
    curve_inputs: dict[tuple, EvalReport] = {}
    for size, sample in zip(spec.sizes, samples):
        size_dir = run_dir / f"size-{size}"
        size_dir.mkdir()
        artifacts: dict[str, str] = {}

        if spec.strategy == SINGLE:
            fit_corpus = sample
            init = None
        elif spec.strategy == MERGED:
            fit_corpus = harmonizer.build_merged(
                highs + [(sample, spec.variant)], seed=spec.seed
            )
            init = None
        else:
            fit_corpus = harmonizer.harmonize_corpus(sample, spec.variant)
            init = stage1_model

        if external:
            model = None
            dev_dists = load_external_distributions(
                external["DEV"], eval_schema, dev_corpus
            )
            test_dists = load_external_distributions(
                external["TEST"], eval_schema, test_corpus
            )
        else:
            full = train(
                fit_corpus,
                eval_schema,
                spec.kind,
                TrainConfig(epochs=spec.epochs, seed=spec.seed, init=init),
            )
            model = _select_epoch(full, tune_corpus, eval_schema)
            if spec.strategy == CONTINUED:
                model = replace(
                    model, meta=dict(model.meta, init_artifact="../stage1-model.json")
                )
            save_model(model, size_dir / "model.json")
            artifacts["model"] = "model.json"
            dev_dists = distributions_for_corpus(model, dev_corpus)
            test_dists = distributions_for_corpus(model, test_corpus)

        unigrams = build_unigrams(fit_corpus, eval_schema) if db is not None else None
        dev_pred, dev_stats = _retag(
            dev_corpus, dev_dists, db, unigrams, eval_schema, spec.tie_break_source
        )
        test_pred, test_stats = _retag(
            test_corpus, test_dists, db, unigrams, eval_schema, spec.tie_break_source
        )
        write_corpus(dev_pred, size_dir / "predictions-dev.jsonl")
        write_corpus(test_pred, size_dir / "predictions-test.jsonl")
        artifacts["predictions-dev"] = "predictions-dev.jsonl"
        artifacts["predictions-test"] = "predictions-test.jsonl"

        dev_reports = _evaluate_split(
            dev_pred, dev_corpus, eval_schema, spec.variant, fit_corpus
        )
        test_reports = _evaluate_split(
            test_pred, test_corpus, eval_schema, spec.variant, fit_corpus
        )
        errors = feature_error_stats(dev_pred, dev_corpus, eval_schema, subset="all")
        unseen = {
            "dev": unseen_tag_rate(dev_corpus, fit_corpus, eval_schema),
            "test": unseen_tag_rate(test_corpus, fit_corpus, eval_schema),
        }
        disambiguation = (
            None if db is None else {"dev": dev_stats, "test": test_stats}
        )
        document = {
            "size": size,
            "strategy": spec.strategy,
            "kind": spec.kind,
            "variant": spec.variant,
            "schema": eval_schema.variant,
            "reports": [
                {**r.to_record(), "split": split}
                for split, group in (("DEV", dev_reports), ("TEST", test_reports))
                for r in group
            ],
            "unseen_tag_rate": unseen,
            "error_stats": errors.to_record(),
            "disambiguation": disambiguation,
            "artifacts": artifacts,
        }
        _write_json(size_dir / "reports.json", document)
        artifacts["reports"] = "reports.json"

        all_tags_dev = next(
            r for r in dev_reports if r.metric_name == "ALL TAGS" and r.slice == "all"
        )
        curve_inputs[(size, spec.kind)] = all_tags_dev
        size_results.append(
            SizeResult(
                size=size,
                reports=tuple(dev_reports + test_reports),
                error_stats=errors,
                disambiguation=disambiguation,
                unseen_rates=unseen,
                artifacts=artifacts,
            )
        )

    curve = learning_curve_report(curve_inputs)
    _write_json(run_dir / "curve.json", curve.to_records())
    (run_dir / "curve.txt").write_text(curve.render_text() + "\n", encoding="utf-8")
    return ExperimentResult(
        run_dir=run_dir, spec=spec, sizes=tuple(size_results), curve=curve
    )
