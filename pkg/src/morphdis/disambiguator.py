"""In-context retagging: pick one analyzer candidate per token.

Candidates from the analyzer are ranked by the unweighted count of features
on which they agree with the taggers' argmax bundle.  Ties break on
½·P(t_unfactored) + ½·∏_m P(t_m), probabilities from unigram models over the
training split, and finally on the canonical serialization of the analysis so
the full order is deterministic.  Tokens without analyzer coverage keep the
taggers' bundle (optionally flagged as synthesized backoff).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .analyzer import AnalyzerDB, BackoffMode, analyze, canonical_analysis_key
from .corpus import Analysis, AnnotatedToken, Corpus, Sentence
from .errors import (
    AlignmentError,
    EmptyCandidates,
    EmptyCorpus,
    FormatError,
    SchemaMismatch,
    VersionError,
)
from .schema import FeatureSchema, serialize_unfactored
from .tagger import FeatureDistribution, SentenceDistributions

UNIGRAM_FORMAT_VERSION = "1"

# Floor for the optional classifier-probability tie-break, which has no
# smoothing of its own.
CLASSIFIER_PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class UnigramModel:
    """Train-split tag frequencies with additive smoothing.

    The smoothed probability of value v in a closed space of size V_space is
    (count(v) + eps*N) / (N + eps*N*V_space), N the total token count: the
    epsilon parameter is itself the approximate probability floor of unseen
    values, independent of corpus size.  The unfactored space is the observed
    tag inventory, matching the unfactored classifier's label space.
    """

    variant: str
    total_tokens: int
    unfactored_counts: Mapping[str, int]
    per_feature_counts: Mapping[str, Mapping[str, int]]
    feature_spaces: Mapping[str, int]
    unfactored_space: int
    smoothing_epsilon: float = 1e-6

    def _smoothed(self, count: int, space: int) -> float:
        n = self.total_tokens
        eps = self.smoothing_epsilon
        return (count + eps * n) / (n + eps * n * space)

    def p_unfactored(self, tag: str) -> float:
        return self._smoothed(self.unfactored_counts.get(tag, 0), self.unfactored_space)

    def p_feature(self, feature: str, value: str) -> float:
        counts = self.per_feature_counts.get(feature, {})
        return self._smoothed(counts.get(value, 0), self.feature_spaces[feature])


def build_unigrams(
    train: Corpus, schema: FeatureSchema, smoothing_epsilon: float = 1e-6
) -> UnigramModel:
    if train.token_count() == 0:
        raise EmptyCorpus("cannot build unigram models from an empty corpus")
    unfactored: dict[str, int] = {}
    per_feature: dict[str, dict[str, int]] = {f.name: {} for f in schema.features}
    total = 0
    for token in train.iter_tokens():
        filled = token.analysis.filled(schema)
        tag = serialize_unfactored(filled, schema)
        unfactored[tag] = unfactored.get(tag, 0) + 1
        for name, value in filled.items():
            row = per_feature[name]
            row[value] = row.get(value, 0) + 1
        total += 1
    return UnigramModel(
        variant=schema.variant,
        total_tokens=total,
        unfactored_counts=unfactored,
        per_feature_counts=per_feature,
        feature_spaces={f.name: f.cardinality for f in schema.features},
        unfactored_space=len(unfactored),
        smoothing_epsilon=smoothing_epsilon,
    )


def save_unigrams(model: UnigramModel, path: str | Path) -> None:
    doc = {
        "format_version": UNIGRAM_FORMAT_VERSION,
        "variant": model.variant,
        "total_tokens": model.total_tokens,
        "smoothing_epsilon": model.smoothing_epsilon,
        "unfactored_space": model.unfactored_space,
        "feature_spaces": dict(model.feature_spaces),
        "unfactored_counts": dict(model.unfactored_counts),
        "per_feature_counts": {k: dict(v) for k, v in model.per_feature_counts.items()},
    }
    Path(path).write_text(
        json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False),
        encoding="utf-8",
    )


def load_unigrams(path: str | Path) -> UnigramModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"bad unigram file: {e.msg}") from e
    version = str(doc.get("format_version", ""))
    if version != UNIGRAM_FORMAT_VERSION:
        raise VersionError(f"unsupported unigram version {version!r}")
    try:
        return UnigramModel(
            variant=str(doc["variant"]),
            total_tokens=int(doc["total_tokens"]),
            unfactored_counts=doc["unfactored_counts"],
            per_feature_counts=doc["per_feature_counts"],
            feature_spaces=doc["feature_spaces"],
            unfactored_space=int(doc["unfactored_space"]),
            smoothing_epsilon=float(doc["smoothing_epsilon"]),
        )
    except KeyError as e:
        raise FormatError(f"unigram file missing {e.args[0]!r}") from e


@dataclass(frozen=True)
class RankedCandidate:
    analysis: Analysis
    match_count: int
    tie_score: float
    final_rank: int


def match_count(
    prediction: Mapping[str, str], candidate: Analysis, schema: FeatureSchema
) -> int:
    """Features on which the candidate agrees with the predicted bundle."""
    for name in prediction:
        if not schema.has_feature(name):
            raise SchemaMismatch(f"prediction carries unknown feature {name!r}")
    for name in candidate.features:
        if not schema.has_feature(name):
            raise SchemaMismatch(f"candidate carries unknown feature {name!r}")
    pred = schema.fill_defaults(prediction)
    cand = candidate.filled(schema)
    return sum(1 for name in schema.feature_names() if pred[name] == cand[name])


def tie_break_score(
    candidate: Analysis,
    unigrams: UnigramModel,
    schema: FeatureSchema,
    weights: tuple[float, float] = (0.5, 0.5),
) -> float:
    bundle = candidate.filled(schema)
    tag = serialize_unfactored(bundle, schema)
    product = math.prod(
        unigrams.p_feature(name, value) for name, value in bundle.items()
    )
    return weights[0] * unigrams.p_unfactored(tag) + weights[1] * product


def rank_analyses(
    prediction: Mapping[str, str],
    candidates: Sequence[Analysis],
    unigrams: UnigramModel | None,
    schema: FeatureSchema,
    scorer: Callable[[Analysis], float] | None = None,
) -> list[RankedCandidate]:
    """Total order: match count desc, tie score desc, canonical key asc.

    ``scorer`` overrides the unigram tie-break (used for the
    classifier-probability variant); exactly one of ``unigrams``/``scorer``
    must be provided.
    """
    if not candidates:
        raise EmptyCandidates("no analyses to rank")
    if scorer is None:
        if unigrams is None:
            raise ValueError("rank_analyses needs unigrams or an explicit scorer")
        scorer = lambda a: tie_break_score(a, unigrams, schema)
    keyed = sorted(
        (
            (-match_count(prediction, a, schema), -scorer(a), canonical_analysis_key(a, schema), a)
            for a in candidates
        ),
        key=lambda item: item[:3],
    )
    return [
        RankedCandidate(analysis=a, match_count=-mc, tie_score=-ts, final_rank=i + 1)
        for i, (mc, ts, _, a) in enumerate(keyed)
    ]


def _classifier_scorer(
    dist: FeatureDistribution, schema: FeatureSchema
) -> Callable[[Analysis], float]:
    def score(candidate: Analysis) -> float:
        bundle = candidate.filled(schema)
        tag = serialize_unfactored(bundle, schema)
        p_tag = CLASSIFIER_PROB_FLOOR
        if dist.unfactored:
            p_tag = max(dist.unfactored.get(tag, 0.0), CLASSIFIER_PROB_FLOOR)
        product = math.prod(
            max(dist.per_feature[name].get(value, 0.0), CLASSIFIER_PROB_FLOOR)
            for name, value in bundle.items()
        )
        return 0.5 * p_tag + 0.5 * product

    return score


def _backoff_analysis(
    raw: str, dist: FeatureDistribution, db: AnalyzerDB, schema: FeatureSchema
) -> Analysis:
    bundle = dist.argmax_bundle(schema)
    return Analysis(
        features=schema.fill_defaults(bundle),
        lex=raw,
        diac=raw,
        backoff=db.backoff is BackoffMode.SYNTHESIZE_FROM_PREDICTIONS,
    )


def disambiguate_sentence(
    sentence: Sentence,
    distributions: Sequence[FeatureDistribution],
    db: AnalyzerDB,
    unigrams: UnigramModel | None,
    schema: FeatureSchema,
    tie_break_source: str = "unigram",
    trace: list | None = None,
) -> list[Analysis]:
    if len(distributions) != len(sentence.tokens):
        raise AlignmentError(
            f"sentence {sentence.id!r}: {len(distributions)} distributions vs "
            f"{len(sentence.tokens)} tokens"
        )
    if tie_break_source not in ("unigram", "classifier"):
        raise ValueError(f"unknown tie_break_source {tie_break_source!r}")
    out: list[Analysis] = []
    for i, (token, dist) in enumerate(zip(sentence.tokens, distributions)):
        candidates = analyze(token.raw, db)
        record = None
        if trace is not None:
            record = {"sentence": sentence.id, "index": i, "raw": token.raw}
        if candidates is None:
            chosen = _backoff_analysis(token.raw, dist, db, schema)
            if record is not None:
                record.update(no_candidates=True, backoff=chosen.backoff, candidates=[])
        else:
            prediction = dist.argmax_bundle(schema)
            scorer = (
                _classifier_scorer(dist, schema)
                if tie_break_source == "classifier"
                else None
            )
            ranked = rank_analyses(prediction, candidates, unigrams, schema, scorer)
            chosen = ranked[0].analysis
            if record is not None:
                record.update(
                    no_candidates=False,
                    backoff=False,
                    candidates=[
                        {
                            "analysis": rc.analysis.to_record(),
                            "match_count": rc.match_count,
                            "tie_score": rc.tie_score,
                            "rank": rc.final_rank,
                        }
                        for rc in ranked
                    ],
                )
        if record is not None:
            trace.append(record)
        out.append(chosen)
    return out


@dataclass(frozen=True)
class DisambiguationResult:
    corpus: Corpus
    stats: dict
    trace: tuple | None = None


def disambiguate_corpus(
    corpus: Corpus,
    distributions: Sequence[SentenceDistributions],
    db: AnalyzerDB,
    unigrams: UnigramModel | None,
    schema: FeatureSchema,
    tie_break_source: str = "unigram",
    collect_trace: bool = False,
) -> DisambiguationResult:
    """Replace every gold analysis with the disambiguator's choice.

    ``distributions`` must align with the corpus (ids, counts, raw forms),
    e.g. from :func:`morphdis.tagger.predict` or an interchange file.
    """
    if len(distributions) != len(corpus.sentences):
        raise AlignmentError(
            f"{len(distributions)} distribution sentences vs {len(corpus.sentences)}"
        )
    trace: list | None = [] if collect_trace else None
    sentences: list[Sentence] = []
    tokens = 0
    no_candidates = 0
    flagged_backoff = 0
    ambiguous = 0
    candidate_total = 0
    for sentence, dists in zip(corpus.sentences, distributions):
        if dists.id != sentence.id:
            raise AlignmentError(f"distribution id {dists.id!r} != {sentence.id!r}")
        if dists.raws != tuple(t.raw for t in sentence.tokens):
            raise AlignmentError(f"sentence {sentence.id!r}: raw forms differ")
        analyses = disambiguate_sentence(
            sentence,
            dists.distributions,
            db,
            unigrams,
            schema,
            tie_break_source=tie_break_source,
            trace=trace,
        )
        new_tokens = []
        for token, chosen in zip(sentence.tokens, analyses):
            tokens += 1
            stored = analyze(token.raw, db)
            if stored is None:
                no_candidates += 1
            else:
                candidate_total += len(stored)
                if len(stored) > 1:
                    ambiguous += 1
            if chosen.backoff:
                flagged_backoff += 1
            new_tokens.append(
                AnnotatedToken(raw=token.raw, analysis=chosen, coda=token.coda)
            )
        sentences.append(
            Sentence(id=sentence.id, tokens=tuple(new_tokens), provenance=sentence.provenance)
        )
    analyzed = tokens - no_candidates
    stats = {
        "tokens": tokens,
        "analyzed_tokens": analyzed,
        "no_candidate_tokens": no_candidates,
        "backoff_flagged_tokens": flagged_backoff,
        "ambiguous_tokens": ambiguous,
        "mean_candidates": candidate_total / analyzed if analyzed else 0.0,
        "backoff_share": no_candidates / tokens if tokens else 0.0,
    }
    return DisambiguationResult(
        corpus=Corpus(
            schema_ref=corpus.schema_ref, sentences=tuple(sentences), split=corpus.split
        ),
        stats=stats,
        trace=tuple(trace) if trace is not None else None,
    )
