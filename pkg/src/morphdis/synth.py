"""Seeded synthetic corpora with a ground-truth analyzer.

The generated language is compositional on purpose: a form is a stem plus a
suffix, the suffix fixes the inflectional features (per, gen, num, asp) and
the stem fixes the core tag and clitic decorations.  That gives classifiers
real generalization signal (suffix templates transfer to unseen forms) while
the emitted analyzer stays a perfect oracle: its entries are exactly each
form's full analysis set, so retagging against it can be tested end to end
without licensed data.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Mapping, Sequence

from .analyzer import AnalyzerDB, BackoffMode
from .corpus import Analysis, AnnotatedToken, Corpus, Sentence
from .schema import FeatureDef, FeatureSchema, resolve_schema

SUFFIX_FEATURES = ("per", "gen", "num", "asp")
# stem decorations beyond pos; drawn rarely so default values dominate
STEM_FEATURES = ("prc0", "prc1", "enc0")
TRUE_READING_WEIGHT = 0.75
MAX_EXTRA_ANALYSES = 7

_CONSONANTS = "bdfghklmnqrstwyz"
_STEM_VOWELS = "aiu"
_SUFFIX_VOWELS = "aiou"


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one synthetic dataset; generation is pure in (spec, seed)."""

    variant: str = "lev"
    vocabulary: int = 5000
    ambiguity: float = 3.0
    budget: int = 10_000
    sentence_length: int = 10
    eval_budget: int | None = None
    tagset: Mapping[str, int] | None = None
    suffix_count: int = 24
    seed: int = 12345
    name: str = "syn"

    def __post_init__(self) -> None:
        if self.vocabulary <= 0:
            raise ValueError("vocabulary size must be positive")
        if self.ambiguity < 1.0:
            raise ValueError("ambiguity rate must be at least 1.0")
        if self.budget <= 0:
            raise ValueError("token budget must be positive")
        if self.sentence_length <= 0:
            raise ValueError("sentence length must be positive")
        if self.eval_budget is not None and self.eval_budget <= 0:
            raise ValueError("eval budget must be positive")
        if self.suffix_count <= 0:
            raise ValueError("suffix count must be positive")
        if self.tagset is not None:
            for name, k in self.tagset.items():
                if k <= 0:
                    raise ValueError(f"tagset cardinality for {name!r} must be positive")

    def eval_tokens(self) -> int:
        if self.eval_budget is not None:
            return self.eval_budget
        return max(self.budget // 5, self.sentence_length)


@dataclass(frozen=True)
class SyntheticData:
    schema: FeatureSchema
    train: Corpus
    tune: Corpus
    dev: Corpus
    test: Corpus
    db: AnalyzerDB

    def splits(self) -> dict[str, Corpus]:
        return {
            "TRAIN": self.train,
            "TUNE": self.tune,
            "DEV": self.dev,
            "TEST": self.test,
        }


def _value_pool(feature: FeatureDef, cardinality: int | None) -> list[str]:
    ordered = [feature.default] + sorted(feature.values - {feature.default})
    if cardinality is None:
        return ordered
    return ordered[: max(1, min(cardinality, len(ordered)))]


def _build_pools(
    schema: FeatureSchema, tagset: Mapping[str, int] | None
) -> dict[str, list[str]]:
    tagset = tagset or {}
    return {
        name: _value_pool(schema.feature(name), tagset.get(name))
        for name in schema.feature_names()
    }


def _zipf_weights(n: int) -> list[float]:
    return [1.0 / (rank + 1) for rank in range(n)]


def _zipf_choice(rng: random.Random, pool: Sequence[str]) -> str:
    return rng.choices(pool, weights=_zipf_weights(len(pool)), k=1)[0]


@dataclass(frozen=True)
class _Stem:
    text: str
    features: Mapping[str, str]


def _make_suffixes(
    rng: random.Random, schema: FeatureSchema, pools: Mapping[str, list[str]], count: int
) -> dict[str, dict[str, str]]:
    inflectional = [f for f in SUFFIX_FEATURES if schema.has_feature(f)]
    suffixes: dict[str, dict[str, str]] = {}
    while len(suffixes) < count:
        text = (
            rng.choice(_SUFFIX_VOWELS)
            + rng.choice(_CONSONANTS)
            + rng.choice(_SUFFIX_VOWELS)
        )
        if text in suffixes:
            continue
        suffixes[text] = {name: rng.choice(pools[name]) for name in inflectional}
    return suffixes


def _make_stems(
    rng: random.Random, schema: FeatureSchema, pools: Mapping[str, list[str]], count: int
) -> list[_Stem]:
    decorations = [f for f in STEM_FEATURES if schema.has_feature(f)]
    stems: list[_Stem] = []
    seen: set[str] = set()
    while len(stems) < count:
        text = "".join(
            rng.choice(_CONSONANTS) + rng.choice(_STEM_VOWELS) for _ in range(2)
        )
        if text in seen:
            continue
        seen.add(text)
        features = {"pos": _zipf_choice(rng, pools["pos"])}
        for name in decorations:
            pool = pools[name]
            if len(pool) > 1 and rng.random() < 0.2:
                features[name] = rng.choice(pool[1:])
        stems.append(_Stem(text=text, features=features))
    return stems


def _analysis_count(rng: random.Random, ambiguity: float) -> int:
    if ambiguity <= 1.0:
        return 1
    # geometric tail: mean extra readings = ambiguity - 1
    stay = 1.0 - 1.0 / ambiguity
    extra = 0
    while extra < MAX_EXTRA_ANALYSES and rng.random() < stay:
        extra += 1
    return 1 + extra


def _perturb(
    rng: random.Random,
    bundle: Mapping[str, str],
    pools: Mapping[str, list[str]],
    mutable: Sequence[str],
) -> dict[str, str]:
    out = dict(bundle)
    for name in rng.sample(mutable, k=min(rng.randint(1, 2), len(mutable))):
        alternatives = [v for v in pools[name] if v != out[name]]
        out[name] = rng.choice(alternatives)
    return out


def _form_lexicon(
    rng: random.Random,
    spec: SyntheticSpec,
    schema: FeatureSchema,
    pools: Mapping[str, list[str]],
    stems: Sequence[_Stem],
    suffixes: Mapping[str, dict[str, str]],
) -> dict[str, tuple[tuple[str, dict[str, str]], ...]]:
    """form -> ((lemma, filled bundle), ...); the true reading comes first."""
    suffix_items = list(suffixes.items())
    pairs = [(i, j) for i in range(len(stems)) for j in range(len(suffix_items))]
    chosen = rng.sample(pairs, spec.vocabulary)
    mutable = [n for n in schema.feature_names() if len(pools[n]) > 1]
    lexicon: dict[str, tuple[tuple[str, dict[str, str]], ...]] = {}
    for i, j in chosen:
        stem = stems[i]
        suffix_text, signature = suffix_items[j]
        form = stem.text + suffix_text
        true_bundle = schema.fill_defaults({**stem.features, **signature})
        readings = [(stem.text, true_bundle)]
        seen = {tuple(sorted(true_bundle.items()))}
        wanted = _analysis_count(rng, spec.ambiguity)
        attempts = 0
        while len(readings) < wanted and attempts < 4 * wanted and mutable:
            attempts += 1
            candidate = _perturb(rng, true_bundle, pools, mutable)
            key = tuple(sorted(candidate.items()))
            if key in seen:
                continue
            seen.add(key)
            readings.append((stem.text, candidate))
        lexicon[form] = tuple(readings)
    return lexicon


def _oracle_db(
    lexicon: Mapping[str, tuple[tuple[str, dict[str, str]], ...]],
    schema: FeatureSchema,
    provenance: str,
) -> AnalyzerDB:
    entries = {
        form: tuple(
            Analysis(features=bundle, lex=lemma, diac=form)
            for lemma, bundle in readings
        )
        for form, readings in lexicon.items()
    }
    return AnalyzerDB(
        schema_ref=schema.variant,
        entries=entries,
        backoff=BackoffMode.KEEP_PREDICTIONS,
        provenance=provenance,
    )


def _emit_split(
    rng: random.Random,
    spec: SyntheticSpec,
    schema: FeatureSchema,
    lexicon: Mapping[str, tuple[tuple[str, dict[str, str]], ...]],
    split: str,
    budget: int,
) -> Corpus:
    forms = list(lexicon)
    weights = _zipf_weights(len(forms))
    drawn = rng.choices(forms, weights=weights, k=budget)
    sentences = []
    for start in range(0, budget, spec.sentence_length):
        chunk = drawn[start : start + spec.sentence_length]
        tokens = []
        for form in chunk:
            readings = lexicon[form]
            if len(readings) == 1 or rng.random() < TRUE_READING_WEIGHT:
                lemma, bundle = readings[0]
            else:
                lemma, bundle = readings[rng.randint(1, len(readings) - 1)]
            tokens.append(
                AnnotatedToken(
                    raw=form,
                    analysis=Analysis(features=bundle, lex=lemma, diac=form),
                )
            )
        sentences.append(
            Sentence(
                id=f"{spec.name}-{split.lower()}-{len(sentences):05d}",
                tokens=tuple(tokens),
            )
        )
    return Corpus(schema_ref=schema.variant, sentences=tuple(sentences), split=split)


def _assemble(
    spec: SyntheticSpec,
    schema: FeatureSchema,
    rng: random.Random,
    stems: Sequence[_Stem],
    suffixes: Mapping[str, dict[str, str]],
    pools: Mapping[str, list[str]],
) -> SyntheticData:
    lexicon = _form_lexicon(rng, spec, schema, pools, stems, suffixes)
    db = _oracle_db(lexicon, schema, provenance=f"synthetic:{spec.name}")
    train = _emit_split(rng, spec, schema, lexicon, "TRAIN", spec.budget)
    tune = _emit_split(rng, spec, schema, lexicon, "TUNE", spec.eval_tokens())
    dev = _emit_split(rng, spec, schema, lexicon, "DEV", spec.eval_tokens())
    test = _emit_split(rng, spec, schema, lexicon, "TEST", spec.eval_tokens())
    return SyntheticData(schema=schema, train=train, tune=tune, dev=dev, test=test, db=db)


def _stem_budget(spec: SyntheticSpec) -> int:
    return max(1, math.ceil(spec.vocabulary / spec.suffix_count), spec.vocabulary // 8)


def generate_synthetic(spec: SyntheticSpec) -> SyntheticData:
    """Build train/tune/dev/test plus the oracle analyzer for one dataset."""
    schema = resolve_schema(spec.variant)
    rng = random.Random(spec.seed)
    pools = _build_pools(schema, spec.tagset)
    suffixes = _make_suffixes(rng, schema, pools, spec.suffix_count)
    stems = _make_stems(rng, schema, pools, _stem_budget(spec))
    return _assemble(spec, schema, rng, stems, suffixes, pools)


def generate_synthetic_family(
    spec: SyntheticSpec,
    high_count: int = 3,
    high_budget: int | None = None,
    stem_overlap: float = 0.5,
) -> tuple[SyntheticData, list[SyntheticData]]:
    """One low-resource target plus related high-resource datasets.

    All members share the suffix system (the transferable signal) and a
    configurable share of the target's stems, so pretraining on the
    high-resource members genuinely helps the target.
    """
    if high_count < 1:
        raise ValueError("family needs at least one high-resource member")
    if not 0.0 <= stem_overlap <= 1.0:
        raise ValueError("stem_overlap must lie in [0, 1]")
    schema = resolve_schema(spec.variant)
    rng = random.Random(spec.seed)
    pools = _build_pools(schema, spec.tagset)
    suffixes = _make_suffixes(rng, schema, pools, spec.suffix_count)
    n_stems = _stem_budget(spec)
    master = _make_stems(rng, schema, pools, 2 * n_stems)
    target_stems = master[:n_stems]
    extra_stems = master[n_stems:]
    target = _assemble(spec, schema, rng, target_stems, suffixes, pools)
    highs = []
    shared = max(0, min(n_stems, round(stem_overlap * n_stems)))
    for i in range(high_count):
        member_rng = random.Random(spec.seed + 7919 * (i + 1))
        stems = member_rng.sample(target_stems, shared) + member_rng.sample(
            extra_stems, n_stems - shared
        )
        member_spec = SyntheticSpec(
            variant=spec.variant,
            vocabulary=spec.vocabulary,
            ambiguity=spec.ambiguity,
            budget=high_budget if high_budget is not None else 4 * spec.budget,
            sentence_length=spec.sentence_length,
            eval_budget=spec.eval_budget,
            tagset=spec.tagset,
            suffix_count=spec.suffix_count,
            seed=spec.seed + 7919 * (i + 1),
            name=f"{spec.name}-high{i}",
        )
        highs.append(
            _assemble(member_spec, schema, member_rng, stems, suffixes, pools)
        )
    return target, highs
