"""Cross-variant annotation harmonization for merged and staged training.

Bringing differently annotated corpora into one space happens in three steps:
(a) drop features that are unannotated or unreliable in the target variant,
(b) strip vowels from the form segment of proclitic values so spelling
variants of the same clitic collapse (wa_conj and wi_conj both become
w_conj), and (c) remap values that are mere default-convention differences
between datasets.  The result validates under a reduced schema derived from
the target variant; with the stock configuration that is the 10-feature set
pos, per, gen, num, asp, prc3, prc2, prc1, prc0, enc0.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import Analysis, AnnotatedToken, Corpus, Sentence
from .errors import RemapError, SchemaError
from .schema import (
    PROCLITIC_FEATURES,
    FeatureSchema,
    load_builtin,
)

DEFAULT_DROPPED = frozenset({"stt", "cas", "mod", "vox", "enc1", "enc2"})
VOWELS = frozenset("aeiou")
REDUCED_SUFFIX = "_h10"


def strip_proclitic_vowels(value: str, overrides: Mapping[str, str] | None = None) -> str:
    """Strip a, e, i, o, u from the form segment of a form_tag shaped value.

    Values without an underscore (plain sentinels like "0" or "na") pass
    through, as does anything whose form segment would strip to nothing.
    Only lowercase vowels count; transliteration capitals (A, H) are letters.
    """
    if overrides and value in overrides:
        return overrides[value]
    if "_" not in value:
        return value
    form, tag = value.split("_", 1)
    stripped = "".join(ch for ch in form if ch not in VOWELS)
    if not stripped:
        return value
    return f"{stripped}_{tag}"


@dataclass(frozen=True)
class HarmonizationConfig:
    dropped_features: frozenset[str] = DEFAULT_DROPPED
    proclitic_vowel_strip: bool = True
    strip_overrides: Mapping[str, str] = field(default_factory=dict)
    # per source variant: "pos:feature" -> replacement for the source default
    default_remap: Mapping[str, Mapping[str, str]] = field(default_factory=dict)
    target_variant: str = "lev"

    @classmethod
    def from_document(cls, doc: Mapping) -> "HarmonizationConfig":
        kwargs = {}
        if "dropped_features" in doc:
            kwargs["dropped_features"] = frozenset(doc["dropped_features"])
        if "proclitic_vowel_strip" in doc:
            kwargs["proclitic_vowel_strip"] = bool(doc["proclitic_vowel_strip"])
        if "strip_overrides" in doc:
            kwargs["strip_overrides"] = dict(doc["strip_overrides"])
        if "default_remap" in doc:
            kwargs["default_remap"] = {
                variant: dict(rules) for variant, rules in doc["default_remap"].items()
            }
        if "target_variant" in doc:
            kwargs["target_variant"] = str(doc["target_variant"])
        return cls(**kwargs)


def load_harmonization_config(path: str | Path | None = None) -> HarmonizationConfig:
    """Read a config document; the shipped one when no path is given."""
    if path is None:
        ref = resources.files("morphdis.data").joinpath("harmonize_defaults.json")
        text = ref.read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return HarmonizationConfig.from_document(json.loads(text))


def reduced_schema(target: FeatureSchema, dropped: frozenset[str]) -> FeatureSchema:
    features = tuple(f for f in target.features if f.name not in dropped)
    if not features:
        raise SchemaError("dropping every feature leaves an empty schema")
    return FeatureSchema(
        variant=f"{target.variant}{REDUCED_SUFFIX}",
        features=features,
        version=target.version,
    )


class Harmonizer:
    """Applies the three-step mapping for a fixed configuration.

    ``schemas`` resolves source variant ids; builtin variants load lazily,
    and the reduced target schema registers itself so harmonized output can
    be harmonized again (idempotently).
    """

    def __init__(
        self,
        config: HarmonizationConfig = HarmonizationConfig(),
        schemas: Mapping[str, FeatureSchema] | None = None,
    ):
        self.config = config
        self._schemas: dict[str, FeatureSchema] = dict(schemas or {})
        target = self._schema_for(config.target_variant)
        self.target_schema = reduced_schema(target, config.dropped_features)
        self._schemas.setdefault(self.target_schema.variant, self.target_schema)

    def _schema_for(self, variant: str) -> FeatureSchema:
        if variant not in self._schemas:
            self._schemas[variant] = load_builtin(variant)
        return self._schemas[variant]

    def harmonize_analysis(self, analysis: Analysis, source_variant: str) -> Analysis:
        source = self._schema_for(source_variant)
        bundle = analysis.filled(source)
        out: dict[str, str] = {
            name: value
            for name, value in bundle.items()
            if name not in self.config.dropped_features
        }
        if self.config.proclitic_vowel_strip:
            for name in out:
                if name in PROCLITIC_FEATURES:
                    out[name] = strip_proclitic_vowels(
                        out[name], self.config.strip_overrides
                    )
        remap = self.config.default_remap.get(source_variant, {})
        if remap:
            pos = out.get("pos", "")
            for name in list(out):
                if out[name] != source.feature(name).default:
                    continue
                replacement = remap.get(f"{pos}:{name}")
                if replacement is None:
                    continue
                if (
                    not self.target_schema.has_feature(name)
                    or replacement not in self.target_schema.feature(name).values
                ):
                    raise RemapError(
                        f"remap {pos}:{name} -> {replacement!r} invalid under "
                        f"{self.target_schema.variant!r}"
                    )
                out[name] = replacement
        for name, value in out.items():
            if not self.target_schema.has_feature(name):
                raise RemapError(
                    f"feature {name!r} has no slot in {self.target_schema.variant!r}"
                )
            if value not in self.target_schema.feature(name).values:
                raise RemapError(
                    f"no rule for {name}={value!r} (source {source_variant!r}) and the "
                    f"value is invalid under {self.target_schema.variant!r}"
                )
        return Analysis(
            features=out,
            lex=analysis.lex,
            diac=analysis.diac,
            gloss=analysis.gloss,
            backoff=analysis.backoff,
        )

    def harmonize_corpus(self, corpus: Corpus, source_variant: str) -> Corpus:
        sentences = []
        for sentence in corpus.sentences:
            tokens = tuple(
                AnnotatedToken(
                    raw=t.raw,
                    analysis=self.harmonize_analysis(t.analysis, source_variant),
                    coda=t.coda,
                )
                for t in sentence.tokens
            )
            sentences.append(
                Sentence(id=sentence.id, tokens=tokens, provenance=sentence.provenance)
            )
        return Corpus(
            schema_ref=self.target_schema.variant,
            sentences=tuple(sentences),
            split=corpus.split,
        )

    def build_merged(
        self, corpora: Sequence[tuple[Corpus, str]], seed: int = 12345
    ) -> Corpus:
        """Harmonize, tag provenance, concatenate, and shuffle (seeded)."""
        if len(corpora) < 2:
            raise ValueError("merging needs at least two corpora")
        merged: list[Sentence] = []
        split = corpora[0][0].split
        for corpus, variant in corpora:
            harmonized = self.harmonize_corpus(corpus, variant)
            for sentence in harmonized.sentences:
                merged.append(
                    Sentence(
                        id=f"{variant}/{sentence.id}",
                        tokens=sentence.tokens,
                        provenance=sentence.provenance or variant,
                    )
                )
        random.Random(seed).shuffle(merged)
        return Corpus(
            schema_ref=self.target_schema.variant,
            sentences=tuple(merged),
            split=split,
        )

    def build_stages(
        self,
        high_resource: Sequence[tuple[Corpus, str]],
        low_resource: tuple[Corpus, str],
        seed: int = 12345,
    ) -> tuple[Corpus, Corpus]:
        """Stage 1: merged high-resource data. Stage 2: the harmonized target."""
        if not high_resource:
            raise ValueError("continued training needs high-resource corpora")
        if len(high_resource) == 1:
            corpus, variant = high_resource[0]
            stage1 = self.harmonize_corpus(corpus, variant)
        else:
            stage1 = self.build_merged(high_resource, seed=seed)
        stage2 = self.harmonize_corpus(low_resource[0], low_resource[1])
        return stage1, stage2
