"""File-level contracts shared with the tagging toolkit.

The bridge talks to the toolkit through files only: feature schemas and
annotated corpora come in as JSON documents, probability distributions go
out as the JSONL interchange format the toolkit's loader validates.  This
module implements those three formats from their documented shapes and
deliberately imports nothing from the toolkit.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import FormatError

TAG_SEPARATOR = "+"


@dataclass(frozen=True)
class Feature:
    name: str
    values: tuple[str, ...]
    default: str


@dataclass(frozen=True)
class Schema:
    """Ordered feature inventory of one variant.

    Feature order is the canonical serialization order; whole tags are the
    values joined with ``+`` in that order, defaults filled in.
    """

    variant: str
    features: tuple[Feature, ...]

    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def feature(self, name: str) -> Feature:
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)

    def fill(self, bundle: Mapping[str, str]) -> dict[str, str]:
        return {f.name: bundle.get(f.name, f.default) for f in self.features}

    def serialize(self, bundle: Mapping[str, str]) -> str:
        parts = []
        for f in self.features:
            value = bundle.get(f.name, f.default)
            if value not in f.values:
                raise FormatError(f"feature {f.name}: illegal value {value!r}")
            parts.append(value)
        return TAG_SEPARATOR.join(parts)


def load_schema(path: str | Path) -> Schema:
    """Read a schema document: variant id plus ordered feature definitions."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, Mapping):
        raise FormatError("schema document must be an object")
    variant = doc.get("variant")
    features = doc.get("features")
    if not isinstance(variant, str) or not isinstance(features, list) or not features:
        raise FormatError("schema document needs variant and features")
    parsed = []
    for entry in features:
        name = entry.get("name")
        values = entry.get("values")
        default = entry.get("default")
        if not isinstance(name, str) or not isinstance(values, list) or default not in values:
            raise FormatError(f"malformed feature definition: {entry!r}")
        parsed.append(Feature(name=name, values=tuple(values), default=default))
    return Schema(variant=variant, features=tuple(parsed))


@dataclass(frozen=True)
class Sentence:
    """One annotated sentence: surface words plus filled gold bundles."""

    id: str
    words: tuple[str, ...]
    bundles: tuple[dict[str, str], ...]


def read_sentences(path: str | Path, schema: Schema) -> list[Sentence]:
    """Read a JSONL corpus, validating features against the schema."""
    known = {f.name: set(f.values) for f in schema.features}
    sentences: list[Sentence] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"not valid JSON: {e.msg}", line=line_no) from e
            sid = record.get("id") if isinstance(record, Mapping) else None
            tokens = record.get("tokens") if isinstance(record, Mapping) else None
            if not isinstance(sid, str) or not isinstance(tokens, list) or not tokens:
                raise FormatError("record needs id and a non-empty tokens list", line=line_no)
            words: list[str] = []
            bundles: list[dict[str, str]] = []
            for ti, token in enumerate(tokens):
                if not isinstance(token, Mapping):
                    raise FormatError(f"token {ti} malformed", line=line_no)
                raw = token.get("raw")
                analysis = token.get("analysis")
                if not isinstance(raw, str) or not isinstance(analysis, Mapping):
                    raise FormatError(f"token {ti} needs raw and analysis", line=line_no)
                feats = analysis.get("feats")
                if not isinstance(feats, Mapping):
                    raise FormatError(f"token {raw!r} needs analysis.feats", line=line_no)
                for name, value in feats.items():
                    if name not in known:
                        raise FormatError(f"token {raw!r}: unknown feature {name!r}", line=line_no)
                    if value not in known[name]:
                        raise FormatError(
                            f"token {raw!r}: illegal value {value!r} for {name}", line=line_no
                        )
                words.append(raw)
                bundles.append(schema.fill(feats))
            sentences.append(Sentence(id=sid, words=tuple(words), bundles=tuple(bundles)))
    if not sentences:
        raise FormatError("corpus is empty")
    return sentences


@dataclass(frozen=True)
class TokenDistribution:
    """Per-token output: full per-feature vectors, optional whole-tag top-k."""

    raw: str
    feats: dict[str, dict[str, float]]
    unfactored: dict[str, float] | None = None


@dataclass(frozen=True)
class SentenceDistribution:
    id: str
    tokens: tuple[TokenDistribution, ...]


def write_distributions(
    sentences: Iterable[SentenceDistribution], path: str | Path
) -> None:
    """Write interchange JSONL: one sentence per line, sorted keys."""
    with open(path, "w", encoding="utf-8") as fh:
        for sent in sentences:
            tokens = []
            for tok in sent.tokens:
                entry: dict = {"raw": tok.raw, "feats": tok.feats}
                if tok.unfactored is not None:
                    entry["unfactored"] = tok.unfactored
                tokens.append(entry)
            fh.write(
                json.dumps({"id": sent.id, "tokens": tokens}, sort_keys=True, ensure_ascii=False)
                + "\n"
            )


def split_tag(tag: str, schema: Schema) -> dict[str, str]:
    parts = tag.split(TAG_SEPARATOR)
    if len(parts) != len(schema.features):
        raise FormatError(f"expected {len(schema.features)} fields, got {len(parts)}")
    return {f.name: value for f, value in zip(schema.features, parts)}
