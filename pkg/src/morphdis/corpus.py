"""Annotated corpora: reading, canonical writing, sampling, OOV bookkeeping.

The on-disk corpus format is UTF-8 JSON lines, one sentence record per line:

    {"id": "s1", "tokens": [{"raw": "...", "coda": "...",
                             "analysis": {"lex": "...", "diac": "...",
                                          "gloss": "...", "feats": {...}}}]}

``coda`` (a conventionalized spelling of the raw form) and ``gloss`` are
optional.  ``feats`` may be sparse; absent features mean the schema default.
The canonical writer emits sorted keys and no insignificant whitespace, so
read followed by write is byte-identical for canonical files.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import FormatError, SchemaError
from .schema import FeatureSchema, serialize_unfactored

SPLITS = ("TRAIN", "TUNE", "DEV", "TEST")

# Combining marks of standard Arabic orthography: fathatan, dammatan,
# kasratan, fatha, damma, kasra, shadda, sukun.
DEFAULT_ARABIC_DIACRITICS = frozenset(chr(cp) for cp in range(0x064B, 0x0653))

UNKNOWN = "UNK"


@dataclass(frozen=True)
class Analysis:
    """One full morphosyntactic reading of a word form.

    ``features`` is sparse: features missing from the map carry their schema
    default.  ``lex`` (lemma) and ``diac`` (diacritized form) fall back to the
    ``"UNK"`` sentinel when the source does not provide them.
    """

    features: Mapping[str, str]
    lex: str = UNKNOWN
    diac: str = UNKNOWN
    gloss: str | None = None
    backoff: bool = False

    def filled(self, schema: FeatureSchema) -> dict[str, str]:
        return schema.fill_defaults(self.features)

    def unfactored(self, schema: FeatureSchema) -> str:
        return serialize_unfactored(self.features, schema)

    def to_record(self) -> dict:
        record: dict = {
            "diac": self.diac,
            "feats": dict(self.features),
            "lex": self.lex,
        }
        if self.gloss is not None:
            record["gloss"] = self.gloss
        if self.backoff:
            record["backoff"] = True
        return record


@dataclass(frozen=True)
class AnnotatedToken:
    raw: str
    analysis: Analysis
    coda: str | None = None

    def to_record(self) -> dict:
        record: dict = {"analysis": self.analysis.to_record(), "raw": self.raw}
        if self.coda is not None:
            record["coda"] = self.coda
        return record


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: tuple[AnnotatedToken, ...]
    provenance: str | None = None

    def to_record(self) -> dict:
        record: dict = {
            "id": self.id,
            "tokens": [t.to_record() for t in self.tokens],
        }
        if self.provenance is not None:
            record["prov"] = self.provenance
        return record


@dataclass(frozen=True)
class Corpus:
    schema_ref: str
    sentences: tuple[Sentence, ...]
    split: str = "TRAIN"

    def __post_init__(self):
        if self.split not in SPLITS:
            raise FormatError(f"unknown split {self.split!r}; expected one of {SPLITS}")
        seen: set[str] = set()
        for s in self.sentences:
            if s.id in seen:
                raise FormatError(f"duplicate sentence id {s.id!r}")
            seen.add(s.id)

    def token_count(self) -> int:
        return sum(len(s.tokens) for s in self.sentences)

    def iter_tokens(self) -> Iterator[AnnotatedToken]:
        for s in self.sentences:
            yield from s.tokens

    def raw_vocabulary(self) -> set[str]:
        return {t.raw for t in self.iter_tokens()}

    def validate(self, schema: FeatureSchema) -> None:
        if schema.variant != self.schema_ref:
            raise SchemaError(
                f"corpus references schema {self.schema_ref!r}, got {schema.variant!r}"
            )
        for s in self.sentences:
            for t in s.tokens:
                schema.validate_bundle(t.analysis.features)


def _analysis_from_record(record, line: int | None) -> Analysis:
    if not isinstance(record, Mapping):
        raise FormatError("analysis must be an object", line=line)
    feats = record.get("feats")
    if not isinstance(feats, Mapping):
        raise FormatError("analysis missing feats object", line=line)
    for k, v in feats.items():
        if not isinstance(k, str) or not isinstance(v, str):
            raise FormatError(f"non-string feature entry {k!r}: {v!r}", line=line)
    lex = record.get("lex", UNKNOWN)
    diac = record.get("diac", UNKNOWN)
    gloss = record.get("gloss")
    if not lex or not diac:
        raise FormatError("empty lex or diac string", line=line)
    return Analysis(
        features=dict(feats),
        lex=str(lex),
        diac=str(diac),
        gloss=None if gloss is None else str(gloss),
        backoff=bool(record.get("backoff", False)),
    )


def _token_from_record(record, line: int | None) -> AnnotatedToken:
    if not isinstance(record, Mapping):
        raise FormatError("token must be an object", line=line)
    raw = record.get("raw")
    if not isinstance(raw, str) or not raw:
        raise FormatError("token missing non-empty raw form", line=line)
    if "analysis" not in record:
        raise FormatError(f"token {raw!r} missing analysis", line=line)
    coda = record.get("coda")
    return AnnotatedToken(
        raw=raw,
        analysis=_analysis_from_record(record["analysis"], line),
        coda=None if coda is None else str(coda),
    )


def sentence_from_record(record, line: int | None = None) -> Sentence:
    if not isinstance(record, Mapping):
        raise FormatError("sentence record must be an object", line=line)
    sid = record.get("id")
    if not isinstance(sid, str) or not sid:
        raise FormatError("sentence missing non-empty id", line=line)
    tokens = record.get("tokens")
    if not isinstance(tokens, list):
        raise FormatError(f"sentence {sid!r} missing tokens list", line=line)
    prov = record.get("prov")
    return Sentence(
        id=sid,
        tokens=tuple(_token_from_record(t, line) for t in tokens),
        provenance=None if prov is None else str(prov),
    )


def read_corpus(
    path: str | Path, schema: FeatureSchema, split: str = "TRAIN"
) -> Corpus:
    """Load a corpus file and validate every token against the schema.

    The first offending line is cited in the raised error.
    """
    sentences: list[Sentence] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"not valid JSON: {e.msg}", line=line_no) from e
            sentence = sentence_from_record(record, line=line_no)
            for token in sentence.tokens:
                try:
                    schema.validate_bundle(token.analysis.features)
                except SchemaError as e:
                    raise SchemaError(f"line {line_no}: {e}") from e
            sentences.append(sentence)
    return Corpus(schema_ref=schema.variant, sentences=tuple(sentences), split=split)


def dumps_sentence(sentence: Sentence) -> str:
    return json.dumps(
        sentence.to_record(), sort_keys=True, separators=(",", ":"), ensure_ascii=False
    )


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """Canonical writer: sorted keys, compact separators, one record per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for sentence in corpus.sentences:
            fh.write(dumps_sentence(sentence))
            fh.write("\n")


def strip_diacritics(
    text: str, diacritic_set: frozenset[str] | set[str] = DEFAULT_ARABIC_DIACRITICS
) -> str:
    """Drop every character in ``diacritic_set``, preserving all others."""
    return "".join(ch for ch in text if ch not in diacritic_set)


def sample_learning_curve(
    train: Corpus, sizes: Sequence[int], seed: int = 12345
) -> list[Corpus]:
    """Nested token-budget samples of the training corpus.

    Sentences are shuffled once with the seeded RNG; each sample is the
    shortest shuffled prefix whose token count reaches the budget (the whole
    corpus when the budget exceeds it).  Prefixes of one shuffle, so every
    larger sample contains every smaller one.
    """
    for a, b in zip(sizes, sizes[1:]):
        if b <= a:
            raise ValueError(f"sizes must be strictly increasing, got {a} then {b}")
    shuffled = list(train.sentences)
    random.Random(seed).shuffle(shuffled)
    samples: list[Corpus] = []
    for budget in sizes:
        running = 0
        cut = 0
        for cut, sentence in enumerate(shuffled, start=1):
            running += len(sentence.tokens)
            if running >= budget:
                break
        if running < budget:
            cut = len(shuffled)
        if budget <= 0:
            cut = 0
        samples.append(
            Corpus(
                schema_ref=train.schema_ref,
                sentences=tuple(shuffled[:cut]),
                split=train.split,
            )
        )
    return samples


def oov_vocabulary(train: Corpus, eval_corpus: Corpus) -> set[str]:
    """Raw forms that occur in the evaluation corpus but never in training."""
    return eval_corpus.raw_vocabulary() - train.raw_vocabulary()
