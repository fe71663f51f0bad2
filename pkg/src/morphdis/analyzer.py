"""Out-of-context morphological analyzer: word form to analysis set.

An :class:`AnalyzerDB` is compiled from gold training data (every distinct
raw form maps to the set of distinct analyses observed with it) or loaded
from a DB file, which lets externally produced analyzers plug into the same
interface.  Lookup misses return ``None``; how to back off is the
disambiguator's call, the DB only records the configured policy.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from .corpus import Analysis, Corpus
from .errors import EmptyCorpus, FormatError, VersionError
from .schema import FeatureSchema

DB_FORMAT_VERSION = "1"


class BackoffMode(enum.Enum):
    """What the disambiguator should do when the DB has no entry for a form.

    KEEP_PREDICTIONS trusts the taggers' argmax bundle as-is.
    SYNTHESIZE_FROM_PREDICTIONS additionally marks the output analysis as a
    synthesized backoff reading (lex and diac fall back to the raw form in
    both modes, since no lexicon entry exists).
    """

    KEEP_PREDICTIONS = "keep_predictions"
    SYNTHESIZE_FROM_PREDICTIONS = "synthesize_from_predictions"


def canonical_analysis_key(analysis: Analysis, schema: FeatureSchema) -> str:
    """Stable identity of an analysis: default-filled record, canonical JSON."""
    record = analysis.to_record()
    record["feats"] = schema.fill_defaults(analysis.features)
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass(frozen=True)
class AnalyzerDB:
    schema_ref: str
    entries: Mapping[str, tuple[Analysis, ...]]
    backoff: BackoffMode = BackoffMode.KEEP_PREDICTIONS
    provenance: str = "compiled-from-train"

    def __post_init__(self):
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    def stats(self) -> dict:
        counts = [len(v) for v in self.entries.values()]
        total = sum(counts)
        return {
            "forms": len(counts),
            "analyses": total,
            "max_ambiguity": max(counts) if counts else 0,
            "mean_ambiguity": total / len(counts) if counts else 0.0,
        }


NO_ANALYSIS = None


def analyze(word: str, db: AnalyzerDB) -> tuple[Analysis, ...] | None:
    """Stored analysis set for the form, or None when the DB has no entry."""
    return db.entries.get(word, NO_ANALYSIS)


def compile_analyzer(
    train: Corpus,
    schema: FeatureSchema,
    backoff: BackoffMode = BackoffMode.KEEP_PREDICTIONS,
    provenance: str = "compiled-from-train",
) -> AnalyzerDB:
    """Collect, per raw form, the distinct gold analyses observed in training.

    Features are stored default-filled and entries sorted under canonical
    serialization, so compilation is independent of sentence order.
    """
    if train.token_count() == 0:
        raise EmptyCorpus("cannot compile an analyzer from an empty corpus")
    collected: dict[str, dict[str, Analysis]] = {}
    for token in train.iter_tokens():
        filled = Analysis(
            features=token.analysis.filled(schema),
            lex=token.analysis.lex,
            diac=token.analysis.diac,
            gloss=token.analysis.gloss,
        )
        key = canonical_analysis_key(filled, schema)
        collected.setdefault(token.raw, {})[key] = filled
    entries = {
        form: tuple(by_key[k] for k in sorted(by_key))
        for form, by_key in collected.items()
    }
    return AnalyzerDB(
        schema_ref=schema.variant,
        entries=entries,
        backoff=backoff,
        provenance=provenance,
    )


def save_db(db: AnalyzerDB, path: str | Path) -> None:
    """One header line, then one record per form, forms sorted, canonical JSON."""

    def dump(obj) -> str:
        return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)

    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "backoff": db.backoff.value,
            "entry_count": len(db.entries),
            "format_version": DB_FORMAT_VERSION,
            "provenance": db.provenance,
            "variant": db.schema_ref,
        }
        fh.write(dump(header) + "\n")
        for form in sorted(db.entries):
            record = {
                "analyses": [a.to_record() for a in db.entries[form]],
                "word": form,
            }
            fh.write(dump(record) + "\n")


def load_db(path: str | Path) -> AnalyzerDB:
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise FormatError("missing analyzer DB header", line=1)
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as e:
            raise FormatError(f"bad header: {e.msg}", line=1) from e
        version = str(header.get("format_version", ""))
        if version != DB_FORMAT_VERSION:
            raise VersionError(
                f"unsupported analyzer DB version {version!r}, expected {DB_FORMAT_VERSION!r}"
            )
        for key in ("variant", "backoff", "entry_count"):
            if key not in header:
                raise FormatError(f"header missing {key!r}", line=1)
        try:
            backoff = BackoffMode(header["backoff"])
        except ValueError as e:
            raise FormatError(f"unknown backoff mode {header['backoff']!r}", line=1) from e

        entries: dict[str, tuple[Analysis, ...]] = {}
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"bad entry: {e.msg}", line=line_no) from e
            word = record.get("word")
            analyses = record.get("analyses")
            if not isinstance(word, str) or not isinstance(analyses, list) or not analyses:
                raise FormatError("entry needs word and non-empty analyses", line=line_no)
            if word in entries:
                raise FormatError(f"duplicate entry for {word!r}", line=line_no)
            parsed = []
            for a in analyses:
                if not isinstance(a, Mapping) or not isinstance(a.get("feats"), Mapping):
                    raise FormatError(f"malformed analysis for {word!r}", line=line_no)
                parsed.append(
                    Analysis(
                        features=dict(a["feats"]),
                        lex=str(a.get("lex", "UNK")),
                        diac=str(a.get("diac", "UNK")),
                        gloss=None if a.get("gloss") is None else str(a["gloss"]),
                    )
                )
            entries[word] = tuple(parsed)

    expected = header["entry_count"]
    if len(entries) != expected:
        raise FormatError(
            f"truncated DB: header announces {expected} entries, found {len(entries)}"
        )
    return AnalyzerDB(
        schema_ref=str(header["variant"]),
        entries=entries,
        backoff=backoff,
        provenance=str(header.get("provenance", "")),
    )
