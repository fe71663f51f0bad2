"""Per-token tag distributions from a built-in classifier or external files.

The built-in model is a greedy left-to-right averaged linear classifier, one
per label space: either one classifier per schema feature (factored) or a
single classifier over the unfactored tags observed in training.  Scores are
mapped to probabilities by exponentiation and normalization, so downstream
code always sees proper distributions regardless of where they came from.

Distribution interchange files let externally produced classifiers (e.g. a
fine-tuned transformer exported by a companion package) feed the same
pipeline: one JSON record per sentence, ``{"id": ..., "tokens": [{"raw": ...,
"feats": {feature: {value: prob}}, "unfactored": {tag: prob}}]}``, with
probabilities written as decimal text carrying at least 8 significant digits.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import Corpus
from .errors import (
    AlignmentError,
    EmptyCorpus,
    FormatError,
    NormalizationError,
    SchemaMismatch,
    VersionError,
)
from .schema import FeatureSchema, load_schema, parse_unfactored, serialize_unfactored

FACTORED = "factored"
UNFACTORED = "unfactored"
KINDS = (FACTORED, UNFACTORED)

MODEL_FORMAT_VERSION = "1"
SUM_TOLERANCE = 1e-4

_TAG_SPACE = "__tag__"
_BOUNDARY = "<s>"


@dataclass(frozen=True)
class FeatureDistribution:
    """Per-token probabilities: one vector per feature, optional tag vector.

    ``per_feature`` is complete over the schema's features.  ``unfactored``
    is present for unfactored models and external files that provide it; it
    may be top-k truncated, so it need not sum to 1.
    """

    per_feature: Mapping[str, Mapping[str, float]]
    unfactored: Mapping[str, float] | None = None

    def feature_argmax(self, feature: str) -> str:
        vector = self.per_feature[feature]
        return min(vector, key=lambda v: (-vector[v], v))

    def argmax_tag(self) -> str:
        if not self.unfactored:
            raise ValueError("no unfactored distribution present")
        return min(self.unfactored, key=lambda t: (-self.unfactored[t], t))

    def argmax_bundle(self, schema: FeatureSchema) -> dict[str, str]:
        """Most probable bundle: the argmax tag's fields when an unfactored
        vector exists, otherwise the per-feature argmax values."""
        if self.unfactored:
            return parse_unfactored(self.argmax_tag(), schema)
        return {name: self.feature_argmax(name) for name in self.per_feature}


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    seed: int = 12345
    init: "TaggerModel | None" = None
    top_k: int = 10


@dataclass
class TaggerModel:
    """Trained classifier bundle; treat as immutable once returned."""

    kind: str
    schema: FeatureSchema
    labels: dict[str, tuple[str, ...]]
    weights: dict[str, dict[str, dict[str, float]]]
    meta: dict
    history: tuple[float, ...] = ()
    checkpoints: tuple[dict, ...] = field(default=(), repr=False)

    @property
    def spaces(self) -> tuple[str, ...]:
        return tuple(sorted(self.labels))

    def core_feature(self) -> str:
        names = self.schema.feature_names()
        return "pos" if "pos" in names else names[0]

    def at_epoch(self, index: int) -> "TaggerModel":
        """Model with the averaged weights checkpointed after epoch ``index``."""
        if not 0 <= index < len(self.checkpoints):
            raise IndexError(f"no checkpoint for epoch {index}")
        meta = dict(self.meta, selected_epoch=index)
        return replace(self, weights=self.checkpoints[index], meta=meta)


def _extract(forms: Sequence[str], i: int, prev_core: str) -> tuple[str, ...]:
    form = forms[i]
    feats = [
        "bias",
        f"w={form}",
        f"lower={form.lower()}",
        f"prev_w={forms[i - 1] if i > 0 else _BOUNDARY}",
        f"next_w={forms[i + 1] if i + 1 < len(forms) else _BOUNDARY}",
        f"prev_core={prev_core}",
    ]
    for n in (1, 2, 3):
        if len(form) >= n:
            feats.append(f"pre{n}={form[:n]}")
            feats.append(f"suf{n}={form[-n:]}")
    if i == 0:
        feats.append("first")
    if i + 1 == len(forms):
        feats.append("last")
    return tuple(feats)


def _scores(
    weights: Mapping[str, Mapping[str, float]],
    labels: Sequence[str],
    feats: Sequence[str],
) -> dict[str, float]:
    scores = {label: 0.0 for label in labels}
    for f in feats:
        table = weights.get(f)
        if not table:
            continue
        for label, w in table.items():
            scores[label] += w
    return scores


def _argmax(scores: Mapping[str, float], labels: Sequence[str]) -> str:
    # labels are sorted, so ties resolve to the lexicographically smallest
    best, best_score = labels[0], scores[labels[0]]
    for label in labels[1:]:
        s = scores[label]
        if s > best_score:
            best, best_score = label, s
    return best


def _softmax(scores: Mapping[str, float]) -> dict[str, float]:
    peak = max(scores.values())
    exps = {label: math.exp(s - peak) for label, s in scores.items()}
    total = sum(exps.values())
    return {label: e / total for label, e in exps.items()}


class _OnlineClassifier:
    """Averaged perceptron over one label space."""

    def __init__(self, labels: Sequence[str], warm: Mapping | None = None):
        self.labels = tuple(sorted(labels))
        self.w: dict[str, dict[str, float]] = {}
        if warm:
            for f, table in warm.items():
                self.w[f] = dict(table)
        self.totals: dict[str, dict[str, float]] = {}
        self.stamps: dict[str, dict[str, int]] = {}
        self.t = 0

    def predict(self, feats: Sequence[str]) -> str:
        return _argmax(_scores(self.w, self.labels, feats), self.labels)

    def _bump(self, f: str, label: str, delta: float) -> None:
        row = self.w.setdefault(f, {})
        trow = self.totals.setdefault(f, {})
        srow = self.stamps.setdefault(f, {})
        current = row.get(label, 0.0)
        trow[label] = trow.get(label, 0.0) + (self.t - srow.get(label, 0)) * current
        srow[label] = self.t
        row[label] = current + delta

    def update(self, gold: str, pred: str, feats: Sequence[str]) -> None:
        if gold == pred:
            return
        for f in feats:
            self._bump(f, gold, 1.0)
            self._bump(f, pred, -1.0)

    def averaged(self) -> dict[str, dict[str, float]]:
        if self.t == 0:
            return {f: dict(t) for f, t in self.w.items()}
        out: dict[str, dict[str, float]] = {}
        for f, row in self.w.items():
            trow = self.totals.get(f, {})
            srow = self.stamps.get(f, {})
            avg_row = {}
            for label, current in row.items():
                total = trow.get(label, 0.0) + (self.t - srow.get(label, 0)) * current
                value = total / self.t
                if value != 0.0:
                    avg_row[label] = value
            if avg_row:
                out[f] = avg_row
        return out


def _gold_labels(token, schema: FeatureSchema, kind: str) -> dict[str, str]:
    filled = token.analysis.filled(schema)
    if kind == FACTORED:
        return filled
    return {_TAG_SPACE: serialize_unfactored(filled, schema)}


def train(
    corpus: Corpus, schema: FeatureSchema, kind: str, config: TrainConfig = TrainConfig()
) -> TaggerModel:
    """Train the built-in classifier; deterministic for a fixed seed.

    ``config.init`` warm-starts from another model of the same kind and
    schema: weights are copied in and, for unfactored models, the label space
    becomes the union of the observed and inherited tags.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown tagger kind {kind!r}")
    if corpus.token_count() == 0:
        raise EmptyCorpus("cannot train on an empty corpus")
    if corpus.schema_ref != schema.variant:
        raise SchemaMismatch(
            f"corpus schema {corpus.schema_ref!r} != {schema.variant!r}"
        )
    init = config.init
    if init is not None:
        if init.kind != kind:
            raise SchemaMismatch(f"cannot continue {init.kind} model as {kind}")
        if init.schema.to_document() != schema.to_document():
            raise SchemaMismatch("continued training requires an identical schema")
    try:
        corpus.validate(schema)
    except Exception as e:
        raise SchemaMismatch(str(e)) from e

    core = "pos" if schema.has_feature("pos") else schema.feature_names()[0]
    if kind == FACTORED:
        spaces = {
            f.name: sorted(f.values) for f in schema.features
        }
    else:
        observed = {
            serialize_unfactored(t.analysis.features, schema)
            for t in corpus.iter_tokens()
        }
        if init is not None:
            observed.update(init.labels[_TAG_SPACE])
        spaces = {_TAG_SPACE: sorted(observed)}

    classifiers = {
        name: _OnlineClassifier(labels, warm=init.weights.get(name) if init else None)
        for name, labels in spaces.items()
    }

    rng = random.Random(config.seed)
    order = list(range(len(corpus.sentences)))
    history: list[float] = []
    checkpoints: list[dict] = []
    for _ in range(config.epochs):
        rng.shuffle(order)
        hit = 0
        seen = 0
        for si in order:
            sentence = corpus.sentences[si]
            if not sentence.tokens:
                continue
            forms = [t.raw for t in sentence.tokens]
            prev_core = _BOUNDARY
            for i, token in enumerate(sentence.tokens):
                feats = _extract(forms, i, prev_core)
                golds = _gold_labels(token, schema, kind)
                token_ok = True
                core_pred = prev_core
                for name in sorted(classifiers):
                    clf = classifiers[name]
                    pred = clf.predict(feats)
                    clf.update(golds[name], pred, feats)
                    clf.t += 1
                    if pred != golds[name]:
                        token_ok = False
                    if kind == FACTORED and name == core:
                        core_pred = pred
                    elif kind == UNFACTORED:
                        core_pred = parse_unfactored(pred, schema)[core]
                prev_core = core_pred
                seen += 1
                hit += token_ok
        history.append(hit / seen if seen else 0.0)
        checkpoints.append({name: clf.averaged() for name, clf in classifiers.items()})

    meta = {
        "epochs": config.epochs,
        "seed": config.seed,
        "top_k": config.top_k,
        "source_corpora": [corpus.split],
        "continued": init is not None,
        "selected_epoch": config.epochs - 1,
    }
    if init is not None:
        meta["source_corpora"] = list(init.meta.get("source_corpora", [])) + [corpus.split]
    return TaggerModel(
        kind=kind,
        schema=schema,
        labels={name: tuple(labels) for name, labels in spaces.items()},
        weights=checkpoints[-1],
        meta=meta,
        history=tuple(history),
        checkpoints=tuple(checkpoints),
    )


def predict(model: TaggerModel, forms: Sequence[str]) -> list[FeatureDistribution]:
    """One FeatureDistribution per token, greedy left to right.

    Factored models fill every feature vector directly; unfactored models
    emit a top-k tag vector plus per-feature marginals summed over the full
    tag distribution.
    """
    schema = model.schema
    core = model.core_feature()
    top_k = int(model.meta.get("top_k", 10))
    out: list[FeatureDistribution] = []
    if model.kind == UNFACTORED:
        tag_bundles = {
            tag: parse_unfactored(tag, schema) for tag in model.labels[_TAG_SPACE]
        }
    prev_core = _BOUNDARY
    for i in range(len(forms)):
        feats = _extract(forms, i, prev_core)
        if model.kind == FACTORED:
            per_feature = {}
            for name in schema.feature_names():
                scores = _scores(model.weights.get(name, {}), model.labels[name], feats)
                per_feature[name] = _softmax(scores)
            dist = FeatureDistribution(per_feature=per_feature)
            prev_core = dist.feature_argmax(core)
        else:
            labels = model.labels[_TAG_SPACE]
            probs = _softmax(_scores(model.weights.get(_TAG_SPACE, {}), labels, feats))
            per_feature: dict[str, dict[str, float]] = {
                f.name: {} for f in schema.features
            }
            for tag, p in probs.items():
                bundle = tag_bundles[tag]
                for name, value in bundle.items():
                    row = per_feature[name]
                    row[value] = row.get(value, 0.0) + p
            for row in per_feature.values():
                for value, p in row.items():
                    # summation rounding may overshoot 1 by a few ulps
                    row[value] = min(p, 1.0)
            top = sorted(probs.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
            dist = FeatureDistribution(per_feature=per_feature, unfactored=dict(top))
            prev_core = tag_bundles[dist.argmax_tag()][core]
        out.append(dist)
    return out


def distributions_for_corpus(
    model: TaggerModel, corpus: Corpus
) -> list[SentenceDistributions]:
    return [
        SentenceDistributions(
            id=s.id,
            raws=tuple(t.raw for t in s.tokens),
            distributions=tuple(predict(model, [t.raw for t in s.tokens])),
        )
        for s in corpus.sentences
    ]


def save_model(model: TaggerModel, path: str | Path) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "schema": model.schema.to_document(),
        "labels": {name: list(labels) for name, labels in model.labels.items()},
        "weights": model.weights,
        "meta": model.meta,
        "history": list(model.history),
    }
    Path(path).write_text(
        json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False),
        encoding="utf-8",
    )


def load_model(path: str | Path) -> TaggerModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"bad model file: {e.msg}") from e
    version = str(doc.get("format_version", ""))
    if version != MODEL_FORMAT_VERSION:
        raise VersionError(f"unsupported model version {version!r}")
    for key in ("kind", "schema", "labels", "weights", "meta"):
        if key not in doc:
            raise FormatError(f"model file missing {key!r}")
    return TaggerModel(
        kind=doc["kind"],
        schema=load_schema(doc["schema"]),
        labels={name: tuple(v) for name, v in doc["labels"].items()},
        weights=doc["weights"],
        meta=doc["meta"],
        history=tuple(doc.get("history", ())),
    )


@dataclass(frozen=True)
class SentenceDistributions:
    id: str
    raws: tuple[str, ...]
    distributions: tuple[FeatureDistribution, ...]


def format_probability(p: float) -> str:
    """Exact round-trip decimal text, padded to >= 8 significant digits."""
    text = repr(float(p))
    mantissa, _, exponent = text.partition("e")
    digits = "".join(ch for ch in mantissa if ch.isdigit()).lstrip("0")
    significant = max(len(digits), 1)
    if significant < 8:
        if "." not in mantissa:
            mantissa += "."
        mantissa += "0" * (8 - significant)
    return mantissa + (f"e{exponent}" if exponent else "")


def _dump_vector(vector: Mapping[str, float]) -> str:
    pairs = ",".join(
        f"{json.dumps(key, ensure_ascii=False)}:{format_probability(vector[key])}"
        for key in sorted(vector)
    )
    return "{" + pairs + "}"


def dumps_distribution(sent: SentenceDistributions) -> str:
    tokens = []
    for raw, dist in zip(sent.raws, sent.distributions):
        feats = ",".join(
            f"{json.dumps(name, ensure_ascii=False)}:{_dump_vector(dist.per_feature[name])}"
            for name in sorted(dist.per_feature)
        )
        parts = [f'"feats":{{{feats}}}', f'"raw":{json.dumps(raw, ensure_ascii=False)}']
        if dist.unfactored is not None:
            parts.append(f'"unfactored":{_dump_vector(dist.unfactored)}')
        tokens.append("{" + ",".join(parts) + "}")
    return f'{{"id":{json.dumps(sent.id, ensure_ascii=False)},"tokens":[{",".join(tokens)}]}}'


def save_distributions(
    sentences: Iterable[SentenceDistributions], path: str | Path
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sent in sentences:
            fh.write(dumps_distribution(sent) + "\n")


def _validated_vector(
    raw_vector, where: str, line: int, renormalize: bool
) -> dict[str, float]:
    if not isinstance(raw_vector, Mapping) or not raw_vector:
        raise FormatError(f"{where}: empty or malformed vector", line=line)
    vector = {}
    for key, value in raw_vector.items():
        if not isinstance(key, str) or not isinstance(value, (int, float)):
            raise FormatError(f"{where}: bad entry {key!r}", line=line)
        p = float(value)
        if p < 0.0 or p > 1.0 + SUM_TOLERANCE:
            raise NormalizationError(f"{where}: probability {p!r} outside [0, 1]")
        vector[key] = min(p, 1.0)
    total = sum(vector.values())
    if renormalize:
        if abs(total - 1.0) > SUM_TOLERANCE or total <= 0.0:
            raise NormalizationError(
                f"{where}: vector sums to {total!r}, expected 1 within {SUM_TOLERANCE}"
            )
        return {k: v / total for k, v in vector.items()}
    if total > 1.0 + SUM_TOLERANCE:
        raise NormalizationError(f"{where}: truncated vector sums to {total!r} > 1")
    return vector


def load_external_distributions(
    path: str | Path,
    schema: FeatureSchema,
    corpus: Corpus | None = None,
) -> list[SentenceDistributions]:
    """Read an interchange file, validating against the schema.

    Per-feature vectors must cover every schema feature, carry only legal
    values, and sum to 1 within 1e-4 (renormalized on load).  When ``corpus``
    is given, sentence ids, token counts, and raw forms must line up with it.
    """
    feature_names = schema.feature_names()
    sentences: list[SentenceDistributions] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"not valid JSON: {e.msg}", line=line_no) from e
            if not isinstance(record, Mapping):
                raise FormatError("record must be an object", line=line_no)
            sid = record.get("id")
            tokens = record.get("tokens")
            if not isinstance(sid, str) or not isinstance(tokens, list):
                raise FormatError("record needs id and tokens", line=line_no)
            raws: list[str] = []
            dists: list[FeatureDistribution] = []
            for ti, token in enumerate(tokens):
                if not isinstance(token, Mapping):
                    raise FormatError(f"token {ti} malformed", line=line_no)
                raw = token.get("raw")
                feats = token.get("feats")
                if not isinstance(raw, str) or not isinstance(feats, Mapping):
                    raise FormatError(
                        f"token {ti} needs raw and feats", line=line_no
                    )
                unknown = set(feats) - set(feature_names)
                if unknown:
                    raise FormatError(
                        f"token {raw!r}: unknown features {sorted(unknown)}",
                        line=line_no,
                    )
                missing = set(feature_names) - set(feats)
                if missing:
                    raise FormatError(
                        f"token {raw!r}: missing features {sorted(missing)}",
                        line=line_no,
                    )
                per_feature = {}
                for name in feature_names:
                    where = f"token {raw!r} feature {name}"
                    vector = _validated_vector(feats[name], where, line_no, True)
                    legal = schema.feature(name).values
                    bad = set(vector) - legal
                    if bad:
                        raise FormatError(
                            f"{where}: illegal values {sorted(bad)}", line=line_no
                        )
                    per_feature[name] = vector
                unfactored = None
                if token.get("unfactored") is not None:
                    unfactored = _validated_vector(
                        token["unfactored"], f"token {raw!r} unfactored", line_no, False
                    )
                    for tag in unfactored:
                        try:
                            parse_unfactored(tag, schema)
                        except Exception as e:
                            raise FormatError(
                                f"token {raw!r}: bad unfactored tag {tag!r}: {e}",
                                line=line_no,
                            ) from e
                raws.append(raw)
                dists.append(
                    FeatureDistribution(per_feature=per_feature, unfactored=unfactored)
                )
            sentences.append(
                SentenceDistributions(
                    id=sid, raws=tuple(raws), distributions=tuple(dists)
                )
            )
    if corpus is not None:
        if len(sentences) != len(corpus.sentences):
            raise AlignmentError(
                f"{len(sentences)} distribution records vs "
                f"{len(corpus.sentences)} corpus sentences"
            )
        for sent, ref in zip(sentences, corpus.sentences):
            if sent.id != ref.id:
                raise AlignmentError(f"sentence id {sent.id!r} != corpus {ref.id!r}")
            if len(sent.raws) != len(ref.tokens):
                raise AlignmentError(
                    f"sentence {sent.id!r}: {len(sent.raws)} tokens vs "
                    f"{len(ref.tokens)} in corpus"
                )
            for raw, token in zip(sent.raws, ref.tokens):
                if raw != token.raw:
                    raise AlignmentError(
                        f"sentence {sent.id!r}: form {raw!r} != corpus {token.raw!r}"
                    )
    return sentences
