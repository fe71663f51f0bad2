"""Turn fine-tuned artifacts into interchange distribution files.

Every vector is a softmax over one head's logits read at each word's first
subword position.  Factored artifacts emit one vector per feature;
unfactored artifacts emit per-feature marginals (summing tag probabilities
by the value they assign) plus the ten most probable whole tags.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import torch
from transformers import AutoModelForTokenClassification, AutoTokenizer
from transformers.utils import logging as hf_logging

from .errors import AlignmentError, FormatError
from .formats import (
    Schema,
    Sentence,
    SentenceDistribution,
    TokenDistribution,
    load_schema,
    read_sentences,
    split_tag,
    write_distributions,
)
from .training import FACTORED, UNFACTORED, encode_words, first_subword_positions

hf_logging.set_verbosity_error()
hf_logging.disable_progress_bar()

TOP_K = 10


@dataclass(frozen=True)
class Artifact:
    """A loaded fine-tuning run: tokenizer plus one model per head."""

    kind: str
    variant: str
    max_seq_len: int
    tokenizer: object
    models: dict[str, tuple[object, tuple[str, ...]]]


def load_artifact(path: str | Path) -> Artifact:
    root = Path(path)
    manifest_path = root / "meta.json"
    if not manifest_path.exists():
        raise FormatError(f"no artifact manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    tokenizer = AutoTokenizer.from_pretrained(root / "tokenizer")
    models = {}
    for name in manifest["models"]:
        model_dir = root / "models" / name
        meta = json.loads((model_dir / "meta.json").read_text(encoding="utf-8"))
        model = AutoModelForTokenClassification.from_pretrained(model_dir / "model")
        model.eval()
        models[name] = (model, tuple(meta["labels"]))
    return Artifact(
        kind=manifest["kind"],
        variant=manifest["variant"],
        max_seq_len=int(manifest["max_seq_len"]),
        tokenizer=tokenizer,
        models=models,
    )


def _first_positions_strict(encoding, row: int, words: Sequence[str]) -> list[int]:
    positions = first_subword_positions(encoding, row)
    missing = [words[i] for i in range(len(words)) if i not in positions]
    if missing:
        raise AlignmentError(
            f"no subword position for {missing[:3]!r}; "
            "sentence exceeds max_seq_len or tokenizer does not match"
        )
    return [positions[i] for i in range(len(words))]


def _head_probabilities(
    model, encoding, rows_positions: Sequence[Sequence[int]]
) -> list[list[list[float]]]:
    with torch.no_grad():
        logits = model(
            input_ids=encoding["input_ids"], attention_mask=encoding["attention_mask"]
        ).logits
        probs = torch.softmax(logits, dim=-1)
    out = []
    for row, positions in enumerate(rows_positions):
        out.append([probs[row, pos].tolist() for pos in positions])
    return out


def compute_distributions(
    artifact: Artifact,
    schema: Schema,
    sentences: Sequence[Sentence],
    batch_size: int = 32,
) -> list[SentenceDistribution]:
    if artifact.variant != schema.variant:
        raise FormatError(
            f"artifact was trained for variant {artifact.variant!r}, "
            f"corpus schema is {schema.variant!r}"
        )
    results: list[SentenceDistribution] = []
    for start in range(0, len(sentences), batch_size):
        chunk = sentences[start : start + batch_size]
        enc = encode_words(
            artifact.tokenizer, [s.words for s in chunk], artifact.max_seq_len
        )
        rows_positions = [
            _first_positions_strict(enc, row, sent.words)
            for row, sent in enumerate(chunk)
        ]
        per_model = {
            name: _head_probabilities(model, enc, rows_positions)
            for name, (model, _) in artifact.models.items()
        }
        for row, sent in enumerate(chunk):
            tokens = []
            for wi, raw in enumerate(sent.words):
                if artifact.kind == FACTORED:
                    feats = {}
                    for name, (_, labels) in artifact.models.items():
                        vector = per_model[name][row][wi]
                        feats[name] = {value: vector[i] for i, value in enumerate(labels)}
                    tokens.append(TokenDistribution(raw=raw, feats=feats))
                else:
                    _, labels = artifact.models[UNFACTORED]
                    vector = per_model[UNFACTORED][row][wi]
                    tag_probs = {tag: vector[i] for i, tag in enumerate(labels)}
                    feats: dict[str, dict[str, float]] = {
                        name: {} for name in schema.feature_names()
                    }
                    for tag, p in tag_probs.items():
                        for name, value in split_tag(tag, schema).items():
                            feats[name][value] = feats[name].get(value, 0.0) + p
                    top = sorted(tag_probs.items(), key=lambda kv: (-kv[1], kv[0]))[:TOP_K]
                    tokens.append(
                        TokenDistribution(raw=raw, feats=feats, unfactored=dict(top))
                    )
            results.append(SentenceDistribution(id=sent.id, tokens=tuple(tokens)))
    return results


def predictions(
    distributions: Sequence[SentenceDistribution], schema: Schema
) -> list[list[dict[str, str]]]:
    """Bridge-side decode: argmax bundle per token, ties to the lower value.

    Unfactored tokens take the most probable whole tag's fields; factored
    tokens take each feature's argmax independently.
    """
    decoded = []
    for sent in distributions:
        bundles = []
        for tok in sent.tokens:
            if tok.unfactored:
                best = min(tok.unfactored, key=lambda t: (-tok.unfactored[t], t))
                bundles.append(split_tag(best, schema))
            else:
                bundles.append(
                    {
                        name: min(vector, key=lambda v: (-vector[v], v))
                        for name, vector in tok.feats.items()
                    }
                )
        decoded.append(bundles)
    return decoded


def export_distributions(
    artifact_dir: str | Path,
    corpus_path: str | Path,
    schema_path: str | Path,
    out_path: str | Path,
    batch_size: int = 32,
) -> dict:
    """Run an artifact over a corpus and write the interchange file."""
    schema = load_schema(schema_path)
    artifact = load_artifact(artifact_dir)
    sentences = read_sentences(corpus_path, schema)
    distributions = compute_distributions(artifact, schema, sentences, batch_size)
    write_distributions(distributions, out_path)
    return {
        "path": str(out_path),
        "sentences": len(distributions),
        "tokens": sum(len(s.tokens) for s in distributions),
        "kind": artifact.kind,
    }
