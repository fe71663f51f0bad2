"""Fine-tuning of token classifiers over annotated corpora.

Two shapes: FACTORED trains one classification head per schema feature
(each model selected on TUNE by its own feature accuracy, independently of
the others); UNFACTORED trains a single head over the whole-tag strings
observed in training.  Labels sit on the first subword piece of each word;
later pieces carry the ignore index.  With stage-1 corpora configured the
run is two-phase: fine-tune on their concatenation first, then continue on
the target corpus from those weights.

Deterministic for a fixed seed on a single device; nondeterministic kernels
on some accelerators can break bit-level reproducibility.
"""
from __future__ import annotations

import json
import random
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import torch
from transformers import AutoModelForTokenClassification, AutoTokenizer
from transformers.utils import logging as hf_logging

from .errors import FormatError
from .formats import Schema, Sentence, load_schema, read_sentences

hf_logging.set_verbosity_error()
hf_logging.disable_progress_bar()

FACTORED = "factored"
UNFACTORED = "unfactored"
KINDS = (FACTORED, UNFACTORED)

IGNORE_INDEX = -100
LABEL_SPACE_WARN_LIMIT = 5000
ARTIFACT_FORMAT = "bridge-artifact/1"


@dataclass(frozen=True)
class BridgeConfig:
    """One fine-tuning run: input artifacts plus the training knobs."""

    base_model: str
    schema: str
    target_corpus: str
    out_dir: str
    kind: str = FACTORED
    epochs: int = 10
    learning_rate: float = 5e-5
    batch_size: int = 32
    max_seq_len: int = 512
    seed: int = 12345
    tune_corpus: str | None = None
    stage1_corpora: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        for name in ("epochs", "batch_size", "max_seq_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        object.__setattr__(self, "stage1_corpora", tuple(self.stage1_corpora))


def encode_words(
    tokenizer, batch_words: Sequence[Sequence[str]], max_seq_len: int
):
    """Tokenize pre-split sentences; pad to the batch longest."""
    return tokenizer(
        [list(words) for words in batch_words],
        is_split_into_words=True,
        truncation=True,
        max_length=max_seq_len,
        padding="longest",
        return_tensors="pt",
    )


def first_subword_positions(encoding, row: int) -> dict[int, int]:
    """Word index -> position of its first subword piece in the row."""
    positions: dict[int, int] = {}
    for pos, word_id in enumerate(encoding.word_ids(row)):
        if word_id is not None and word_id not in positions:
            positions[word_id] = pos
    return positions


def _aligned_labels(encoding, batch_labels: Sequence[Sequence[int]]) -> torch.Tensor:
    labels = torch.full(encoding["input_ids"].shape, IGNORE_INDEX, dtype=torch.long)
    for row, word_labels in enumerate(batch_labels):
        for word_id, pos in first_subword_positions(encoding, row).items():
            labels[row, pos] = word_labels[word_id]
    return labels


def _accuracy(model, tokenizer, sentences, gold: Sequence[Sequence[str]],
              labels: Sequence[str], config: BridgeConfig) -> float:
    """Word-level accuracy over the gold strings; truncated words skipped."""
    model.eval()
    correct = 0
    total = 0
    with torch.no_grad():
        for start in range(0, len(sentences), config.batch_size):
            chunk = sentences[start : start + config.batch_size]
            enc = encode_words(tokenizer, [s.words for s in chunk], config.max_seq_len)
            logits = model(input_ids=enc["input_ids"], attention_mask=enc["attention_mask"]).logits
            picks = logits.argmax(dim=-1)
            for row, sent in enumerate(chunk):
                sent_gold = gold[start + row]
                for word_id, pos in first_subword_positions(enc, row).items():
                    total += 1
                    if labels[picks[row, pos].item()] == sent_gold[word_id]:
                        correct += 1
    return correct / total if total else 0.0


def _train_one(
    init_source: str,
    tokenizer,
    train_sentences: Sequence[Sentence],
    train_label_ids: Sequence[Sequence[int]],
    labels: Sequence[str],
    tune_sentences: Sequence[Sentence] | None,
    tune_gold: Sequence[Sequence[str]] | None,
    config: BridgeConfig,
    out_dir: Path,
) -> dict:
    """Fine-tune one head, checkpoint each epoch, keep the TUNE-best."""
    torch.manual_seed(config.seed)
    model = AutoModelForTokenClassification.from_pretrained(
        init_source, num_labels=len(labels)
    )
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
    checkpoints = out_dir / "checkpoints"
    history: list[float | None] = []
    order = list(range(len(train_sentences)))
    for epoch in range(config.epochs):
        random.Random(config.seed + epoch).shuffle(order)
        model.train()
        for start in range(0, len(order), config.batch_size):
            index = order[start : start + config.batch_size]
            enc = encode_words(
                tokenizer, [train_sentences[i].words for i in index], config.max_seq_len
            )
            enc["labels"] = _aligned_labels(enc, [train_label_ids[i] for i in index])
            optimizer.zero_grad()
            out = model(**enc)
            out.loss.backward()
            optimizer.step()
        model.save_pretrained(checkpoints / f"epoch-{epoch:03d}")
        if tune_sentences is None:
            history.append(None)
        else:
            history.append(
                _accuracy(model, tokenizer, tune_sentences, tune_gold, labels, config)
            )

    if tune_sentences is None:
        selected = config.epochs - 1
    else:
        selected = 0
        for epoch, score in enumerate(history):
            if score > history[selected]:
                selected = epoch
    best = AutoModelForTokenClassification.from_pretrained(
        checkpoints / f"epoch-{selected:03d}"
    )
    best.save_pretrained(out_dir / "model")
    meta = {
        "labels": list(labels),
        "history": history,
        "selected_epoch": selected,
        "tune_accuracy": history[selected],
    }
    (out_dir / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return meta


def _factored_gold(sentences: Sequence[Sentence], feature: str) -> list[list[str]]:
    return [[bundle[feature] for bundle in s.bundles] for s in sentences]


def _unfactored_gold(sentences: Sequence[Sentence], schema: Schema) -> list[list[str]]:
    return [[schema.serialize(bundle) for bundle in s.bundles] for s in sentences]


def _unfactored_labels(corpora: Sequence[Sequence[Sentence]], schema: Schema) -> list[str]:
    tags = {
        schema.serialize(bundle)
        for sentences in corpora
        for s in sentences
        for bundle in s.bundles
    }
    if len(tags) > LABEL_SPACE_WARN_LIMIT:
        warnings.warn(
            f"unfactored label space has {len(tags)} tags "
            f"(limit {LABEL_SPACE_WARN_LIMIT}); expect sparse heads",
            stacklevel=2,
        )
    return sorted(tags)


def _train_suite(
    schema: Schema,
    train_sentences: Sequence[Sentence],
    tune_sentences: Sequence[Sentence] | None,
    unfactored_label_list: Sequence[str] | None,
    config: BridgeConfig,
    tokenizer,
    out: Path,
    init_artifact: Path | None,
    stage1_rel: str | None,
) -> dict:
    """Train every model of one phase and write the artifact manifest."""
    models_dir = out / "models"
    trained: dict[str, dict] = {}
    if config.kind == FACTORED:
        for feature in schema.feature_names():
            labels = list(schema.feature(feature).values)
            index = {value: i for i, value in enumerate(labels)}
            label_ids = [
                [index[bundle[feature]] for bundle in s.bundles] for s in train_sentences
            ]
            init = (
                str(init_artifact / "models" / feature / "model")
                if init_artifact
                else config.base_model
            )
            trained[feature] = _train_one(
                init,
                tokenizer,
                train_sentences,
                label_ids,
                labels,
                tune_sentences,
                _factored_gold(tune_sentences, feature) if tune_sentences else None,
                config,
                models_dir / feature,
            )
    else:
        labels = list(unfactored_label_list)
        index = {tag: i for i, tag in enumerate(labels)}
        label_ids = [
            [index[schema.serialize(bundle)] for bundle in s.bundles]
            for s in train_sentences
        ]
        init = (
            str(init_artifact / "models" / UNFACTORED / "model")
            if init_artifact
            else config.base_model
        )
        trained[UNFACTORED] = _train_one(
            init,
            tokenizer,
            train_sentences,
            label_ids,
            labels,
            tune_sentences,
            _unfactored_gold(tune_sentences, schema) if tune_sentences else None,
            config,
            models_dir / UNFACTORED,
        )

    manifest = {
        "format": ARTIFACT_FORMAT,
        "kind": config.kind,
        "variant": schema.variant,
        "base_model": config.base_model,
        "max_seq_len": config.max_seq_len,
        "models": sorted(trained),
        "stage1_artifact": stage1_rel,
        "config": asdict(config),
        "selected_epochs": {name: meta["selected_epoch"] for name, meta in trained.items()},
    }
    (out / "meta.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def finetune(config: BridgeConfig) -> dict:
    """Run one (optionally two-phase) fine-tuning job; returns the manifest.

    The artifact directory holds ``tokenizer/``, ``models/<name>/`` with
    per-epoch ``checkpoints/`` and the selected ``model/``, a ``meta.json``
    manifest, and ``stage1/`` (same shape) for two-phase runs.
    """
    schema = load_schema(config.schema)
    target = read_sentences(config.target_corpus, schema)
    tune = read_sentences(config.tune_corpus, schema) if config.tune_corpus else None
    stage1_sets = [read_sentences(path, schema) for path in config.stage1_corpora]

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tokenizer = AutoTokenizer.from_pretrained(config.base_model)
    tokenizer.save_pretrained(out / "tokenizer")

    unfactored_labels = None
    if config.kind == UNFACTORED:
        unfactored_labels = _unfactored_labels([target, *stage1_sets], schema)

    init_artifact = None
    stage1_rel = None
    if stage1_sets:
        stage1_sentences = [s for sentences in stage1_sets for s in sentences]
        _train_suite(
            schema,
            stage1_sentences,
            tune,
            unfactored_labels,
            config,
            tokenizer,
            out / "stage1",
            init_artifact=None,
            stage1_rel=None,
        )
        init_artifact = out / "stage1"
        stage1_rel = "stage1"

    return _train_suite(
        schema,
        target,
        tune,
        unfactored_labels,
        config,
        tokenizer,
        out,
        init_artifact=init_artifact,
        stage1_rel=stage1_rel,
    ) | {"path": str(out)}
