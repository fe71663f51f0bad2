"""Shared fixtures.

The corpus and schema fixtures are produced with the tagging toolkit so the
tests exercise the real file boundary; the bridge code under test never
imports it.
"""
from __future__ import annotations

import json
from pathlib import Path

import pytest

from morphdis.corpus import write_corpus
from morphdis.schema import load_builtin
from morphdis.synth import SyntheticSpec, generate_synthetic

from morphdis_bridge import build_tiny_base_model

TINY_SCHEMA_DOC = {
    "variant": "toy",
    "version": "1",
    "features": [
        {"name": "pos", "values": ["n", "p", "v"], "default": "n"},
        {"name": "gen", "values": ["f", "m", "x"], "default": "m"},
    ],
}


@pytest.fixture(scope="session")
def ws(tmp_path_factory) -> Path:
    """Session workspace: schema, 200-sentence fixture splits, base model."""
    root = tmp_path_factory.mktemp("bridge-ws")
    lev = load_builtin("lev")
    (root / "lev.json").write_text(json.dumps(lev.to_document()), encoding="utf-8")
    data = generate_synthetic(
        SyntheticSpec(
            variant="lev",
            vocabulary=300,
            ambiguity=2.0,
            budget=2_000,
            eval_budget=200,
            seed=12345,
            name="fix",
        )
    )
    write_corpus(data.train, root / "train.jsonl")
    write_corpus(data.tune, root / "tune.jsonl")
    write_corpus(data.dev, root / "dev.jsonl")
    build_tiny_base_model(root / "base")
    return root


@pytest.fixture(scope="session")
def tiny(tmp_path_factory) -> Path:
    """Two-feature schema with a handcrafted five-tag corpus."""
    root = tmp_path_factory.mktemp("bridge-tiny")
    (root / "toy.json").write_text(json.dumps(TINY_SCHEMA_DOC), encoding="utf-8")
    bundles = [
        {"pos": "n", "gen": "m"},
        {"pos": "n", "gen": "f"},
        {"pos": "v", "gen": "m"},
        {"pos": "v", "gen": "f"},
        {"pos": "p", "gen": "m"},
    ]
    words = ["nama", "nafa", "vama", "vafa", "pama"]

    def rows(prefix: str, count: int) -> str:
        lines = []
        for i in range(count):
            tokens = [
                {"raw": words[(i + j) % 5], "analysis": {"feats": bundles[(i + j) % 5]}}
                for j in range(4)
            ]
            lines.append(json.dumps({"id": f"{prefix}-{i:03d}", "tokens": tokens}))
        return "\n".join(lines) + "\n"

    (root / "train.jsonl").write_text(rows("t", 12), encoding="utf-8")
    (root / "tune.jsonl").write_text(rows("u", 4), encoding="utf-8")
    (root / "dev.jsonl").write_text(rows("d", 4), encoding="utf-8")
    build_tiny_base_model(root / "base")
    return root
