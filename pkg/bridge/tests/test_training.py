"""Fine-tuning behavior: label spaces, selection, checkpoints, phases."""
from __future__ import annotations

import json

import pytest
import torch
from transformers import AutoModelForTokenClassification

from morphdis_bridge import BridgeConfig, FormatError, UNFACTORED, finetune
from morphdis_bridge import training as training_module


def tiny_config(tiny, out, **overrides) -> BridgeConfig:
    defaults = dict(
        base_model=str(tiny / "base"),
        schema=str(tiny / "toy.json"),
        target_corpus=str(tiny / "train.jsonl"),
        out_dir=str(out),
        kind=UNFACTORED,
        epochs=1,
        batch_size=8,
        seed=12345,
        tune_corpus=str(tiny / "tune.jsonl"),
    )
    defaults.update(overrides)
    return BridgeConfig(**defaults)


class TestConfig:
    def test_defaults(self):
        config = BridgeConfig(base_model="b", schema="s", target_corpus="t", out_dir="o")
        assert config.epochs == 10
        assert config.learning_rate == 5e-5
        assert config.batch_size == 32
        assert config.max_seq_len == 512
        assert config.seed == 12345

    @pytest.mark.parametrize(
        "overrides",
        [
            {"kind": "joint"},
            {"epochs": 0},
            {"batch_size": 0},
            {"max_seq_len": 0},
            {"learning_rate": 0.0},
        ],
    )
    def test_invalid_rejected(self, overrides):
        with pytest.raises(ValueError):
            BridgeConfig(
                base_model="b", schema="s", target_corpus="t", out_dir="o", **overrides
            )


class TestUnfactoredHead:
    def test_head_dimension_matches_observed_tags(self, tiny, tmp_path):
        # the fixture corpus contains exactly five distinct whole tags
        manifest = finetune(tiny_config(tiny, tmp_path / "run"))
        meta = json.loads(
            (tmp_path / "run" / "models" / UNFACTORED / "meta.json").read_text()
        )
        assert len(meta["labels"]) == 5
        model = AutoModelForTokenClassification.from_pretrained(
            tmp_path / "run" / "models" / UNFACTORED / "model"
        )
        assert model.classifier.out_features == 5
        assert manifest["models"] == [UNFACTORED]

    def test_label_overflow_warns(self, tiny, tmp_path, monkeypatch):
        monkeypatch.setattr(training_module, "LABEL_SPACE_WARN_LIMIT", 2)
        with pytest.warns(UserWarning, match="label space"):
            finetune(tiny_config(tiny, tmp_path / "run"))


class TestSelection:
    def test_selected_epoch_is_tune_argmax(self, tiny, tmp_path):
        finetune(tiny_config(tiny, tmp_path / "run", epochs=3))
        meta = json.loads(
            (tmp_path / "run" / "models" / UNFACTORED / "meta.json").read_text()
        )
        history = meta["history"]
        assert len(history) == 3
        best = max(range(3), key=lambda i: (history[i], -i))
        assert meta["selected_epoch"] == best
        assert meta["tune_accuracy"] == history[best]

    def test_checkpoint_per_epoch(self, tiny, tmp_path):
        finetune(tiny_config(tiny, tmp_path / "run", epochs=2))
        checkpoints = tmp_path / "run" / "models" / UNFACTORED / "checkpoints"
        assert sorted(p.name for p in checkpoints.iterdir()) == ["epoch-000", "epoch-001"]

    def test_without_tune_last_epoch_selected(self, tiny, tmp_path):
        finetune(tiny_config(tiny, tmp_path / "run", epochs=2, tune_corpus=None))
        meta = json.loads(
            (tmp_path / "run" / "models" / UNFACTORED / "meta.json").read_text()
        )
        assert meta["selected_epoch"] == 1
        assert meta["history"] == [None, None]


class TestFactored:
    def test_one_model_per_feature(self, tiny, tmp_path):
        manifest = finetune(tiny_config(tiny, tmp_path / "run", kind="factored"))
        assert manifest["models"] == ["gen", "pos"]
        for name, cardinality in (("pos", 3), ("gen", 3)):
            model = AutoModelForTokenClassification.from_pretrained(
                tmp_path / "run" / "models" / name / "model"
            )
            assert model.classifier.out_features == cardinality


class TestContinued:
    def test_two_phase_records_stage1_artifact(self, tiny, tmp_path):
        manifest = finetune(
            tiny_config(
                tiny,
                tmp_path / "run",
                stage1_corpora=(str(tiny / "dev.jsonl"), str(tiny / "tune.jsonl")),
            )
        )
        assert manifest["stage1_artifact"] == "stage1"
        stage1_meta = json.loads((tmp_path / "run" / "stage1" / "meta.json").read_text())
        assert stage1_meta["stage1_artifact"] is None
        assert (tmp_path / "run" / "stage1" / "models" / UNFACTORED / "model").is_dir()
        final_meta = json.loads((tmp_path / "run" / "meta.json").read_text())
        assert final_meta["stage1_artifact"] == "stage1"

    def test_stage2_weights_start_from_stage1(self, tiny, tmp_path):
        """The warm start is real: stage-2 epoch 0 differs from a cold epoch 0."""
        cold = finetune(tiny_config(tiny, tmp_path / "cold"))
        warm = finetune(
            tiny_config(tiny, tmp_path / "warm", stage1_corpora=(str(tiny / "dev.jsonl"),))
        )
        assert cold["kind"] == warm["kind"]
        cold_model = AutoModelForTokenClassification.from_pretrained(
            tmp_path / "cold" / "models" / UNFACTORED / "checkpoints" / "epoch-000"
        )
        warm_model = AutoModelForTokenClassification.from_pretrained(
            tmp_path / "warm" / "models" / UNFACTORED / "checkpoints" / "epoch-000"
        )
        different = any(
            not torch.equal(a, b)
            for (_, a), (_, b) in zip(
                cold_model.state_dict().items(), warm_model.state_dict().items()
            )
        )
        assert different


class TestErrors:
    def test_bad_corpus_value(self, tiny, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text(
            '{"id": "s", "tokens": [{"raw": "w", "analysis": {"feats": {"pos": "zzz"}}}]}\n',
            encoding="utf-8",
        )
        with pytest.raises(FormatError):
            finetune(tiny_config(tiny, tmp_path / "run", target_corpus=str(bad)))
