import json
import shutil
import subprocess
import sys

import pytest

from morphdis.cli import main
from morphdis.corpus import (
    Analysis,
    AnnotatedToken,
    Corpus,
    Sentence,
    read_corpus,
    write_corpus,
)
from morphdis.analyzer import save_db
from morphdis.schema import load_builtin
from morphdis.synth import SyntheticSpec, generate_synthetic
from morphdis.tagger import (
    FACTORED,
    TrainConfig,
    distributions_for_corpus,
    save_distributions,
    train,
)


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = generate_synthetic(
        SyntheticSpec(
            variant="lev",
            vocabulary=100,
            ambiguity=2.0,
            budget=500,
            sentence_length=10,
            seed=12345,
            name="c",
        )
    )
    paths = {}
    for split, corpus in data.splits().items():
        path = root / f"{split.lower()}.jsonl"
        write_corpus(corpus, path)
        paths[split.lower()] = str(path)
    db_path = root / "analyzer.jsonl"
    save_db(data.db, db_path)

    model = train(data.train, data.schema, FACTORED, TrainConfig(epochs=2))
    dists_path = root / "dev-dists.jsonl"
    save_distributions(distributions_for_corpus(model, data.dev), dists_path)

    # an imperfect prediction file: every analysis collapsed to bare noun
    degraded = Corpus(
        schema_ref=data.dev.schema_ref,
        sentences=tuple(
            Sentence(
                id=s.id,
                tokens=tuple(
                    AnnotatedToken(raw=t.raw, analysis=Analysis(features={"pos": "noun"}))
                    for t in s.tokens
                ),
            )
            for s in data.dev.sentences
        ),
        split="DEV",
    )
    degraded_path = root / "degraded.jsonl"
    write_corpus(degraded, degraded_path)

    return {
        "root": root,
        "data": data,
        "paths": paths,
        "db": str(db_path),
        "dists": str(dists_path),
        "degraded": str(degraded_path),
    }


def run(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(args, capsys):
    code, out, err = run(args, capsys)
    assert code == 0, err
    return json.loads(out)


class TestExitCodes:
    def test_no_arguments_is_usage(self, capsys):
        assert run([], capsys)[0] == 1

    def test_unknown_command_is_usage(self, capsys):
        assert run(["frobnicate"], capsys)[0] == 1

    def test_missing_subcommand_is_usage(self, capsys):
        assert run(["corpus"], capsys)[0] == 1

    def test_help_is_success(self, capsys):
        assert run(["--help"], capsys)[0] == 0

    def test_missing_file_is_data_error(self, capsys, tmp_path):
        code, _, err = run(
            ["--schema", "lev", "corpus", "validate", str(tmp_path / "nope.jsonl")],
            capsys,
        )
        assert code == 2
        assert "error" in err

    def test_malformed_corpus_is_data_error(self, capsys, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"id": "s1"\n', encoding="utf-8")
        code, _, err = run(
            ["--schema", "lev", "corpus", "validate", str(bad)], capsys
        )
        assert code == 2

    def test_internal_error_is_three(self, capsys, tmp_path, monkeypatch, ws):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(
            json.dumps({"paths": {k: ws["paths"][k] for k in ("train", "tune", "dev", "test")}}),
            encoding="utf-8",
        )
        monkeypatch.setattr(
            "morphdis.cli.run_experiment",
            lambda spec, out_dir: (_ for _ in ()).throw(RuntimeError("boom")),
        )
        code, _, err = run(["experiment", str(spec_path)], capsys)
        assert code == 3
        assert "internal error" in err


class TestCorpusCommands:
    def test_validate(self, ws, capsys):
        document = run_json(
            ["--schema", "lev", "corpus", "validate", ws["paths"]["train"]], capsys
        )
        assert document["tokens"] == 500
        assert document["sentences"] == 50

    def test_sample(self, ws, capsys, tmp_path):
        documents = run_json(
            [
                "--schema",
                "lev",
                "--out-dir",
                str(tmp_path),
                "corpus",
                "sample",
                ws["paths"]["train"],
                "--sizes",
                "100,200",
            ],
            capsys,
        )
        assert [d["size"] for d in documents] == [100, 200]
        for d in documents:
            sample = read_corpus(d["path"], load_builtin("lev"), "TRAIN")
            assert sample.token_count() >= d["size"]

    def test_oov(self, ws, capsys):
        document = run_json(
            [
                "--schema",
                "lev",
                "corpus",
                "oov",
                ws["paths"]["train"],
                ws["paths"]["dev"],
            ],
            capsys,
        )
        assert 0.0 <= document["token_rate"] <= 1.0
        assert document["oov_types"] >= 0


class TestAnalyzerCommands:
    def test_compile_query_stats(self, ws, capsys, tmp_path):
        db_path = tmp_path / "compiled.jsonl"
        document = run_json(
            [
                "--schema",
                "lev",
                "analyzer",
                "compile",
                ws["paths"]["train"],
                "--db",
                str(db_path),
            ],
            capsys,
        )
        assert document["forms"] > 0

        some_form = next(ws["data"].train.iter_tokens()).raw
        queried = run_json(
            ["analyzer", "query", str(db_path), some_form], capsys
        )
        assert queried["known"] is True
        assert queried["analyses"]

        missing = run_json(
            ["analyzer", "query", str(db_path), "zzzzzzz"], capsys
        )
        assert missing["known"] is False
        assert missing["analyses"] == []

        stats = run_json(["analyzer", "stats", str(db_path)], capsys)
        assert stats["variant"] == "lev"
        assert stats["forms"] == document["forms"]


class TestTaggerCommands:
    def test_train_predict_eval(self, ws, capsys, tmp_path):
        model_path = tmp_path / "model.json"
        document = run_json(
            [
                "--schema",
                "lev",
                "tagger",
                "train",
                ws["paths"]["train"],
                "--epochs",
                "2",
                "--tune",
                ws["paths"]["tune"],
                "--model",
                str(model_path),
            ],
            capsys,
        )
        assert document["selected_epoch"] in (0, 1)
        assert len(document["train_accuracy_history"]) == 2
        assert model_path.is_file()

        dists_path = tmp_path / "dists.jsonl"
        predicted = run_json(
            [
                "tagger",
                "predict",
                str(model_path),
                ws["paths"]["dev"],
                "--dists",
                str(dists_path),
            ],
            capsys,
        )
        assert predicted["sentences"] == 10
        assert dists_path.is_file()

        report = run_json(
            [
                "tagger",
                "eval-raw",
                str(model_path),
                ws["paths"]["dev"],
                "--subset",
                "pos",
            ],
            capsys,
        )
        assert report["metric"] == "POS"
        assert 0.0 <= report["accuracy"] <= 1.0


class TestDisambiguateCommand:
    def test_retag(self, ws, capsys, tmp_path):
        out_path = tmp_path / "retagged.jsonl"
        document = run_json(
            [
                "--schema",
                "lev",
                "disambiguate",
                ws["paths"]["dev"],
                "--dists",
                ws["dists"],
                "--db",
                ws["db"],
                "--train",
                ws["paths"]["train"],
                "--out",
                str(out_path),
            ],
            capsys,
        )
        assert document["tokens"] == 100
        assert out_path.is_file()
        retagged = read_corpus(out_path, load_builtin("lev"), "DEV")
        assert retagged.token_count() == 100

    def test_requires_tie_break_source(self, ws, capsys):
        code, _, err = run(
            [
                "--schema",
                "lev",
                "disambiguate",
                ws["paths"]["dev"],
                "--dists",
                ws["dists"],
                "--db",
                ws["db"],
            ],
            capsys,
        )
        assert code == 2
        assert "unigrams" in err


class TestHarmonizeCommands:
    def test_apply(self, ws, capsys, tmp_path):
        out_path = tmp_path / "h.jsonl"
        document = run_json(
            [
                "harmonize",
                "apply",
                ws["paths"]["train"],
                "--source",
                "lev",
                "--target",
                "lev",
                "--out",
                str(out_path),
            ],
            capsys,
        )
        assert document["schema"] == "lev_h10"
        assert document["tokens"] == 500

    def test_merge(self, ws, capsys, tmp_path):
        document = run_json(
            [
                "--out-dir",
                str(tmp_path),
                "harmonize",
                "merge",
                f"lev={ws['paths']['train']}",
                f"lev={ws['paths']['tune']}",
                "--target",
                "lev",
            ],
            capsys,
        )
        assert document["tokens"] == 600

    def test_stage(self, ws, capsys, tmp_path):
        document = run_json(
            [
                "--out-dir",
                str(tmp_path),
                "harmonize",
                "stage",
                "--high",
                f"lev={ws['paths']['train']}",
                "--low",
                f"lev={ws['paths']['tune']}",
                "--target",
                "lev",
            ],
            capsys,
        )
        assert document["stage1"]["tokens"] == 500
        assert document["stage2"]["tokens"] == 100

    def test_bad_pair_syntax(self, ws, capsys, tmp_path):
        code, _, err = run(
            [
                "--out-dir",
                str(tmp_path),
                "harmonize",
                "merge",
                "no-equals-sign",
                "--target",
                "lev",
            ],
            capsys,
        )
        assert code == 2


class TestEvalCommands:
    def test_accuracy_perfect(self, ws, capsys):
        document = run_json(
            [
                "--schema",
                "lev",
                "eval",
                "accuracy",
                ws["paths"]["dev"],
                ws["paths"]["dev"],
            ],
            capsys,
        )
        assert document["accuracy"] == 1.0

    def test_accuracy_oov_slice_needs_train(self, ws, capsys):
        code, _, _ = run(
            [
                "--schema",
                "lev",
                "eval",
                "accuracy",
                ws["paths"]["dev"],
                ws["paths"]["dev"],
                "--slice",
                "oov",
            ],
            capsys,
        )
        assert code == 2

    def test_errors(self, ws, capsys):
        document = run_json(
            [
                "--schema",
                "lev",
                "eval",
                "errors",
                ws["degraded"],
                ws["paths"]["dev"],
            ],
            capsys,
        )
        assert document["error_tokens"] > 0
        assert "per_feature_errors" in document

    def test_significance(self, ws, capsys):
        document = run_json(
            [
                "--schema",
                "lev",
                "eval",
                "significance",
                ws["paths"]["dev"],
                ws["degraded"],
                ws["paths"]["dev"],
            ],
            capsys,
        )
        assert document["c"] == 0
        assert document["b"] > 0
        assert document["significant"] is True

    def test_curve(self, ws, capsys, tmp_path):
        code, out, err = run(
            [
                "--schema",
                "lev",
                "--out-dir",
                str(tmp_path),
                "eval",
                "curve",
                ws["paths"]["dev"],
                "--cell",
                f"100:base:{ws['degraded']}",
                "--cell",
                f"200:base:{ws['paths']['dev']}",
            ],
            capsys,
        )
        assert code == 0, err
        assert "100.00*" in out
        records = json.loads((tmp_path / "curve.json").read_text())
        assert len(records) == 2


class TestExperimentCommand:
    def test_run_from_spec_file(self, ws, capsys, tmp_path):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(
            json.dumps(
                {
                    "variant": "lev",
                    "sizes": [300],
                    "epochs": 2,
                    "paths": {k: ws["paths"][k] for k in ("train", "tune", "dev", "test")},
                }
            ),
            encoding="utf-8",
        )
        code, out, err = run(
            ["--out-dir", str(tmp_path / "runs"), "experiment", str(spec_path)],
            capsys,
        )
        assert code == 0, err
        assert "run directory" in out

    def test_spec_missing_paths(self, ws, capsys, tmp_path):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps({"variant": "lev"}), encoding="utf-8")
        code, _, err = run(["experiment", str(spec_path)], capsys)
        assert code == 2


class TestSynthCommand:
    def test_generate(self, capsys, tmp_path):
        document = run_json(
            [
                "--out-dir",
                str(tmp_path),
                "--seed",
                "7",
                "synth",
                "--vocabulary",
                "50",
                "--budget",
                "200",
                "--ambiguity",
                "1.0",
            ],
            capsys,
        )
        for key in ("train", "tune", "dev", "test", "analyzer"):
            assert (tmp_path / f"{key}.jsonl").is_file()
        assert document["tokens"]["train"] == 200

    def test_generate_family(self, capsys, tmp_path):
        document = run_json(
            [
                "--out-dir",
                str(tmp_path),
                "synth",
                "--vocabulary",
                "50",
                "--budget",
                "200",
                "--high",
                "2",
                "--high-budget",
                "300",
            ],
            capsys,
        )
        assert (tmp_path / "high0-train.jsonl").is_file()
        assert (tmp_path / "high1-train.jsonl").is_file()
        assert document["high0-train"]

    def test_invalid_spec_is_data_error(self, capsys, tmp_path):
        code, _, _ = run(
            ["--out-dir", str(tmp_path), "synth", "--vocabulary", "0"], capsys
        )
        assert code == 2


class TestEntryPoints:
    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "morphdis", "--help"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "morphdis" in proc.stdout

    def test_console_script(self):
        exe = shutil.which("morphdis")
        assert exe, "console script not installed"
        proc = subprocess.run([exe, "--help"], capture_output=True, text=True)
        assert proc.returncode == 0
