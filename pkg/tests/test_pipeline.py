import json

import pytest

from morphdis.analyzer import save_db
from morphdis.corpus import write_corpus
from morphdis.pipeline import (
    CONTINUED,
    MERGED,
    SINGLE,
    ExperimentPaths,
    ExperimentSpec,
    run_experiment,
)
from morphdis.synth import SyntheticSpec, generate_synthetic, generate_synthetic_family
from morphdis.tagger import (
    FACTORED,
    TrainConfig,
    distributions_for_corpus,
    load_model,
    save_distributions,
    train,
)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("exp")
    spec = SyntheticSpec(
        variant="lev",
        vocabulary=120,
        ambiguity=2.0,
        budget=700,
        sentence_length=10,
        seed=12345,
        name="p",
    )
    data = generate_synthetic(spec)
    paths = {}
    for split, corpus in data.splits().items():
        path = root / f"{split.lower()}.jsonl"
        write_corpus(corpus, path)
        paths[split.lower()] = path
    db_path = root / "analyzer.jsonl"
    save_db(data.db, db_path)

    family_spec = SyntheticSpec(
        variant="lev",
        vocabulary=80,
        ambiguity=2.0,
        budget=400,
        sentence_length=10,
        seed=12345,
        name="f",
    )
    target, highs = generate_synthetic_family(
        family_spec, high_count=2, high_budget=600
    )
    family_paths = {}
    for split, corpus in target.splits().items():
        path = root / f"target-{split.lower()}.jsonl"
        write_corpus(corpus, path)
        family_paths[split.lower()] = path
    high_paths = []
    for i, member in enumerate(highs):
        path = root / f"high{i}.jsonl"
        write_corpus(member.train, path)
        high_paths.append(("lev", path))

    return {
        "data": data,
        "paths": paths,
        "db": db_path,
        "family": family_paths,
        "high": tuple(high_paths),
    }


def base_paths(workspace, **overrides) -> ExperimentPaths:
    kwargs = dict(
        train=workspace["paths"]["train"],
        tune=workspace["paths"]["tune"],
        dev=workspace["paths"]["dev"],
        test=workspace["paths"]["test"],
    )
    kwargs.update(overrides)
    return ExperimentPaths(**kwargs)


def base_spec(workspace, **overrides) -> ExperimentSpec:
    kwargs = dict(paths=base_paths(workspace), variant="lev", epochs=3, sizes=(500,))
    kwargs.update(overrides)
    return ExperimentSpec(**kwargs)


class TestSpecValidation:
    def test_analyzer_flag_and_path_must_agree(self, workspace):
        with pytest.raises(ValueError):
            base_spec(workspace, use_analyzer=True)
        with pytest.raises(ValueError):
            base_spec(
                workspace, paths=base_paths(workspace, analyzer=workspace["db"])
            )

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"strategy": "STACKED"},
            {"kind": "joint"},
            {"sizes": ()},
            {"sizes": (0,)},
            {"sizes": (500, 400)},
            {"epochs": 0},
            {"strategy": MERGED},
            {"strategy": CONTINUED},
        ],
    )
    def test_rejected_specs(self, workspace, kwargs):
        with pytest.raises(ValueError):
            base_spec(workspace, **kwargs)

    def test_external_distributions_need_dev_and_test(self, workspace):
        with pytest.raises(ValueError):
            base_spec(
                workspace,
                paths=base_paths(
                    workspace, external_distributions={"dev": "x.jsonl"}
                ),
            )
        with pytest.raises(ValueError):
            base_spec(
                workspace,
                paths=base_paths(
                    workspace,
                    external_distributions={
                        "dev": "x",
                        "test": "y",
                        "valid": "z",
                    },
                ),
            )


class TestSingleStrategy:
    def test_artifact_layout(self, workspace, tmp_path):
        result = run_experiment(base_spec(workspace), tmp_path)
        assert (result.run_dir / "spec.json").is_file()
        assert (result.run_dir / "curve.json").is_file()
        assert (result.run_dir / "curve.txt").is_file()
        size_dir = result.run_dir / "size-500"
        for name in (
            "model.json",
            "predictions-dev.jsonl",
            "predictions-test.jsonl",
            "reports.json",
        ):
            assert (size_dir / name).is_file()
        document = json.loads((size_dir / "reports.json").read_text())
        assert len(document["reports"]) >= 4
        assert document["strategy"] == SINGLE
        assert document["disambiguation"] is None
        splits = {r["split"] for r in document["reports"]}
        assert splits == {"DEV", "TEST"}

    def test_rerun_is_byte_identical(self, workspace, tmp_path):
        spec = base_spec(workspace)
        first = run_experiment(spec, tmp_path)
        second = run_experiment(spec, tmp_path)
        assert first.run_dir != second.run_dir
        for name in (
            "spec.json",
            "curve.json",
            "size-500/model.json",
            "size-500/predictions-dev.jsonl",
            "size-500/predictions-test.jsonl",
            "size-500/reports.json",
        ):
            assert (first.run_dir / name).read_bytes() == (
                second.run_dir / name
            ).read_bytes()

    def test_epoch_selected_on_tune(self, workspace, tmp_path):
        result = run_experiment(base_spec(workspace), tmp_path)
        model = load_model(result.run_dir / "size-500" / "model.json")
        assert model.meta["selected_epoch"] in range(3)
        assert 0.0 <= model.meta["tune_accuracy"] <= 1.0

    def test_dev_report_accessor(self, workspace, tmp_path):
        result = run_experiment(base_spec(workspace), tmp_path)
        report = result.dev_report(500)
        assert report.metric_name == "ALL TAGS"
        assert report.total_tokens == workspace["data"].dev.token_count()
        with pytest.raises(KeyError):
            result.dev_report(9999)

    def test_two_sizes_build_curve(self, workspace, tmp_path):
        spec = base_spec(workspace, sizes=(200, 500))
        result = run_experiment(spec, tmp_path)
        records = json.loads((result.run_dir / "curve.json").read_text())
        assert len(records) == 2
        assert sum(r["best"] for r in records) >= 1
        assert {r["size"] for r in records} == {200, 500}

    def test_retagging_stats_reported(self, workspace, tmp_path):
        spec = base_spec(
            workspace,
            use_analyzer=True,
            paths=base_paths(workspace, analyzer=workspace["db"]),
        )
        result = run_experiment(spec, tmp_path)
        stats = result.sizes[0].disambiguation
        assert stats is not None
        assert 0.0 <= stats["dev"]["backoff_share"] <= 1.0
        document = json.loads(
            (result.run_dir / "size-500" / "reports.json").read_text()
        )
        assert document["disambiguation"]["dev"]["tokens"] == workspace[
            "data"
        ].dev.token_count()


class TestExternalDistributions:
    def test_run_without_builtin_tagger(self, workspace, tmp_path):
        data = workspace["data"]
        model = train(data.train, data.schema, FACTORED, TrainConfig(epochs=2))
        dev_path = tmp_path / "dev-dists.jsonl"
        test_path = tmp_path / "test-dists.jsonl"
        save_distributions(distributions_for_corpus(model, data.dev), dev_path)
        save_distributions(distributions_for_corpus(model, data.test), test_path)
        spec = base_spec(
            workspace,
            paths=base_paths(
                workspace,
                external_distributions={"dev": dev_path, "test": test_path},
            ),
        )
        result = run_experiment(spec, tmp_path / "runs")
        size_dir = result.run_dir / "size-500"
        assert not (size_dir / "model.json").exists()
        assert (size_dir / "reports.json").is_file()
        assert result.dev_report(500).total_tokens == data.dev.token_count()


class TestMergedStrategy:
    def test_runs_in_reduced_schema(self, workspace, tmp_path):
        spec = base_spec(
            workspace,
            strategy=MERGED,
            sizes=(300,),
            paths=base_paths(
                workspace,
                train=workspace["family"]["train"],
                tune=workspace["family"]["tune"],
                dev=workspace["family"]["dev"],
                test=workspace["family"]["test"],
                high_resource=workspace["high"],
            ),
        )
        result = run_experiment(spec, tmp_path)
        document = json.loads(
            (result.run_dir / "size-300" / "reports.json").read_text()
        )
        assert document["schema"] == "lev_h10"
        assert (result.run_dir / "size-300" / "model.json").is_file()


class TestContinuedStrategy:
    def test_stage1_artifact_referenced(self, workspace, tmp_path):
        spec = base_spec(
            workspace,
            strategy=CONTINUED,
            sizes=(300,),
            paths=base_paths(
                workspace,
                train=workspace["family"]["train"],
                tune=workspace["family"]["tune"],
                dev=workspace["family"]["dev"],
                test=workspace["family"]["test"],
                high_resource=workspace["high"],
            ),
        )
        result = run_experiment(spec, tmp_path)
        assert (result.run_dir / "stage1-model.json").is_file()
        model = load_model(result.run_dir / "size-300" / "model.json")
        assert model.meta["continued"] is True
        assert model.meta["init_artifact"] == "../stage1-model.json"
        stage1 = load_model(result.run_dir / "stage1-model.json")
        assert stage1.meta["continued"] is False
