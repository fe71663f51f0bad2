import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from morphdis.corpus import Corpus, read_corpus, write_corpus
from morphdis.errors import (
    AlignmentError,
    EmptyCorpus,
    FormatError,
    NormalizationError,
    SchemaMismatch,
)
from morphdis.schema import parse_unfactored, serialize_unfactored
from morphdis.tagger import (
    FACTORED,
    UNFACTORED,
    FeatureDistribution,
    SentenceDistributions,
    TrainConfig,
    dumps_distribution,
    format_probability,
    load_external_distributions,
    load_model,
    predict,
    save_distributions,
    save_model,
    train,
)
from tests.conftest import corpus_of, sent, tok


@pytest.fixture
def separable_corpus(schema):
    # every form carries exactly one gold bundle
    return corpus_of(
        sent("s1", tok("ana", pos="part"), tok("aktb", pos="verb", num="s")),
        sent("s2", tok("hw", pos="part"), tok("yktb", pos="verb", num="s", gen="m")),
        sent("s3", tok("bnt", pos="noun", gen="f", num="s"), tok("tktb", pos="verb", gen="f")),
        sent("s4", tok("ana", pos="part"), tok("bnt", pos="noun", gen="f", num="s")),
    )


def argmax_bundles(model, corpus):
    out = []
    for sentence in corpus.sentences:
        dists = predict(model, [t.raw for t in sentence.tokens])
        out.extend(d.argmax_bundle(model.schema) for d in dists)
    return out


class TestTraining:
    def test_memorizes_singleton(self, schema):
        corpus = corpus_of(
            sent("s1", tok("w1", pos="verb", num="p"), tok("w2", pos="part"))
        )
        model = train(corpus, schema, FACTORED, TrainConfig(epochs=1, seed=1))
        bundles = argmax_bundles(model, corpus)
        assert bundles[0] == schema.fill_defaults({"pos": "verb", "num": "p"})
        assert bundles[1] == schema.fill_defaults({"pos": "part"})

    def test_memorizes_separable_corpus(self, schema, separable_corpus):
        for kind in (FACTORED, UNFACTORED):
            model = train(separable_corpus, schema, kind, TrainConfig(epochs=10, seed=3))
            golds = [
                t.analysis.filled(schema) for t in separable_corpus.iter_tokens()
            ]
            assert argmax_bundles(model, separable_corpus) == golds

    def test_unfactored_label_space_is_observed(self, schema, separable_corpus):
        model = train(separable_corpus, schema, UNFACTORED, TrainConfig(epochs=1))
        observed = {
            serialize_unfactored(t.analysis.features, schema)
            for t in separable_corpus.iter_tokens()
        }
        assert set(model.labels["__tag__"]) == observed

    def test_factored_label_spaces_are_closed(self, schema, separable_corpus):
        model = train(separable_corpus, schema, FACTORED, TrainConfig(epochs=1))
        for fdef in schema.features:
            assert set(model.labels[fdef.name]) == fdef.values

    def test_continued_label_space_union(self, schema, separable_corpus):
        extra = corpus_of(
            sent("x1", tok("mFocus", pos="part", prc0="Al_det")),
        )
        base = train(separable_corpus, schema, UNFACTORED, TrainConfig(epochs=2))
        continued = train(
            extra, schema, UNFACTORED, TrainConfig(epochs=2, init=base)
        )
        alone = train(extra, schema, UNFACTORED, TrainConfig(epochs=2))
        assert set(alone.labels["__tag__"]) < set(continued.labels["__tag__"])
        assert set(base.labels["__tag__"]) <= set(continued.labels["__tag__"])

    def test_determinism(self, schema, separable_corpus):
        a = train(separable_corpus, schema, FACTORED, TrainConfig(epochs=3, seed=42))
        b = train(separable_corpus, schema, FACTORED, TrainConfig(epochs=3, seed=42))
        assert a.weights == b.weights
        assert a.history == b.history
        c = train(separable_corpus, schema, FACTORED, TrainConfig(epochs=3, seed=43))
        assert a.weights != c.weights or a.history != c.history

    def test_history_and_checkpoints(self, schema, separable_corpus):
        model = train(separable_corpus, schema, FACTORED, TrainConfig(epochs=4))
        assert len(model.history) == 4
        assert len(model.checkpoints) == 4
        assert all(0.0 <= h <= 1.0 for h in model.history)
        early = model.at_epoch(0)
        assert early.weights == model.checkpoints[0]
        assert early.meta["selected_epoch"] == 0
        with pytest.raises(IndexError):
            model.at_epoch(9)

    def test_empty_corpus(self, schema):
        with pytest.raises(EmptyCorpus):
            train(corpus_of(), schema, FACTORED)

    def test_schema_mismatch(self, schema, msa, separable_corpus):
        with pytest.raises(SchemaMismatch):
            train(separable_corpus, msa, FACTORED)
        base = train(separable_corpus, schema, FACTORED, TrainConfig(epochs=1))
        with pytest.raises(SchemaMismatch):
            train(separable_corpus, schema, UNFACTORED, TrainConfig(epochs=1, init=base))

    def test_unknown_kind(self, schema, separable_corpus):
        with pytest.raises(ValueError):
            train(separable_corpus, schema, "neural")


class TestPredict:
    def test_vectors_normalized(self, schema, separable_corpus):
        for kind in (FACTORED, UNFACTORED):
            model = train(separable_corpus, schema, kind, TrainConfig(epochs=2))
            for dist in predict(model, ["ana", "zzz_unknown", "bnt"]):
                assert set(dist.per_feature) == set(schema.feature_names())
                for vector in dist.per_feature.values():
                    assert abs(sum(vector.values()) - 1.0) <= 1e-4
                    assert all(0.0 <= p <= 1.0 for p in vector.values())

    def test_unknown_words_survive(self, schema, separable_corpus):
        model = train(separable_corpus, schema, FACTORED, TrainConfig(epochs=2))
        dists = predict(model, ["completely", "novel", "words"])
        assert len(dists) == 3

    def test_unfactored_marginalization(self, schema, separable_corpus):
        # label space is smaller than top_k, so the stored tag vector is the
        # whole distribution and marginals equal brute-force sums over it
        model = train(separable_corpus, schema, UNFACTORED, TrainConfig(epochs=2, top_k=50))
        for dist in predict(model, ["ana", "bnt"]):
            assert dist.unfactored is not None
            for name, vector in dist.per_feature.items():
                for value, p in vector.items():
                    brute = sum(
                        q
                        for tag, q in dist.unfactored.items()
                        if parse_unfactored(tag, schema)[name] == value
                    )
                    assert math.isclose(p, brute, abs_tol=1e-9)

    def test_top_k_truncation(self, schema, separable_corpus):
        model = train(separable_corpus, schema, UNFACTORED, TrainConfig(epochs=2, top_k=2))
        (dist,) = predict(model, ["ana"])
        assert len(dist.unfactored) == 2
        assert sum(dist.unfactored.values()) < 1.0

    def test_argmax_bundle_prefers_unfactored(self, schema):
        dist = FeatureDistribution(
            per_feature={
                "pos": {"noun": 0.6, "verb": 0.4},
                "gen": {"m": 0.5, "f": 0.5, "na": 0.0},
                "num": {"s": 1.0},
                "prc0": {"0": 1.0},
            },
            unfactored={"verb+m+s+0": 0.9, "noun+m+s+0": 0.1},
        )
        assert dist.argmax_bundle(schema)["pos"] == "verb"

    def test_feature_argmax_tie_breaks_lexicographically(self):
        dist = FeatureDistribution(per_feature={"pos": {"verb": 0.5, "noun": 0.5}})
        assert dist.feature_argmax("pos") == "noun"


class TestModelPersistence:
    def test_round_trip(self, schema, separable_corpus, tmp_path):
        model = train(separable_corpus, schema, UNFACTORED, TrainConfig(epochs=2))
        p = tmp_path / "model.json"
        save_model(model, p)
        loaded = load_model(p)
        assert loaded.kind == model.kind
        assert loaded.schema == model.schema
        assert loaded.labels == model.labels
        assert loaded.weights == model.weights
        forms = ["ana", "bnt", "zzz"]
        got = [d.per_feature for d in predict(loaded, forms)]
        want = [d.per_feature for d in predict(model, forms)]
        assert got == want

    def test_bad_version(self, schema, separable_corpus, tmp_path):
        model = train(separable_corpus, schema, FACTORED, TrainConfig(epochs=1))
        p = tmp_path / "model.json"
        save_model(model, p)
        doc = json.loads(p.read_text())
        doc["format_version"] = "99"
        p.write_text(json.dumps(doc))
        from morphdis.errors import VersionError

        with pytest.raises(VersionError):
            load_model(p)


class TestProbabilityText:
    def test_padding_to_eight_digits(self):
        assert format_probability(0.5) == "0.50000000"
        assert format_probability(1.0) == "1.0000000"
        assert format_probability(0.0) == "0.00000000"
        assert format_probability(1e-09) == "1.0000000e-09"
        assert format_probability(0.07) == "0.070000000"

    def test_full_precision_kept(self):
        p = 1.0 / 3.0
        assert float(format_probability(p)) == p

    @given(st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
    def test_round_trip_and_digit_floor(self, p):
        text = format_probability(p)
        assert float(text) == p
        mantissa = text.partition("e")[0]
        digits = "".join(ch for ch in mantissa if ch.isdigit()).lstrip("0")
        assert len(digits) >= 8 or p == 0.0 or digits == ""


class TestInterchange:
    def make_file(self, tmp_path, schema, records):
        p = tmp_path / "dist.jsonl"
        p.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
        return p

    def full_feats(self, pos="noun"):
        return {
            "pos": {pos: 1.0},
            "gen": {"na": 1.0},
            "num": {"na": 1.0},
            "prc0": {"0": 1.0},
        }

    def test_save_load_alignment(self, schema, separable_corpus, tmp_path):
        model = train(separable_corpus, schema, UNFACTORED, TrainConfig(epochs=2))
        sents = [
            SentenceDistributions(
                id=s.id,
                raws=tuple(t.raw for t in s.tokens),
                distributions=tuple(predict(model, [t.raw for t in s.tokens])),
            )
            for s in separable_corpus.sentences
        ]
        p = tmp_path / "dist.jsonl"
        save_distributions(sents, p)
        loaded = load_external_distributions(p, schema, corpus=separable_corpus)
        assert len(loaded) == len(separable_corpus.sentences)
        for got, want in zip(loaded, sents):
            assert got.id == want.id and got.raws == want.raws
            for dg, dw in zip(got.distributions, want.distributions):
                for name in schema.feature_names():
                    for value, pr in dw.per_feature[name].items():
                        assert math.isclose(
                            dg.per_feature[name].get(value, 0.0), pr, abs_tol=1e-7
                        )

    def test_sum_beyond_tolerance_rejected(self, schema, tmp_path):
        feats = self.full_feats()
        feats["pos"] = {"noun": 0.6, "verb": 0.6}
        p = self.make_file(
            tmp_path, schema, [{"id": "s1", "tokens": [{"raw": "x", "feats": feats}]}]
        )
        with pytest.raises(NormalizationError):
            load_external_distributions(p, schema)

    def test_near_one_renormalized(self, schema, tmp_path):
        feats = self.full_feats()
        feats["pos"] = {"noun": 0.49995, "verb": 0.5}
        p = self.make_file(
            tmp_path, schema, [{"id": "s1", "tokens": [{"raw": "x", "feats": feats}]}]
        )
        (loaded,) = load_external_distributions(p, schema)
        vector = loaded.distributions[0].per_feature["pos"]
        assert math.isclose(sum(vector.values()), 1.0, abs_tol=1e-12)

    def test_negative_probability_rejected(self, schema, tmp_path):
        feats = self.full_feats()
        feats["pos"] = {"noun": 1.5, "verb": -0.5}
        p = self.make_file(
            tmp_path, schema, [{"id": "s1", "tokens": [{"raw": "x", "feats": feats}]}]
        )
        with pytest.raises(NormalizationError):
            load_external_distributions(p, schema)

    def test_missing_feature_rejected(self, schema, tmp_path):
        feats = self.full_feats()
        del feats["gen"]
        p = self.make_file(
            tmp_path, schema, [{"id": "s1", "tokens": [{"raw": "x", "feats": feats}]}]
        )
        with pytest.raises(FormatError, match="missing features"):
            load_external_distributions(p, schema)

    def test_illegal_value_rejected(self, schema, tmp_path):
        feats = self.full_feats()
        feats["gen"] = {"banana": 1.0}
        p = self.make_file(
            tmp_path, schema, [{"id": "s1", "tokens": [{"raw": "x", "feats": feats}]}]
        )
        with pytest.raises(FormatError, match="illegal values"):
            load_external_distributions(p, schema)

    def test_bad_unfactored_tag_rejected(self, schema, tmp_path):
        record = {
            "id": "s1",
            "tokens": [
                {"raw": "x", "feats": self.full_feats(), "unfactored": {"noun+na": 1.0}}
            ],
        }
        p = self.make_file(tmp_path, schema, [record])
        with pytest.raises(FormatError, match="unfactored"):
            load_external_distributions(p, schema)

    def test_alignment_errors(self, schema, tmp_path):
        record = {"id": "s1", "tokens": [{"raw": "x", "feats": self.full_feats()}]}
        p = self.make_file(tmp_path, schema, [record])
        good = corpus_of(sent("s1", tok("x", pos="noun")))
        load_external_distributions(p, schema, corpus=good)
        wrong_id = corpus_of(sent("s9", tok("x", pos="noun")))
        with pytest.raises(AlignmentError):
            load_external_distributions(p, schema, corpus=wrong_id)
        wrong_count = corpus_of(sent("s1", tok("x", pos="noun"), tok("y", pos="noun")))
        with pytest.raises(AlignmentError):
            load_external_distributions(p, schema, corpus=wrong_count)
        wrong_raw = corpus_of(sent("s1", tok("y", pos="noun")))
        with pytest.raises(AlignmentError):
            load_external_distributions(p, schema, corpus=wrong_raw)

    def test_writer_emits_eight_digit_decimals(self, schema):
        dist = FeatureDistribution(
            per_feature={
                "pos": {"noun": 0.5, "verb": 0.5},
                "gen": {"na": 1.0},
                "num": {"na": 1.0},
                "prc0": {"0": 1.0},
            }
        )
        text = dumps_distribution(
            SentenceDistributions(id="s1", raws=("x",), distributions=(dist,))
        )
        assert '"noun":0.50000000' in text
        record = json.loads(text)
        assert record["tokens"][0]["feats"]["pos"]["noun"] == 0.5
