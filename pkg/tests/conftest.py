import pytest

from morphdis.corpus import AnnotatedToken, Analysis, Corpus, Sentence
from morphdis.schema import FeatureDef, FeatureSchema, load_builtin


def toy_schema() -> FeatureSchema:
    return FeatureSchema(
        variant="toy",
        features=(
            FeatureDef("pos", frozenset({"noun", "verb", "part"}), "noun"),
            FeatureDef("gen", frozenset({"m", "f", "na"}), "na"),
            FeatureDef("num", frozenset({"s", "p", "na"}), "na"),
            FeatureDef("prc0", frozenset({"0", "Al_det"}), "0"),
        ),
    )


def tok(raw: str, coda: str | None = None, **feats: str) -> AnnotatedToken:
    return AnnotatedToken(
        raw=raw,
        coda=coda,
        analysis=Analysis(features=feats, lex=raw, diac=raw),
    )


def sent(sid: str, *tokens: AnnotatedToken) -> Sentence:
    return Sentence(id=sid, tokens=tokens)


def corpus_of(*sentences: Sentence, variant: str = "toy", split: str = "TRAIN") -> Corpus:
    return Corpus(schema_ref=variant, sentences=sentences, split=split)


@pytest.fixture
def schema():
    return toy_schema()


@pytest.fixture
def msa():
    return load_builtin("msa")


@pytest.fixture
def lev():
    return load_builtin("lev")


@pytest.fixture
def tiny_corpus(schema):
    return corpus_of(
        sent(
            "s1",
            tok("ktb", pos="verb"),
            tok("walad", pos="noun", gen="m", num="s"),
        ),
        sent(
            "s2",
            tok("Albnt", pos="noun", gen="f", num="s", prc0="Al_det"),
        ),
    )
