"""Umbrella command line for the toolkit.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable, malformed,
or inconsistent inputs), 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analyzer import BackoffMode, analyze, compile_analyzer, load_db, save_db
from .corpus import (
    Corpus,
    oov_vocabulary,
    read_corpus,
    sample_learning_curve,
    write_corpus,
)
from .disambiguator import build_unigrams, disambiguate_corpus, load_unigrams
from .errors import MorphdisError
from .evaluation import (
    accuracy,
    feature_error_stats,
    learning_curve_report,
    mcnemar,
    unseen_tag_rate,
)
from .harmonizer import Harmonizer, load_harmonization_config
from .pipeline import _argmax_corpus, _select_epoch, run_experiment, spec_from_document
from .schema import FeatureSchema, resolve_schema
from .synth import SyntheticSpec, generate_synthetic, generate_synthetic_family
from .tagger import (
    FACTORED,
    TrainConfig,
    UNFACTORED,
    distributions_for_corpus,
    load_external_distributions,
    load_model,
    save_distributions,
    save_model,
    train,
)

DEFAULT_SEED = 12345


class _Parser(argparse.ArgumentParser):
    """argparse maps its own failures to exit code 2; this CLI reserves 2
    for data errors, so usage failures are remapped to 1."""

    def exit(self, status: int = 0, message: str | None = None):
        if message:
            self._print_message(message, sys.stderr)
        raise SystemExit(1 if status else 0)


def _emit(document) -> None:
    print(json.dumps(document, ensure_ascii=False, indent=2, sort_keys=True))


def _schema(args) -> FeatureSchema:
    return resolve_schema(args.schema)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _variant_path(text: str) -> tuple[str, str]:
    variant, sep, path = text.partition("=")
    if not sep or not variant or not path:
        raise ValueError(f"expected VARIANT=PATH, got {text!r}")
    return variant, path


def _read_pairs(pairs, split: str) -> list[tuple[Corpus, str]]:
    loaded = []
    for variant, path in pairs:
        loaded.append((read_corpus(path, resolve_schema(variant), split), variant))
    return loaded


def _harmonizer(args) -> Harmonizer:
    config = load_harmonization_config(getattr(args, "config", None))
    if args.target != config.target_variant:
        from dataclasses import replace

        config = replace(config, target_variant=args.target)
    return Harmonizer(config)


# ---------------------------------------------------------------- corpus


def _cmd_corpus_validate(args) -> int:
    schema = _schema(args)
    corpus = read_corpus(args.path, schema, args.split)
    corpus.validate(schema)
    _emit(
        {
            "path": str(args.path),
            "split": corpus.split,
            "sentences": len(corpus.sentences),
            "tokens": corpus.token_count(),
            "vocabulary": len(corpus.raw_vocabulary()),
        }
    )
    return 0


def _cmd_corpus_sample(args) -> int:
    schema = _schema(args)
    corpus = read_corpus(args.path, schema, args.split)
    sizes = [int(s) for s in args.sizes.split(",") if s]
    samples = sample_learning_curve(corpus, sizes, args.seed)
    out = _out_dir(args)
    written = []
    for size, sample in zip(sizes, samples):
        path = out / f"sample-{size}.jsonl"
        write_corpus(sample, path)
        written.append(
            {"size": size, "tokens": sample.token_count(), "path": str(path)}
        )
    _emit(written)
    return 0


def _cmd_corpus_oov(args) -> int:
    schema = _schema(args)
    train_corpus = read_corpus(args.train, schema, "TRAIN")
    eval_corpus = read_corpus(args.eval, schema, args.split)
    forms = oov_vocabulary(train_corpus, eval_corpus)
    total = eval_corpus.token_count()
    oov_tokens = sum(1 for t in eval_corpus.iter_tokens() if t.raw in forms)
    document = {
        "oov_types": len(forms),
        "oov_tokens": oov_tokens,
        "token_rate": oov_tokens / total if total else 0.0,
    }
    if args.list:
        document["forms"] = sorted(forms)
    _emit(document)
    return 0


# ---------------------------------------------------------------- analyzer


def _cmd_analyzer_compile(args) -> int:
    schema = _schema(args)
    corpus = read_corpus(args.train, schema, "TRAIN")
    db = compile_analyzer(corpus, schema, backoff=BackoffMode(args.backoff))
    path = Path(args.db) if args.db else _out_dir(args) / "analyzer.jsonl"
    save_db(db, path)
    _emit({"path": str(path), **db.stats()})
    return 0


def _cmd_analyzer_query(args) -> int:
    db = load_db(args.db)
    analyses = analyze(args.form, db)
    _emit(
        {
            "form": args.form,
            "analyses": [a.to_record() for a in analyses] if analyses else [],
            "known": analyses is not None,
        }
    )
    return 0


def _cmd_analyzer_stats(args) -> int:
    db = load_db(args.db)
    _emit({"backoff": db.backoff.value, "variant": db.schema_ref, **db.stats()})
    return 0


# ---------------------------------------------------------------- tagger


def _cmd_tagger_train(args) -> int:
    schema = _schema(args)
    corpus = read_corpus(args.train, schema, "TRAIN")
    init = load_model(args.init) if args.init else None
    config = TrainConfig(epochs=args.epochs, seed=args.seed, init=init)
    model = train(corpus, schema, args.kind, config)
    if args.tune:
        tune_corpus = read_corpus(args.tune, schema, "TUNE")
        model = _select_epoch(model, tune_corpus, schema)
    path = Path(args.model) if args.model else _out_dir(args) / "model.json"
    save_model(model, path)
    _emit(
        {
            "path": str(path),
            "kind": model.kind,
            "selected_epoch": model.meta["selected_epoch"],
            "train_accuracy_history": list(model.history),
            "tune_accuracy": model.meta.get("tune_accuracy"),
        }
    )
    return 0


def _cmd_tagger_predict(args) -> int:
    model = load_model(args.model)
    corpus = read_corpus(args.corpus, model.schema, args.split)
    path = Path(args.dists) if args.dists else _out_dir(args) / "distributions.jsonl"
    save_distributions(distributions_for_corpus(model, corpus), path)
    _emit({"path": str(path), "sentences": len(corpus.sentences)})
    return 0


def _cmd_tagger_eval_raw(args) -> int:
    model = load_model(args.model)
    gold = read_corpus(args.gold, model.schema, args.split)
    pred = _argmax_corpus(gold, distributions_for_corpus(model, gold), model.schema)
    train_ref = (
        read_corpus(args.train, model.schema, "TRAIN") if args.train else None
    )
    report = accuracy(
        pred, gold, model.schema, subset=args.subset, slice=args.slice,
        train_ref=train_ref,
    )
    _emit(report.to_record())
    return 0


# ---------------------------------------------------------------- disambiguate


def _cmd_disambiguate(args) -> int:
    schema = _schema(args)
    corpus = read_corpus(args.corpus, schema, args.split)
    dists = load_external_distributions(args.dists, schema, corpus)
    db = load_db(args.db)
    if args.unigrams:
        unigrams = load_unigrams(args.unigrams)
    elif args.train:
        unigrams = build_unigrams(read_corpus(args.train, schema, "TRAIN"), schema)
    else:
        raise ValueError("provide --unigrams or --train for tie-breaking")
    result = disambiguate_corpus(
        corpus, dists, db, unigrams, schema, tie_break_source=args.tie_break
    )
    path = Path(args.out) if args.out else _out_dir(args) / "disambiguated.jsonl"
    write_corpus(result.corpus, path)
    _emit({"path": str(path), **result.stats})
    return 0


# ---------------------------------------------------------------- harmonize


def _cmd_harmonize_apply(args) -> int:
    harmonizer = _harmonizer(args)
    corpus = read_corpus(args.corpus, resolve_schema(args.source), args.split)
    out = harmonizer.harmonize_corpus(corpus, args.source)
    path = Path(args.out) if args.out else _out_dir(args) / "harmonized.jsonl"
    write_corpus(out, path)
    _emit({"path": str(path), "schema": out.schema_ref, "tokens": out.token_count()})
    return 0


def _cmd_harmonize_merge(args) -> int:
    harmonizer = _harmonizer(args)
    pairs = _read_pairs([_variant_path(p) for p in args.part], args.split)
    merged = harmonizer.build_merged(pairs, seed=args.seed)
    path = Path(args.out) if args.out else _out_dir(args) / "merged.jsonl"
    write_corpus(merged, path)
    _emit(
        {
            "path": str(path),
            "schema": merged.schema_ref,
            "sentences": len(merged.sentences),
            "tokens": merged.token_count(),
        }
    )
    return 0


def _cmd_harmonize_stage(args) -> int:
    harmonizer = _harmonizer(args)
    highs = _read_pairs([_variant_path(p) for p in args.high], args.split)
    low_variant, low_path = _variant_path(args.low)
    low = (read_corpus(low_path, resolve_schema(low_variant), args.split), low_variant)
    stage1, stage2 = harmonizer.build_stages(highs, low, seed=args.seed)
    out = _out_dir(args)
    stage1_path = out / "stage1.jsonl"
    stage2_path = out / "stage2.jsonl"
    write_corpus(stage1, stage1_path)
    write_corpus(stage2, stage2_path)
    _emit(
        {
            "stage1": {"path": str(stage1_path), "tokens": stage1.token_count()},
            "stage2": {"path": str(stage2_path), "tokens": stage2.token_count()},
            "schema": stage1.schema_ref,
        }
    )
    return 0


# ---------------------------------------------------------------- eval


def _cmd_eval_accuracy(args) -> int:
    schema = _schema(args)
    pred = read_corpus(args.pred, schema, args.split)
    gold = read_corpus(args.gold, schema, args.split)
    train_ref = read_corpus(args.train, schema, "TRAIN") if args.train else None
    report = accuracy(
        pred, gold, schema, subset=args.subset, slice=args.slice, train_ref=train_ref
    )
    document = report.to_record()
    if train_ref is not None:
        document["unseen_tag_rate"] = unseen_tag_rate(gold, train_ref, schema)
    _emit(document)
    return 0


def _cmd_eval_errors(args) -> int:
    schema = _schema(args)
    pred = read_corpus(args.pred, schema, args.split)
    gold = read_corpus(args.gold, schema, args.split)
    _emit(feature_error_stats(pred, gold, schema, subset=args.subset).to_record())
    return 0


def _cmd_eval_significance(args) -> int:
    schema = _schema(args)
    gold = read_corpus(args.gold, schema, args.split)
    pred_a = read_corpus(args.pred_a, schema, args.split)
    pred_b = read_corpus(args.pred_b, schema, args.split)
    outcomes_a = accuracy(pred_a, gold, schema, subset=args.subset).token_correct
    outcomes_b = accuracy(pred_b, gold, schema, subset=args.subset).token_correct
    _emit(mcnemar(outcomes_a, outcomes_b, alpha=args.alpha))
    return 0


def _cmd_eval_curve(args) -> int:
    schema = _schema(args)
    gold = read_corpus(args.gold, schema, args.split)
    results = {}
    for cell in args.cell:
        size_text, system, path = cell.split(":", 2)
        pred = read_corpus(path, schema, args.split)
        results[(int(size_text), system)] = accuracy(
            pred, gold, schema, subset=args.subset
        )
    table = learning_curve_report(results)
    out = _out_dir(args) / "curve.json"
    out.write_text(
        json.dumps(table.to_records(), ensure_ascii=False, indent=2, sort_keys=True)
        + "\n",
        encoding="utf-8",
    )
    print(table.render_text())
    return 0


# ---------------------------------------------------------------- experiment


def _cmd_experiment(args) -> int:
    document = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    spec = spec_from_document(document)
    result = run_experiment(spec, args.out_dir)
    print(f"run directory: {result.run_dir}")
    print(result.curve.render_text())
    return 0


# ---------------------------------------------------------------- synth


def _cmd_synth(args) -> int:
    spec = SyntheticSpec(
        variant=args.variant,
        vocabulary=args.vocabulary,
        ambiguity=args.ambiguity,
        budget=args.budget,
        sentence_length=args.sentence_length,
        eval_budget=args.eval_budget,
        seed=args.seed,
        name=args.name,
    )
    out = _out_dir(args)
    manifest: dict = {"variant": spec.variant, "seed": spec.seed}
    if args.high:
        target, highs = generate_synthetic_family(
            spec, high_count=args.high, high_budget=args.high_budget
        )
        for i, member in enumerate(highs):
            path = out / f"high{i}-train.jsonl"
            write_corpus(member.train, path)
            manifest[f"high{i}-train"] = str(path)
        data = target
    else:
        data = generate_synthetic(spec)
    for split, corpus in data.splits().items():
        path = out / f"{split.lower()}.jsonl"
        write_corpus(corpus, path)
        manifest[split.lower()] = str(path)
    db_path = out / "analyzer.jsonl"
    save_db(data.db, db_path)
    manifest["analyzer"] = str(db_path)
    manifest["tokens"] = {s.lower(): c.token_count() for s, c in data.splits().items()}
    _emit(manifest)
    return 0


# ---------------------------------------------------------------- wiring


def build_parser() -> _Parser:
    parser = _Parser(prog="morphdis", description=__doc__)
    parser.add_argument("--schema", default="msa", help="variant id or schema path")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--out-dir", default=".", help="directory for written artifacts")
    commands = parser.add_subparsers(dest="command", required=True)

    corpus = commands.add_parser("corpus", help="validate, sample, or diff corpora")
    corpus_sub = corpus.add_subparsers(dest="subcommand", required=True)
    p = corpus_sub.add_parser("validate")
    p.add_argument("path")
    p.add_argument("--split", default="TRAIN")
    p.set_defaults(func=_cmd_corpus_validate)
    p = corpus_sub.add_parser("sample")
    p.add_argument("path")
    p.add_argument("--sizes", required=True, help="comma-separated token budgets")
    p.add_argument("--split", default="TRAIN")
    p.set_defaults(func=_cmd_corpus_sample)
    p = corpus_sub.add_parser("oov")
    p.add_argument("train")
    p.add_argument("eval")
    p.add_argument("--split", default="DEV")
    p.add_argument("--list", action="store_true")
    p.set_defaults(func=_cmd_corpus_oov)

    analyzer = commands.add_parser("analyzer", help="compile or inspect analyzer DBs")
    analyzer_sub = analyzer.add_subparsers(dest="subcommand", required=True)
    p = analyzer_sub.add_parser("compile")
    p.add_argument("train")
    p.add_argument("--db")
    p.add_argument(
        "--backoff",
        choices=[m.value for m in BackoffMode],
        default=BackoffMode.KEEP_PREDICTIONS.value,
    )
    p.set_defaults(func=_cmd_analyzer_compile)
    p = analyzer_sub.add_parser("query")
    p.add_argument("db")
    p.add_argument("form")
    p.set_defaults(func=_cmd_analyzer_query)
    p = analyzer_sub.add_parser("stats")
    p.add_argument("db")
    p.set_defaults(func=_cmd_analyzer_stats)

    tagger = commands.add_parser("tagger", help="train, predict, or score taggers")
    tagger_sub = tagger.add_subparsers(dest="subcommand", required=True)
    p = tagger_sub.add_parser("train")
    p.add_argument("train")
    p.add_argument("--kind", choices=(FACTORED, UNFACTORED), default=FACTORED)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--tune", help="TUNE corpus for epoch selection")
    p.add_argument("--init", help="warm-start model for continued training")
    p.add_argument("--model", help="output path (default <out-dir>/model.json)")
    p.set_defaults(func=_cmd_tagger_train)
    p = tagger_sub.add_parser("predict")
    p.add_argument("model")
    p.add_argument("corpus")
    p.add_argument("--split", default="DEV")
    p.add_argument("--dists", help="output path (default <out-dir>/distributions.jsonl)")
    p.set_defaults(func=_cmd_tagger_predict)
    p = tagger_sub.add_parser("eval-raw")
    p.add_argument("model")
    p.add_argument("gold")
    p.add_argument("--split", default="DEV")
    p.add_argument("--subset", default="all")
    p.add_argument("--slice", default="all")
    p.add_argument("--train", help="TRAIN corpus for the oov slice")
    p.set_defaults(func=_cmd_tagger_eval_raw)

    p = commands.add_parser(
        "disambiguate", help="retag a corpus against an analyzer DB"
    )
    p.add_argument("corpus")
    p.add_argument("--dists", required=True, help="interchange distributions")
    p.add_argument("--db", required=True)
    p.add_argument("--unigrams", help="saved unigram model")
    p.add_argument("--train", help="TRAIN corpus to build unigrams from")
    p.add_argument("--split", default="DEV")
    p.add_argument("--tie-break", default="unigram", choices=("unigram", "classifier"))
    p.add_argument("--out")
    p.set_defaults(func=_cmd_disambiguate)

    harmonize = commands.add_parser("harmonize", help="map corpora across variants")
    harmonize_sub = harmonize.add_subparsers(dest="subcommand", required=True)
    p = harmonize_sub.add_parser("apply")
    p.add_argument("corpus")
    p.add_argument("--source", required=True, help="source variant id")
    p.add_argument("--target", required=True, help="target variant id")
    p.add_argument("--split", default="TRAIN")
    p.add_argument("--config", help="harmonization config document")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_harmonize_apply)
    p = harmonize_sub.add_parser("merge")
    p.add_argument("part", nargs="+", help="VARIANT=PATH")
    p.add_argument("--target", required=True)
    p.add_argument("--split", default="TRAIN")
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_harmonize_merge)
    p = harmonize_sub.add_parser("stage")
    p.add_argument("--high", action="append", required=True, help="VARIANT=PATH")
    p.add_argument("--low", required=True, help="VARIANT=PATH")
    p.add_argument("--target", required=True)
    p.add_argument("--split", default="TRAIN")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_harmonize_stage)

    evaluate = commands.add_parser("eval", help="score predictions against gold")
    evaluate_sub = evaluate.add_subparsers(dest="subcommand", required=True)
    p = evaluate_sub.add_parser("accuracy")
    p.add_argument("pred")
    p.add_argument("gold")
    p.add_argument("--split", default="DEV")
    p.add_argument("--subset", default="all")
    p.add_argument("--slice", default="all")
    p.add_argument("--train", help="TRAIN corpus for the oov slice")
    p.set_defaults(func=_cmd_eval_accuracy)
    p = evaluate_sub.add_parser("errors")
    p.add_argument("pred")
    p.add_argument("gold")
    p.add_argument("--split", default="DEV")
    p.add_argument("--subset", default="all")
    p.set_defaults(func=_cmd_eval_errors)
    p = evaluate_sub.add_parser("significance")
    p.add_argument("pred_a")
    p.add_argument("pred_b")
    p.add_argument("gold")
    p.add_argument("--split", default="DEV")
    p.add_argument("--subset", default="all")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=_cmd_eval_significance)
    p = evaluate_sub.add_parser("curve")
    p.add_argument("gold")
    p.add_argument("--cell", action="append", required=True, help="SIZE:SYSTEM:PATH")
    p.add_argument("--split", default="DEV")
    p.add_argument("--subset", default="all")
    p.set_defaults(func=_cmd_eval_curve)

    p = commands.add_parser("experiment", help="run a full experiment from a spec file")
    p.add_argument("spec")
    p.set_defaults(func=_cmd_experiment)

    p = commands.add_parser("synth", help="generate seeded synthetic datasets")
    p.add_argument("--variant", default="lev")
    p.add_argument("--vocabulary", type=int, default=5000)
    p.add_argument("--ambiguity", type=float, default=3.0)
    p.add_argument("--budget", type=int, default=10_000)
    p.add_argument("--sentence-length", type=int, default=10)
    p.add_argument("--eval-budget", type=int)
    p.add_argument("--name", default="syn")
    p.add_argument("--high", type=int, default=0, help="also emit N related corpora")
    p.add_argument("--high-budget", type=int)
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return args.func(args)
    except MorphdisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # keep the process alive for a clean exit code
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
