#!/usr/bin/env python3
"""Factored vs unfactored learning curve on seeded synthetic data.

Generates one dataset, trains both tagger kinds at each token budget, and
prints a sizes-by-systems table of DEV exact-match accuracy with best and
statistically-indistinguishable cells flagged.  Pass --use-analyzer to retag
against the dataset's oracle analyzer before scoring.
"""

import argparse
import json
from pathlib import Path

from morphdis.analyzer import save_db
from morphdis.corpus import write_corpus
from morphdis.evaluation import learning_curve_report
from morphdis.pipeline import ExperimentPaths, ExperimentSpec, run_experiment
from morphdis.synth import SyntheticSpec, generate_synthetic
from morphdis.tagger import FACTORED, UNFACTORED


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="runs/learning-curve")
    parser.add_argument("--variant", default="lev")
    parser.add_argument("--sizes", default="500,1000,2000,4000")
    parser.add_argument("--vocabulary", type=int, default=5000)
    parser.add_argument("--ambiguity", type=float, default=3.0)
    parser.add_argument("--budget", type=int, help="train pool (default 1.25x max size)")
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--seed", type=int, default=12345)
    parser.add_argument("--use-analyzer", action="store_true")
    return parser.parse_args()


def main() -> int:
    args = parse_args()
    sizes = tuple(int(s) for s in args.sizes.split(","))
    budget = args.budget or int(max(sizes) * 1.25)
    out = Path(args.out_dir)
    data_dir = out / "data"
    data_dir.mkdir(parents=True, exist_ok=True)

    data = generate_synthetic(
        SyntheticSpec(
            variant=args.variant,
            vocabulary=args.vocabulary,
            ambiguity=args.ambiguity,
            budget=budget,
            seed=args.seed,
        )
    )
    paths = {}
    for split, corpus in data.splits().items():
        path = data_dir / f"{split.lower()}.jsonl"
        write_corpus(corpus, path)
        paths[split.lower()] = path
    db_path = data_dir / "analyzer.jsonl"
    save_db(data.db, db_path)

    results = {}
    for kind in (FACTORED, UNFACTORED):
        spec = ExperimentSpec(
            paths=ExperimentPaths(
                train=paths["train"],
                tune=paths["tune"],
                dev=paths["dev"],
                test=paths["test"],
                analyzer=db_path if args.use_analyzer else None,
            ),
            variant=args.variant,
            kind=kind,
            use_analyzer=args.use_analyzer,
            sizes=sizes,
            seed=args.seed,
            epochs=args.epochs,
        )
        run = run_experiment(spec, out / f"runs-{kind}")
        print(f"{kind}: {run.run_dir}")
        for size in sizes:
            results[(size, kind)] = run.dev_report(size)

    table = learning_curve_report(results)
    print()
    print(table.render_text())
    (out / "curve.json").write_text(
        json.dumps(table.to_records(), ensure_ascii=False, indent=2, sort_keys=True)
        + "\n",
        encoding="utf-8",
    )
    print(f"\nwrote {out / 'curve.json'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
