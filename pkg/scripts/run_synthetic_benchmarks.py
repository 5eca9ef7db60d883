#!/usr/bin/env python3
"""Desk-scale benchmark sweep over synthetic corpora.

Generates a labeled corpus, runs every five-example method and every
balanced-clustering method through the CLI, then prints the aggregated
table. Results land in --out-dir and can be re-reported later with
`fec report`.

Example:
    python3 scripts/run_synthetic_benchmarks.py --out-dir results/ --episodes 200
"""

import argparse
import sys
from pathlib import Path

from fec.cli import main as fec_main


def run(argv):
    code = fec_main(argv)
    if code != 0:
        print(f"command failed ({code}): {' '.join(argv)}", file=sys.stderr)
        sys.exit(code)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--episodes", type=int, default=100)
    parser.add_argument("--episodes-80", type=int, default=25)
    parser.add_argument("--noise", type=float, default=0.15)
    parser.add_argument("--noise-80", type=float, default=0.25)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus41 = out / "corpus_41.femb"
    corpus80 = out / "corpus_80.femb"
    base_gen = ["--classes", "20", "--per-class", "50", "--dim", "32", "--sep", "1.0",
                "--seed", str(args.seed)]
    run(["gen", *base_gen, "--noise", str(args.noise), "--out", str(corpus41)])
    run(["gen", *base_gen, "--noise", str(args.noise_80), "--out", str(corpus80)])

    dir41 = out / "run41"
    for method in ("euclidean", "cosine", "pca+euclidean", "pca+cosine", "fec"):
        print(f"== run41 {method}")
        argv = [
            "run41", "--corpus", str(corpus41), "--method", method,
            "--episodes", str(args.episodes), "--seed", "2",
            "--out-dir", str(dir41), "--jobs", str(args.jobs),
        ]
        if method.startswith("pca+"):
            argv += ["--pca-dims", "4"]
        if method == "fec":
            argv += ["--ensembles", "4"]
        run(argv)

    dir80 = out / "run80"
    for method in ("kmeans", "sinkhorn", "pca+sinkhorn", "fec+sinkhorn"):
        print(f"== run80 {method}")
        argv = [
            "run80", "--corpus", str(corpus80), "--method", method,
            "--episodes", str(args.episodes_80), "--seed", "1",
            "--out-dir", str(dir80), "--jobs", str(args.jobs),
        ]
        if method.startswith("pca+"):
            argv += ["--pca-dims", "16"]
        if method == "fec+sinkhorn":
            argv += ["--candidates", "4", "--t-refine", "8", "--t-fine", "16", "--out-dim", "256"]
        run(argv)

    print("\n== five-example table")
    run(["report", "--results", str(dir41)])
    print("\n== balanced-clustering table")
    run(["report", "--results", str(dir80), "--curves", str(out / "curves_80.csv")])


if __name__ == "__main__":
    main()
