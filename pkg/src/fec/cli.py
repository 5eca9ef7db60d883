"""Command-line entry point: generate corpora, run benchmarks, report.

Subcommands:
  gen      write a synthetic embedding corpus
  run41    five-example tasks, singleton-vs-four ground truth
  run80    balanced clustering tasks (k clusters of equal size)
  report   aggregate result directories into a table and curve CSV

Every run writes per-episode JSON plus a summary JSON into --out-dir;
re-running with identical flags reproduces the files byte for byte
(payloads carry no timestamps). Loss traces go to a CSV with columns
episode_id,candidate_id,member_id,step,loss,refined where refined marks
the rounds at which a candidate's assignment was re-clustered.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Set FEC_LOG to
debug/info/warning to control logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .episodes import EmbeddingSet, EpisodeSpec, gen_synthetic, load_embeddings, save_embeddings
from .linalg import Metric
from .metrics import NMI_NORMALIZATION
from .rng import derive_seed
from .search import (
    EpisodeResult,
    ExhaustiveConfig,
    IterativeConfig,
    fec_exhaustive,
    fec_iterative,
    run_baseline_41,
    run_baseline_cluster,
    score_partition,
    singleton_assignment,
    truth_of,
)

log = logging.getLogger("fec")

RUN41_METHODS = ("euclidean", "cosine", "pca+euclidean", "pca+cosine", "fec")
RUN80_METHODS = ("kmeans", "sinkhorn", "pca+sinkhorn", "fec+sinkhorn")
ABLATIONS = ("select_best", "refine", "reinit")

_WORKER_CORPUS: EmbeddingSet | None = None


def _worker_init(corpus_path: str) -> None:
    global _WORKER_CORPUS
    _WORKER_CORPUS = load_embeddings(corpus_path)


def _json_dumps(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _write_json(path: Path, payload) -> None:
    path.write_text(_json_dumps(payload), encoding="utf-8")


def _baseline_result(episode, method: str, chosen, index: int, config: dict) -> EpisodeResult:
    truth = truth_of(episode)
    return EpisodeResult(
        episode_id=index,
        method=method,
        chosen=chosen,
        truth=truth,
        candidates=[chosen],
        losses=[],
        traces=[],
        refine_rounds=[[]],
        timelines=[[(1, chosen.labels)]],
        metrics=score_partition(chosen, truth) if truth is not None else None,
        per_candidate_metrics=None,
        config=config,
    )


def _run41_episode(task) -> tuple[int, dict, list[tuple]]:
    (index, seed, method, knobs) = task
    spec = EpisodeSpec.four_to_one(1, seed)
    episode = _sample_from_worker(spec, index)
    run_seed = derive_seed(seed, "run", index)
    if method == "fec":
        cfg = ExhaustiveConfig(
            sizes=(4, 1),
            alpha=knobs["alpha"],
            n_ensemble=knobs["ensembles"],
            delta=knobs["delta"],
            metric=Metric.parse(knobs["metric"]),
            seed=run_seed,
            max_steps=knobs["max_steps"],
            n_layers=knobs["layers"],
            out_dim=knobs["out_dim"],
            lr=knobs["lr"],
            loss_kind=knobs["loss"],
        )
        result = fec_exhaustive(episode, cfg, episode_id=index)
    else:
        metric = Metric.EUCLIDEAN if "euclidean" in method else Metric.COSINE
        pca_dims = knobs["pca_dims"] if method.startswith("pca+") else None
        idx = run_baseline_41(episode, metric, pca_dims=pca_dims)
        config = {"method": method, "metric": metric.value, "pca_dims": pca_dims}
        result = _baseline_result(episode, method, singleton_assignment(idx), index, config)
    return index, result.to_dict(), _trace_rows(result)


def _run80_episode(task) -> tuple[int, dict, list[tuple]]:
    (index, seed, method, knobs) = task
    spec = EpisodeSpec.balanced(knobs["k"], knobs["cluster_size"], 1, seed)
    episode = _sample_from_worker(spec, index)
    run_seed = derive_seed(seed, "run", index)
    if method == "fec+sinkhorn":
        ablated = set(knobs["ablate"])
        cfg = IterativeConfig(
            alpha=knobs["alpha"],
            n_candidates=knobs["candidates"],
            n_ensemble=knobs["ensembles"],
            t_fine=knobs["t_fine"],
            t_refine=knobs["t_refine"],
            metric=Metric.parse(knobs["metric"]),
            base_clusterer="sinkhorn",
            gamma=knobs["gamma"],
            seed=run_seed,
            n_layers=knobs["layers"],
            out_dim=knobs["out_dim"],
            lr=knobs["lr"],
            loss_kind=knobs["loss"],
            select_best="select_best" not in ablated,
            refine="refine" not in ablated,
            reinit="reinit" not in ablated,
        )
        result = fec_iterative(episode, knobs["k"], cfg, episode_id=index)
    else:
        pca_dims = knobs["pca_dims"] if method.startswith("pca+") else None
        assignment = run_baseline_cluster(
            episode,
            knobs["k"],
            method,
            pca_dims=pca_dims,
            seed=derive_seed(run_seed, "candidate", 0),
            metric=Metric.parse(knobs["metric"]),
            gamma=knobs["gamma"],
        )
        config = {
            "method": method,
            "metric": knobs["metric"],
            "gamma": knobs["gamma"],
            "pca_dims": pca_dims,
            "k": knobs["k"],
        }
        result = _baseline_result(episode, method, assignment, index, config)
    return index, result.to_dict(), _trace_rows(result)


def _sample_from_worker(spec: EpisodeSpec, index: int) -> EmbeddingSet:
    from .episodes import sample_episode

    if _WORKER_CORPUS is None:
        raise RuntimeError("worker corpus not initialized")
    return sample_episode(_WORKER_CORPUS, spec, index)


def _trace_rows(result: EpisodeResult) -> list[tuple]:
    rows = []
    for trace in result.traces:
        refine_steps = set(result.refine_rounds[trace.candidate_id])
        for step, loss in enumerate(trace.losses, start=1):
            rows.append(
                (
                    result.episode_id,
                    trace.candidate_id,
                    trace.member_id,
                    step,
                    loss,
                    1 if step in refine_steps else 0,
                )
            )
    return rows


def _stderr(values) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def _collect(args, method: str, episode_fn, tasks, out_dir: Path, run_config: dict) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    results = []
    if args.jobs > 1:
        with ProcessPoolExecutor(
            max_workers=args.jobs, initializer=_worker_init, initargs=(args.corpus,)
        ) as pool:
            results = list(pool.map(episode_fn, tasks, chunksize=4))
    else:
        _worker_init(args.corpus)
        results = [episode_fn(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    trace_rows = []
    payloads = []
    for index, payload, rows in results:
        _write_json(out_dir / f"{method}_ep_{index:05d}.json", payload)
        payloads.append(payload)
        trace_rows.extend(rows)
    if trace_rows:
        lines = ["episode_id,candidate_id,member_id,step,loss,refined"]
        lines.extend(f"{e},{c},{m},{s},{repr(float(l))},{r}" for e, c, m, s, l, r in trace_rows)
        (out_dir / f"{method}_traces.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    stats = _aggregate_stats(payloads)
    summary = {
        "method": method,
        "episodes": len(payloads),
        "config": run_config,
        "stats": stats,
        "nmi_normalization": NMI_NORMALIZATION,
    }
    _write_json(out_dir / f"{method}_summary.json", summary)
    return summary


def _aggregate_stats(payloads) -> dict:
    metrics = [p["metrics"] for p in payloads if p.get("metrics")]
    stats: dict = {}
    if metrics:
        acc = [float(m["correct"]) for m in metrics]
        aris = [m["ari"] for m in metrics]
        nmis = [m["nmi"] for m in metrics]
        stats = {
            "accuracy": float(np.mean(acc)),
            "accuracy_stderr": _stderr(acc),
            "ari": float(np.mean(aris)),
            "ari_stderr": _stderr(aris),
            "nmi": float(np.mean(nmis)),
            "nmi_stderr": _stderr(nmis),
        }
    return stats


def _cmd_gen(args) -> int:
    corpus = gen_synthetic(args.classes, args.per_class, args.dim, args.sep, args.noise, args.seed)
    save_embeddings(corpus, args.out, fmt=args.format)
    print(f"wrote {corpus.n} examples ({corpus.dim}-d, {args.classes} classes) to {args.out}")
    return 0


def _cmd_run41(args) -> int:
    if args.method.startswith("pca+") and args.pca_dims is None:
        raise UsageError("--pca-dims is required for PCA methods")
    knobs = {
        "alpha": args.alpha,
        "delta": args.delta,
        "ensembles": args.ensembles,
        "max_steps": args.max_steps,
        "metric": args.metric,
        "pca_dims": args.pca_dims,
        "layers": args.layers,
        "out_dim": args.out_dim,
        "lr": args.lr,
        "loss": args.loss,
    }
    tasks = [(i, args.seed, args.method, knobs) for i in range(args.episodes)]
    run_config = {"command": "run41", "corpus": str(args.corpus), "seed": args.seed, **knobs}
    summary = _collect(args, args.method, _run41_episode, tasks, Path(args.out_dir), run_config)
    print(f"accuracy={summary['stats'].get('accuracy', float('nan'))}")
    return 0


def _cmd_run80(args) -> int:
    if args.method.startswith("pca+") and args.pca_dims is None:
        raise UsageError("--pca-dims is required for PCA methods")
    ablate = [a for a in (args.ablate.split(",") if args.ablate else []) if a]
    for a in ablate:
        if a not in ABLATIONS:
            raise UsageError(f"unknown ablation {a!r}; choose from {','.join(ABLATIONS)}")
    knobs = {
        "k": args.k,
        "cluster_size": args.cluster_size,
        "alpha": args.alpha,
        "ensembles": args.ensembles,
        "candidates": args.candidates,
        "t_fine": args.t_fine,
        "t_refine": args.t_refine,
        "gamma": args.gamma,
        "metric": args.metric,
        "pca_dims": args.pca_dims,
        "layers": args.layers,
        "out_dim": args.out_dim,
        "lr": args.lr,
        "loss": args.loss,
        "ablate": ablate,
    }
    tasks = [(i, args.seed, args.method, knobs) for i in range(args.episodes)]
    run_config = {"command": "run80", "corpus": str(args.corpus), "seed": args.seed, **knobs}
    summary = _collect(args, args.method, _run80_episode, tasks, Path(args.out_dir), run_config)
    stats = summary["stats"]
    print(f"ari={stats.get('ari', float('nan'))} nmi={stats.get('nmi', float('nan'))}")
    return 0


def _load_results(results_dir: Path) -> dict[str, list[dict]]:
    if not results_dir.is_dir():
        raise RuntimeError(f"result directory {results_dir} does not exist")
    by_method: dict[str, list[dict]] = {}
    for path in sorted(results_dir.glob("*_ep_*.json")):
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, OSError) as e:
            raise RuntimeError(f"corrupt result file {path}: {e}") from e
        by_method.setdefault(payload["method"], []).append(payload)
    if not by_method:
        raise RuntimeError(f"no episode results found in {results_dir}")
    return by_method


def _candidate_labels_at(timeline, step: int):
    labels = timeline[0][1]
    for start, snapshot in timeline:
        if start <= step:
            labels = snapshot
        else:
            break
    return labels


def _write_curves(results_dir: Path, by_method: dict, curves_path: Path) -> int:
    from .metrics import ari as ari_fn

    rows = ["method,episode_id,candidate_id,step,loss,best,ari"]
    count = 0
    for method, payloads in sorted(by_method.items()):
        traces_file = results_dir / f"{method}_traces.csv"
        if not traces_file.exists():
            continue
        losses: dict[tuple[int, int, int], list[float]] = {}
        for line in traces_file.read_text(encoding="utf-8").splitlines()[1:]:
            ep, cand, member, step, loss, _refined = line.split(",")
            key = (int(ep), int(cand), int(step))
            losses.setdefault(key, []).append(float(loss))
        by_episode = {p["episode_id"]: p for p in payloads}
        per_round: dict[tuple[int, int], dict[int, float]] = {}
        for (ep, cand, step), vals in losses.items():
            per_round.setdefault((ep, step), {})[cand] = min(vals)
        for (ep, step), cand_losses in sorted(per_round.items()):
            payload = by_episode.get(ep)
            if payload is None:
                continue
            best_cand = min(cand_losses, key=lambda c: (cand_losses[c], c))
            for cand in sorted(cand_losses):
                truth = payload.get("truth")
                ari_val = ""
                if truth is not None:
                    labels = _candidate_labels_at(payload["timelines"][cand], step)
                    ari_val = repr(float(ari_fn(labels, truth)))
                rows.append(
                    f"{method},{ep},{cand},{step},{repr(cand_losses[cand])},"
                    f"{1 if cand == best_cand else 0},{ari_val}"
                )
                count += 1
    curves_path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return count


def _cmd_report(args) -> int:
    results_dir = Path(args.results)
    by_method = _load_results(results_dir)
    header = f"{'method':<16} {'n':>5} {'accuracy':>18} {'ari':>18} {'nmi':>18}"
    print(header)
    print("-" * len(header))
    for method in sorted(by_method):
        payloads = by_method[method]
        stats = _aggregate_stats(payloads)
        if stats:
            acc = f"{stats['accuracy']:.4f} ± {stats['accuracy_stderr']:.4f}"
            a = f"{stats['ari']:.4f} ± {stats['ari_stderr']:.4f}"
            n = f"{stats['nmi']:.4f} ± {stats['nmi_stderr']:.4f}"
        else:
            acc = a = n = "-"
        print(f"{method:<16} {len(payloads):>5} {acc:>18} {a:>18} {n:>18}")
    if args.curves:
        rows = _write_curves(results_dir, by_method, Path(args.curves))
        print(f"wrote {rows} curve rows to {args.curves}")
    return 0


class UsageError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic embedding corpus")
    gen.add_argument("--classes", type=int, required=True)
    gen.add_argument("--per-class", type=int, required=True, dest="per_class")
    gen.add_argument("--dim", type=int, required=True)
    gen.add_argument("--sep", type=float, default=1.0)
    gen.add_argument("--noise", type=float, default=0.1)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--format", choices=("text", "binary"), default="text")
    gen.set_defaults(fn=_cmd_gen)

    def common_run_flags(p, default_ensembles):
        p.add_argument("--corpus", required=True)
        p.add_argument("--episodes", type=int, default=100)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out-dir", required=True, dest="out_dir")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--alpha", type=float, default=10.0)
        p.add_argument("--ensembles", type=int, default=default_ensembles)
        p.add_argument("--metric", choices=("cosine", "euclidean"), default="cosine")
        p.add_argument("--pca-dims", type=int, default=None, dest="pca_dims")
        p.add_argument("--out-dim", type=int, default=512, dest="out_dim")
        p.add_argument("--lr", type=float, default=1e-3)
        p.add_argument("--loss", choices=("neglog", "literal"), default="neglog")

    run41 = sub.add_parser("run41", help="five-example singleton-vs-four benchmark")
    run41.add_argument("--method", choices=RUN41_METHODS, required=True)
    common_run_flags(run41, default_ensembles=32)
    run41.add_argument("--delta", type=float, default=1e-5)
    run41.add_argument("--max-steps", type=int, default=500, dest="max_steps")
    run41.add_argument("--layers", type=int, choices=(1, 2), default=1)
    run41.set_defaults(fn=_cmd_run41)

    run80 = sub.add_parser("run80", help="balanced k-cluster benchmark")
    run80.add_argument("--method", choices=RUN80_METHODS, required=True)
    common_run_flags(run80, default_ensembles=5)
    run80.add_argument("--k", type=int, default=5)
    run80.add_argument("--cluster-size", type=int, default=16, dest="cluster_size")
    run80.add_argument("--candidates", type=int, default=8)
    run80.add_argument("--t-refine", type=int, default=4, dest="t_refine")
    run80.add_argument("--t-fine", type=int, default=64, dest="t_fine")
    run80.add_argument("--gamma", type=float, default=0.1)
    run80.add_argument("--layers", type=int, choices=(1, 2), default=2)
    run80.add_argument("--ablate", default="", help="comma list: select_best,refine,reinit")
    run80.set_defaults(fn=_cmd_run80)

    report = sub.add_parser("report", help="aggregate result directories")
    report.add_argument("--results", required=True)
    report.add_argument("--curves", default=None, help="also write a per-round curve CSV here")
    report.set_defaults(fn=_cmd_report)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("FEC_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.fn(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failures map to exit 1, message on stderr
        log.debug("command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
