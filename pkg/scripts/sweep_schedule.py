#!/usr/bin/env python3
"""Grid sweep over the refinement period and total fine-tuning rounds.

Reports mean ARI/NMI of the iterative driver for each (t_refine, t_fine)
combination on a synthetic balanced-clustering suite. Useful for picking
a schedule on a new embedding source.

Example:
    python3 scripts/sweep_schedule.py --episodes 10 --t-refine 4 8 --t-fine 16 32 64
"""

import argparse

import numpy as np

from fec.episodes import EpisodeSpec, gen_synthetic, sample_episode
from fec.rng import derive_seed
from fec.search import IterativeConfig, fec_iterative


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--episodes", type=int, default=10)
    parser.add_argument("--t-refine", type=int, nargs="+", default=[4, 8], dest="t_refine")
    parser.add_argument("--t-fine", type=int, nargs="+", default=[16, 64], dest="t_fine")
    parser.add_argument("--candidates", type=int, default=4)
    parser.add_argument("--ensembles", type=int, default=5)
    parser.add_argument("--out-dim", type=int, default=256, dest="out_dim")
    parser.add_argument("--noise", type=float, default=0.25)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    corpus = gen_synthetic(20, 50, dim=32, sep=1.0, noise=args.noise, seed=7)
    spec = EpisodeSpec.balanced(5, 16, args.episodes, seed=args.seed)
    episodes = [sample_episode(corpus, spec, i) for i in range(args.episodes)]

    print(f"{'t_refine':>9} {'t_fine':>7} {'ARI':>8} {'NMI':>8}")
    for t_refine in args.t_refine:
        for t_fine in args.t_fine:
            if t_refine > t_fine:
                continue
            aris, nmis = [], []
            for index, episode in enumerate(episodes):
                cfg = IterativeConfig(
                    seed=derive_seed(args.seed, "run", index),
                    n_candidates=args.candidates,
                    n_ensemble=args.ensembles,
                    t_fine=t_fine,
                    t_refine=t_refine,
                    out_dim=args.out_dim,
                )
                result = fec_iterative(episode, 5, cfg, episode_id=index)
                aris.append(result.metrics["ari"])
                nmis.append(result.metrics["nmi"])
            print(f"{t_refine:>9} {t_fine:>7} {np.mean(aris):>8.4f} {np.mean(nmis):>8.4f}")


if __name__ == "__main__":
    main()
