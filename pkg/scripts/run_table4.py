#!/usr/bin/env python3
"""Macro F of every embedding method on a seeded synthetic corpus."""
import argparse
import time

import numpy as np

from abusegraph.embeddings import METHODS, TrainConfig, embed_corpus
from abusegraph.evaluation import FoldPlan, kfold_evaluate
from abusegraph.ingest import ABUSIVE, SynthConfig, extract_graph, generate_synthetic_corpus
from abusegraph.wsgcn import WsgcnConfig, train_wsgcn


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=600, help="number of conversations")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--scheme", default="degree")
    p.add_argument("--skip-gcn", action="store_true", help="leave out the two GCN rows")
    args = p.parse_args()

    convs = generate_synthetic_corpus(SynthConfig.scaled(args.n, seed=args.seed))
    graphs = [extract_graph(c) for c in convs]
    y = np.array([c.label == ABUSIVE for c in convs], dtype=int)
    plan = FoldPlan(seed=args.seed)
    print(f"{len(graphs)} graphs, {y.sum()} abusive, scheme {args.scheme}")
    print(f"{'method':<14}{'P':>8}{'R':>8}{'F':>8}{'sec':>7}")

    def row(name, E, secs):
        rep = kfold_evaluate(E, y, plan)
        print(f"{name:<14}{rep.macro_precision:8.2f}{rep.macro_recall:8.2f}{rep.macro_f:8.2f}{secs:7.1f}", flush=True)

    for method in METHODS:
        t0 = time.perf_counter()
        emb = embed_corpus(graphs, method, args.scheme, TrainConfig(seed=args.seed))
        row(method, emb.vectors, time.perf_counter() - t0)
    if not args.skip_gcn:
        for wd, name in ((False, "wsgcn"), (True, "wda_wsgcn")):
            t0 = time.perf_counter()
            _, emb = train_wsgcn(graphs, "plusminus", WsgcnConfig(weighted_directed=wd, seed=args.seed))
            row(name, emb.vectors, time.perf_counter() - t0)


if __name__ == "__main__":
    main()
