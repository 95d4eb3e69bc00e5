#!/usr/bin/env python3
"""Which best features does an embedding already capture? Synthetic corpus, fold-scoped text features."""
import argparse

import numpy as np

from abusegraph.embeddings import TrainConfig, embed_corpus
from abusegraph.evaluation import FoldPlan, kfold_evaluate
from abusegraph.features import (GRAPH_FEATURE_NAMES, TEXT_FEATURE_NAMES, capture_analysis,
                                 graph_best_features, text_feature_builder, verdict_table)
from abusegraph.ingest import (ABUSIVE, ExtractionConfig, SynthConfig, extract_graph,
                               generate_synthetic_corpus)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=600)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--methods", nargs="+", default=["wda_sg2v_sb", "g2v"])
    args = p.parse_args()

    convs = generate_synthetic_corpus(SynthConfig.scaled(args.n, seed=args.seed))
    graphs = [extract_graph(c) for c in convs]
    y = np.array([c.label == ABUSIVE for c in convs], dtype=int)
    scoped = [[extract_graph(c, ExtractionConfig(scope=s)) for s in ("Full", "Before", "After")] for c in convs]
    G = np.array([graph_best_features(*gs) for gs in scoped])
    features = {name: G[:, j] for j, name in enumerate(GRAPH_FEATURE_NAMES)}
    features.update({name: text_feature_builder(convs, j) for j, name in enumerate(TEXT_FEATURE_NAMES)})

    plan = FoldPlan(seed=args.seed)
    table = {}
    for method in args.methods:
        E = embed_corpus(graphs, method, "degree", TrainConfig(seed=args.seed)).vectors
        base = kfold_evaluate(E, y, plan).run_f
        table[method] = [capture_analysis(E, f, y, plan, name=name, baseline_runs=base)
                         for name, f in features.items()]
    print(verdict_table(table), end="")


if __name__ == "__main__":
    main()
