#!/usr/bin/env python3
"""Early, late and hybrid fusion on two-modality corpora where each modality sees half the abusive class."""
import argparse

import numpy as np

from abusegraph.evaluation import FUSION_STRATEGIES, FoldPlan, fusion_evaluate, kfold_evaluate


def split_modality_corpus(seed, n=600, d=16, shift=8.0):
    r = np.random.default_rng(seed)
    y = np.zeros(n, dtype=int)
    y[: n // 3] = 1
    A, B = r.normal(size=(n, d)), r.normal(size=(n, d))
    A[: n // 6, 0] += shift
    B[n // 6: n // 3, 0] += shift
    return A, B, y


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int, nargs="+", default=[42, 43, 44, 45, 46])
    p.add_argument("--shift", type=float, default=8.0, help="class shift along the informative axis")
    p.add_argument("--dim", type=int, default=16)
    args = p.parse_args()

    print(f"{'seed':<6}{'A':>8}{'B':>8}" + "".join(f"{s:>9}" for s in FUSION_STRATEGIES))
    rows = []
    for seed in args.seeds:
        A, B, y = split_modality_corpus(seed, d=args.dim, shift=args.shift)
        plan = FoldPlan(seed=seed)
        ra, rb = kfold_evaluate(A, y, plan), kfold_evaluate(B, y, plan)
        fused = [fusion_evaluate(A, B, y, s, plan, reports=(ra, rb)).macro_f for s in FUSION_STRATEGIES]
        rows.append([ra.macro_f, rb.macro_f, *fused])
        print(f"{seed:<6}" + "".join(f"{v:8.2f} " for v in rows[-1]))
    print(f"{'mean':<6}" + "".join(f"{v:8.2f} " for v in np.mean(rows, axis=0)))


if __name__ == "__main__":
    main()
