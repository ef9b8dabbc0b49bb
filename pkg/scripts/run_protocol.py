"""Repeated-split classification protocol on synthetic Gaussian data.

Generates a multi-class Gaussian dataset, then for each regularization
weight in a grid: repeatedly split into train/test, train per-class
matrices, and score both decision rules. Prints mean and standard
deviation of the test error across repetitions.

Usage:
    python3 scripts/run_protocol.py --classes 3 --dim 10 --per-class 70 \
        --m-train 20 --reps 10 --lambdas 0.1,1,10
"""

import argparse
import time

import numpy as np

from dqml import (
    SplitSpec,
    SynthSpec,
    evaluate,
    generate_synthetic,
    split_random,
    train_model_set,
)


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--per-class", type=int, default=70)
    p.add_argument("--sep", type=float, default=6.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--m-train", type=int, default=20)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambdas", default="0.1,0.3,1,3,10",
                   help="comma-separated regularization weights")
    p.add_argument("--threads", type=int, default=1)
    return p.parse_args()


def main():
    args = parse_args()
    lambdas = [float(tok) for tok in args.lambdas.split(",")]
    spec = SynthSpec(class_count=args.classes, dim=args.dim,
                     per_class=args.per_class, separation=args.sep,
                     sigma=args.sigma, seed=args.seed)
    ds = generate_synthetic(spec)
    split = SplitSpec(per_class_train=args.m_train, repetitions=args.reps,
                      seed=args.seed)

    print(f"{args.classes} classes, dim {args.dim}, {args.per_class} per class "
          f"({args.m_train} to train), {args.reps} repetitions")
    print(f"{'lambda':>8} {'max err':>16} {'nn err':>16} {'sec':>6}")
    for lam in lambdas:
        errors = {"max": [], "nn_cosine": []}
        t0 = time.perf_counter()
        for r in range(args.reps):
            train_ds, test_ds = split_random(ds, split, r)
            model = train_model_set(train_ds, lam, threads=args.threads)
            for rule in errors:
                errors[rule].append(evaluate(model, test_ds, rule).error_rate)
        elapsed = time.perf_counter() - t0
        cells = []
        for rule in ("max", "nn_cosine"):
            v = np.asarray(errors[rule])
            cells.append(f"{100 * v.mean():6.2f} +- {100 * v.std():5.2f}")
        print(f"{lam:>8.2f} {cells[0]:>16} {cells[1]:>16} {elapsed:>6.1f}")


if __name__ == "__main__":
    main()
