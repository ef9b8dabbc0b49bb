"""Solver health sweep across problem sizes.

For each dimension in a list, solves a batch of random instances and
reports worst-case optimality certificates (duality gap, feasibility
violation, complementary slackness, most negative eigenvalue), the
iteration count distribution, and eigendecompositions per objective
evaluation. Optionally cross-checks the dual solver against the
penalty-method reference solver.

Usage:
    python3 scripts/run_diagnostics.py --dims 5,20,50 --instances 10 --penalty
"""

import argparse
import time

import numpy as np

from dqml import kkt_report, random_class_problem, solve_dual, solve_primal_penalty


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--dims", default="5,20,50",
                   help="comma-separated problem dimensions")
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--penalty", action="store_true",
                   help="also compare objectives against the penalty solver")
    return p.parse_args()


def main():
    args = parse_args()
    dims = [int(tok) for tok in args.dims.split(",")]

    header = (f"{'dim':>5} {'gap':>10} {'viol':>10} {'slack':>10} {'mineig':>10} "
              f"{'iters':>11} {'eig/eval':>8} {'sec':>6}")
    if args.penalty:
        header += f" {'pen diff':>10}"
    print(header)

    for dim in dims:
        gaps, viols, slacks, eigs, iters = [], [], [], [], []
        pen_diffs = []
        ratio = 0.0
        t0 = time.perf_counter()
        for i in range(args.instances):
            rng = np.random.default_rng([args.seed, dim, i])
            prob = random_class_problem(rng, dim=dim, n_intra=2 * dim,
                                        n_extra=4 * dim, lam=args.lam)
            trained = solve_dual(prob)
            rep = trained.report
            kkt = kkt_report(prob, trained.dual, trained.matrix)
            gaps.append(abs(kkt.duality_gap) / max(1.0, abs(kkt.primal_objective)))
            viols.append(kkt.max_violation)
            slacks.append(kkt.complementary_slackness)
            eigs.append(-kkt.min_eigenvalue)
            iters.append(rep.iterations)
            ratio = rep.eig_calls / rep.objective_evals
            if args.penalty:
                pen = solve_primal_penalty(prob)
                pen_diffs.append(abs(pen.objective - rep.primal_objective)
                                 / max(1.0, abs(rep.primal_objective)))
        elapsed = time.perf_counter() - t0
        it = np.asarray(iters)
        line = (f"{dim:>5} {max(gaps):>10.2e} {max(viols):>10.2e} "
                f"{max(slacks):>10.2e} {max(eigs):>10.2e} "
                f"{int(np.median(it)):>4} med {it.max():>3} max "
                f"{ratio:>8.2f} {elapsed:>6.1f}")
        if args.penalty:
            line += f" {max(pen_diffs):>10.2e}"
        print(line)


if __name__ == "__main__":
    main()
