"""Reference solvers used to certify the dual solver on small instances.

Two independent routes to the constrained primal

    minimize (1/2)||P||_F^2 + lam * tr(P O)
    s.t.     x_i^T P x_i >= b,  P PSD

are provided: an exhaustive grid search over the three free entries of a
2 x 2 symmetric matrix, and a quadratic-penalty method with projected
gradient descent for small dimensions. A third solver minimizes the
unregularized criterion tr(P O) under the same constraints, which is the
natural objective when no Frobenius regularizer is wanted; it can be
unbounded below on unlucky data, which is detected rather than prevented.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    InfeasibleProblemError,
    InvalidInputError,
    NumericalFailureError,
    UnboundedProblemError,
)
from .qml import ClassProblem, check_feasible_samples
from .symmat import SymmetricMatrix, positive_part

DEFAULT_SCHEDULE = (1.0, 10.0, 100.0, 1000.0, 10000.0)
MAX_INNER_STEPS = 2000
GRID_PSD_TOL = 1e-9
UNBOUNDED_FLOOR = -1e12


@dataclass(frozen=True)
class OracleResult:
    """Output of a reference solver.

    resolution_or_final_penalty holds the grid step for the grid method and
    the last penalty weight for the penalty method. stage_violations records
    the worst constraint violation after each penalty stage (empty for grid).
    """

    matrix: SymmetricMatrix
    objective: float
    method: str
    resolution_or_final_penalty: float
    max_violation: float
    candidates: int = 0
    stage_violations: tuple[float, ...] = ()


def default_half_width(problem: ClassProblem) -> float:
    """Grid bracket 3*b*max_i(1/||x_i||^2).

    The single-constraint optimum has norm b/||x||^2, so tripling the largest
    such scale brackets where practical optima live.
    """
    norms = np.einsum("ij,ij->i", problem.intra, problem.intra)
    return 3.0 * problem.margin * float(np.max(1.0 / norms))


def solve_primal_grid(
    problem: ClassProblem,
    half_width: float | None = None,
    step: float = 0.01,
) -> OracleResult:
    """Exhaustive search over 2 x 2 matrices [[a, c], [c, d]] on a grid.

    a and d range over [0, half_width], c over [-half_width, half_width],
    all in multiples of ``step``. Candidates must be PSD (smallest eigenvalue
    >= -1e-9 by the 2 x 2 closed form) and satisfy every constraint. Returns
    the first grid point attaining the minimal objective in (a, c, d) scan
    order, so results are deterministic.
    """
    if problem.dim != 2:
        raise InvalidInputError(f"grid oracle requires dimension 2, got {problem.dim}")
    check_feasible_samples(problem)
    if half_width is None:
        half_width = default_half_width(problem)
    if not (np.isfinite(step) and step > 0):
        raise InvalidInputError("step must be positive and finite")
    if half_width < step:
        raise InvalidInputError("half_width must be at least one step")

    # Multiples of step so that halving the step yields a supergrid.
    n_steps = int(np.floor(half_width / step + 1e-12))
    pos = np.arange(n_steps + 1) * step
    cvals = np.concatenate([-pos[:0:-1], pos])

    x = problem.intra
    b = problem.margin
    lam = problem.lam
    o = problem.extra_scatter.entries
    x1sq = x[:, 0] ** 2
    x2sq = x[:, 1] ** 2
    x12 = x[:, 0] * x[:, 1]

    c = cvals[:, None]
    d = pos[None, :]
    best_obj = np.inf
    best_adc = None
    n_candidates = 0

    for a in pos:
        # Feasibility of every constraint a*x1^2 + 2c*x1*x2 + d*x2^2 >= b.
        ok = np.ones((cvals.size, pos.size), dtype=bool)
        for i in range(x.shape[0]):
            q = a * x1sq[i] + 2.0 * c * x12[i] + d * x2sq[i]
            ok &= q >= b
            if not ok.any():
                break
        if not ok.any():
            continue
        # PSD by the closed-form smallest eigenvalue of [[a, c], [c, d]].
        min_eig = 0.5 * (a + d) - np.sqrt((0.5 * (a - d)) ** 2 + c * c)
        ok &= min_eig >= -GRID_PSD_TOL
        if not ok.any():
            continue
        n_candidates += int(np.count_nonzero(ok))
        obj = 0.5 * (a * a + 2.0 * c * c + d * d) + lam * (
            o[0, 0] * a + 2.0 * o[0, 1] * c + o[1, 1] * d
        )
        obj = np.where(ok, obj, np.inf)
        flat = int(np.argmin(obj))
        val = float(obj.flat[flat])
        if val < best_obj:
            best_obj = val
            ci, di = np.unravel_index(flat, obj.shape)
            best_adc = (a, float(cvals[ci]), float(pos[di]))

    if best_adc is None:
        raise InfeasibleProblemError(
            "no PSD grid point satisfies all constraints; the instance is "
            "infeasible or the grid is too coarse"
        )
    a, cval, dval = best_adc
    p = SymmetricMatrix(np.array([[a, cval], [cval, dval]]))
    quad = np.einsum("ij,jk,ik->i", x, p.entries, x)
    return OracleResult(
        matrix=p,
        objective=best_obj,
        method="grid",
        resolution_or_final_penalty=step,
        max_violation=float(np.max(np.maximum(b - quad, 0.0))),
        candidates=n_candidates,
    )


def _power_iteration_lmax(g: np.ndarray, iterations: int = 100) -> float:
    """Largest eigenvalue of a PSD matrix, deterministic all-ones start."""
    v = np.ones(g.shape[0]) / np.sqrt(g.shape[0])
    lam = 0.0
    for _ in range(iterations):
        w = g @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam = float(v @ g @ v)
    return lam


def _penalty_descent(
    problem: ClassProblem,
    schedule,
    inner_tol: float,
    linear_objective: bool,
) -> tuple[np.ndarray, float, list[float]]:
    """Shared penalty loop.

    With linear_objective=False the smooth part is (1/2)||P||^2 + lam*tr(PO);
    with True it is tr(P O) alone. Returns the final matrix, the last penalty
    weight, and the per-stage worst violations.
    """
    schedule = tuple(float(r) for r in schedule)
    if len(schedule) == 0:
        raise InvalidInputError("penalty schedule must be nonempty")
    if any(b <= a for a, b in zip(schedule, schedule[1:])) or schedule[0] <= 0:
        raise InvalidInputError("penalty schedule must be positive and increasing")
    check_feasible_samples(problem)

    x = problem.intra
    b = problem.margin
    o = problem.extra_scatter.entries
    smooth_grad_const = o if linear_objective else problem.lam * o

    gram = x @ x.T
    ghat_lmax = _power_iteration_lmax(gram * gram)

    p = np.zeros((problem.dim, problem.dim))
    stage_violations: list[float] = []
    for rho in schedule:
        curvature = 2.0 * rho * ghat_lmax
        lipschitz = curvature if linear_objective else 1.0 + curvature
        step = 1.0 / max(lipschitz, 1e-12)
        for _ in range(MAX_INNER_STEPS):
            quad = np.einsum("ij,jk,ik->i", x, p, x)
            viol = np.maximum(b - quad, 0.0)
            grad = smooth_grad_const - 2.0 * rho * (x.T * viol) @ x
            if not linear_objective:
                grad = grad + p
            p_next = p - step * grad
            p_next = positive_part(SymmetricMatrix((p_next + p_next.T) / 2.0)).entries
            smooth = (
                float(np.sum(p_next * o))
                if linear_objective
                else 0.5 * float(np.sum(p_next * p_next))
                + problem.lam * float(np.sum(p_next * o))
            )
            if not np.isfinite(smooth):
                raise NumericalFailureError("penalty oracle objective became non-finite")
            if linear_objective and smooth < UNBOUNDED_FLOOR:
                raise UnboundedProblemError(
                    "unregularized objective fell below the divergence floor; "
                    "the instance is unbounded"
                )
            moved = float(np.linalg.norm(p_next - p))
            p = p_next
            if moved <= inner_tol * (1.0 + float(np.linalg.norm(p))):
                break
        quad = np.einsum("ij,jk,ik->i", x, p, x)
        stage_violations.append(float(np.max(np.maximum(b - quad, 0.0))))
    return p, schedule[-1], stage_violations


def _polish_feasible(problem: ClassProblem, p: np.ndarray) -> np.ndarray:
    """Scale up the matrix so the worst constraint holds exactly."""
    quad = np.einsum("ij,jk,ik->i", problem.intra, p, problem.intra)
    worst = float(np.min(quad))
    if worst >= problem.margin:
        return p
    if worst <= 0.0:
        raise NumericalFailureError(
            "penalty oracle did not reach the feasible region; cannot polish"
        )
    return p * (problem.margin / worst)


def solve_primal_penalty(
    problem: ClassProblem,
    schedule=DEFAULT_SCHEDULE,
    inner_tol: float = 1e-10,
) -> OracleResult:
    """Quadratic-penalty solve of the regularized primal.

    Each stage minimizes (1/2)||P||^2 + lam*tr(PO) + rho * sum_i
    max(0, b - x_i^T P x_i)^2 by gradient descent with a PSD projection
    after every step; rho then increases along the schedule. A final
    rescale makes the worst constraint hold exactly.
    """
    p, final_rho, stage_violations = _penalty_descent(
        problem, schedule, inner_tol, linear_objective=False
    )
    p = _polish_feasible(problem, p)
    objective = 0.5 * float(np.sum(p * p)) + problem.lam * float(
        np.sum(p * problem.extra_scatter.entries)
    )
    quad = np.einsum("ij,jk,ik->i", problem.intra, p, problem.intra)
    return OracleResult(
        matrix=SymmetricMatrix((p + p.T) / 2.0),
        objective=objective,
        method="penalty",
        resolution_or_final_penalty=final_rho,
        max_violation=float(np.max(np.maximum(problem.margin - quad, 0.0))),
        stage_violations=tuple(stage_violations),
    )


def solve_unregularized(
    problem: ClassProblem,
    schedule=DEFAULT_SCHEDULE,
    inner_tol: float = 1e-10,
) -> OracleResult:
    """Penalty solve of the unregularized criterion tr(P O) under the same
    constraints.

    Without the Frobenius term the objective is linear, so boundedness
    depends on the data; a runaway objective raises UnboundedProblemError.
    """
    p, final_rho, stage_violations = _penalty_descent(
        problem, schedule, inner_tol, linear_objective=True
    )
    p = _polish_feasible(problem, p)
    objective = float(np.sum(p * problem.extra_scatter.entries))
    quad = np.einsum("ij,jk,ik->i", problem.intra, p, problem.intra)
    return OracleResult(
        matrix=SymmetricMatrix((p + p.T) / 2.0),
        objective=objective,
        method="penalty",
        resolution_or_final_penalty=final_rho,
        max_violation=float(np.max(np.maximum(problem.margin - quad, 0.0))),
        stage_violations=tuple(stage_violations),
    )
