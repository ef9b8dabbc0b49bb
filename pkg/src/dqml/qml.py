"""Dual solver for per-class quadratic matrices.

For one class with intra-class samples x_1..x_n and an extra-class scatter
matrix O, the trained matrix is the PSD minimizer of

    (1/2) ||P||_F^2 + lam * tr(P O)    s.t.   x_i^T P x_i >= b  for all i.

The solver maximizes the Lagrange dual

    D(u) = -(1/2) ||M(u)_-||_F^2 + b * sum(u),    u >= 0,

where M(u) = lam*O - sum_i u_i x_i x_i^T and M_- is the negative spectral
part of M. The optimizer is a projected L-BFGS with Armijo backtracking; the
trained matrix is recovered in closed form as P = -M(u*)_-. Each combined
objective/gradient evaluation costs exactly one dense eigendecomposition.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleProblemError, InvalidInputError, NumericalFailureError
from .symmat import (
    SymmetricMatrix,
    _clamped_parts,
    _eigh_descending,
    eig_call_count,
    frobenius_norm,
    min_eigenvalue,
    trace_product,
)

_CURVATURE_RTOL = 1e-10
_MAX_BACKTRACKS = 60


def build_scatter(samples: np.ndarray, dim: int | None = None) -> SymmetricMatrix:
    """Scatter matrix sum_j x_j x_j^T of the given sample rows.

    Rows are put into a canonical order before accumulation so the result is
    bit-identical under any permutation of the input.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2:
        raise InvalidInputError(f"expected a 2-d sample array, got shape {x.shape}")
    if x.shape[0] == 0:
        if dim is None:
            dim = x.shape[1]
        if dim < 1:
            raise InvalidInputError("sample dimension must be at least 1")
        return SymmetricMatrix(np.zeros((dim, dim)))
    if dim is not None and x.shape[1] != dim:
        raise InvalidInputError(f"expected dimension {dim}, got {x.shape[1]}")
    if not np.isfinite(x).all():
        raise InvalidInputError("samples have non-finite entries")
    order = np.lexsort(x.T[::-1])
    xs = x[order]
    s = xs.T @ xs
    return SymmetricMatrix((s + s.T) / 2.0)


@dataclass(frozen=True)
class ClassProblem:
    """One class's training problem.

    intra: (n, m) array, one intra-class sample per row.
    extra_scatter: m x m scatter matrix of the other classes' samples.
    lam: weight of the tr(P O) regularizer, > 0.
    margin: required value b of x^T P x on intra-class samples, > 0.
    """

    intra: np.ndarray
    extra_scatter: SymmetricMatrix
    lam: float
    margin: float = 1.0

    def __post_init__(self) -> None:
        x = np.array(self.intra, dtype=float, copy=True)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise InvalidInputError(
                f"intra must be a nonempty 2-d sample array, got shape {x.shape}"
            )
        if not np.isfinite(x).all():
            raise InvalidInputError("intra samples have non-finite entries")
        if self.extra_scatter.dim != x.shape[1]:
            raise InvalidInputError(
                f"extra_scatter is {self.extra_scatter.dim}-dimensional, "
                f"samples are {x.shape[1]}-dimensional"
            )
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise InvalidInputError(f"lam must be positive and finite, got {self.lam}")
        if not (np.isfinite(self.margin) and self.margin > 0):
            raise InvalidInputError(f"margin must be positive and finite, got {self.margin}")
        x.flags.writeable = False
        object.__setattr__(self, "intra", x)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "margin", float(self.margin))

    @property
    def n_intra(self) -> int:
        return self.intra.shape[0]

    @property
    def dim(self) -> int:
        return self.intra.shape[1]


@dataclass(frozen=True)
class DualVariables:
    """Nonnegative Lagrange multipliers, one per intra-class sample."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float, copy=True)
        if v.ndim != 1:
            raise InvalidInputError(f"dual variables must be 1-d, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise InvalidInputError("dual variables have non-finite entries")
        if (v < 0).any():
            raise InvalidInputError("dual variables must be nonnegative")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 500
    grad_tol: float = 1e-7
    memory: int = 10
    line_search_shrink: float = 0.5
    armijo_c: float = 1e-4

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise InvalidInputError("max_iterations must be at least 1")
        if not (np.isfinite(self.grad_tol) and self.grad_tol > 0):
            raise InvalidInputError("grad_tol must be positive and finite")
        if self.memory < 1:
            raise InvalidInputError("memory must be at least 1")
        if not 0.0 < self.line_search_shrink < 1.0:
            raise InvalidInputError("line_search_shrink must lie in (0, 1)")
        if not 0.0 < self.armijo_c < 1.0:
            raise InvalidInputError("armijo_c must lie in (0, 1)")


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    converged: bool
    dual_objective: float
    primal_objective: float
    duality_gap: float
    grad_inf_norm: float
    max_violation: float
    objective_evals: int
    eig_calls: int
    dual_trajectory: tuple[float, ...] = field(repr=False, default=())


@dataclass(frozen=True)
class TrainedQuadraticMatrix:
    """A trained PSD matrix with its dual certificate and solve diagnostics.

    ``dual`` and ``report`` are None for matrices loaded from disk; the model
    file stores only what classification needs.
    """

    matrix: SymmetricMatrix
    dual: DualVariables | None
    report: SolveReport | None


@dataclass(frozen=True)
class KktReport:
    """Optimality measurements for a (problem, dual, matrix) triple."""

    grad_inf_norm: float
    max_violation: float
    complementary_slackness: float
    duality_gap: float
    min_eigenvalue: float
    dual_objective: float
    primal_objective: float


def assemble_m(problem: ClassProblem, u: np.ndarray) -> SymmetricMatrix:
    """The dual matrix M(u) = lam*O - sum_i u_i x_i x_i^T."""
    u = np.asarray(u, dtype=float)
    if u.shape != (problem.n_intra,):
        raise InvalidInputError(
            f"expected {problem.n_intra} dual variables, got shape {u.shape}"
        )
    x = problem.intra
    m = problem.lam * problem.extra_scatter.entries - (x.T * u) @ x
    return SymmetricMatrix((m + m.T) / 2.0)


def _raw_eval(x: np.ndarray, base: np.ndarray, b: float, u: np.ndarray):
    """Dual objective, dual gradient, and the decomposition of M(u).

    One eigendecomposition per call. Returns (dual_value, dual_gradient,
    (eigenvalues, eigenvectors, negative_eigenvalues)).
    """
    m = base - (x.T * u) @ x
    m = (m + m.T) / 2.0
    if not np.isfinite(m).all():
        raise NumericalFailureError("dual matrix M(u) has non-finite entries")
    try:
        w, v = _eigh_descending(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError("eigendecomposition of M(u) failed") from exc
    _, neg = _clamped_parts(w)
    dual = -0.5 * float(neg @ neg) + b * float(np.sum(u))
    quad = np.square(x @ v) @ neg
    grad = b + quad
    return dual, grad, (w, v, neg)


def _problem_arrays(problem: ClassProblem) -> tuple[np.ndarray, np.ndarray]:
    return problem.intra, problem.lam * problem.extra_scatter.entries


def dual_objective(problem: ClassProblem, u: np.ndarray) -> float:
    """D(u) = -(1/2)||M(u)_-||_F^2 + b * sum(u)."""
    x, base = _problem_arrays(problem)
    u = _check_dual_point(problem, u)
    value, _, _ = _raw_eval(x, base, problem.margin, u)
    return value


def dual_gradient(problem: ClassProblem, u: np.ndarray) -> np.ndarray:
    """dD/du_i = b + x_i^T M(u)_- x_i."""
    x, base = _problem_arrays(problem)
    u = _check_dual_point(problem, u)
    _, grad, _ = _raw_eval(x, base, problem.margin, u)
    return grad


def _check_dual_point(problem: ClassProblem, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (problem.n_intra,):
        raise InvalidInputError(
            f"expected {problem.n_intra} dual variables, got shape {u.shape}"
        )
    if not np.isfinite(u).all():
        raise InvalidInputError("dual variables have non-finite entries")
    return u


def recover_primal(problem: ClassProblem, u: np.ndarray) -> SymmetricMatrix:
    """Trained matrix P = -M(u)_-, PSD by construction."""
    x, base = _problem_arrays(problem)
    u = _check_dual_point(problem, u)
    _, _, (_, v, neg) = _raw_eval(x, base, problem.margin, u)
    p = (v * -neg) @ v.T
    return SymmetricMatrix((p + p.T) / 2.0)


def primal_objective(problem: ClassProblem, p: SymmetricMatrix) -> float:
    """(1/2)||P||_F^2 + lam * tr(P O)."""
    if p.dim != problem.dim:
        raise InvalidInputError(f"matrix is {p.dim}-dimensional, problem is {problem.dim}")
    return 0.5 * frobenius_norm(p) ** 2 + problem.lam * trace_product(p, problem.extra_scatter)


def constraint_values(problem: ClassProblem, p: SymmetricMatrix) -> np.ndarray:
    """x_i^T P x_i for every intra-class sample."""
    if p.dim != problem.dim:
        raise InvalidInputError(f"matrix is {p.dim}-dimensional, problem is {problem.dim}")
    x = problem.intra
    return np.einsum("ij,jk,ik->i", x, p.entries, x)


def _projected_gradient(u: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Gradient of f with the infeasible descent directions projected out.

    At u_i = 0 only the components pointing into the feasible set count.
    """
    pg = g.copy()
    at_bound = u <= 0.0
    pg[at_bound] = np.minimum(g[at_bound], 0.0)
    return pg


def _two_loop_direction(g: np.ndarray, pairs: deque) -> np.ndarray:
    """L-BFGS two-loop recursion: approximates H^{-1} g."""
    q = g.copy()
    if not pairs:
        return q
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * float(s @ q)
        q -= a * y
        alphas.append(a)
    s_last, y_last, _ = pairs[-1]
    q *= float(s_last @ y_last) / float(y_last @ y_last)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        beta = rho * float(y @ q)
        q += s * (a - beta)
    return q


def check_feasible_samples(problem: ClassProblem) -> None:
    """Raise when a constraint can never hold (zero-norm intra sample)."""
    norms = np.einsum("ij,ij->i", problem.intra, problem.intra)
    if (norms == 0.0).any():
        i = int(np.argmax(norms == 0.0))
        raise InfeasibleProblemError(
            f"intra-class sample {i} has zero norm; x^T P x >= {problem.margin} "
            "cannot be satisfied"
        )


def solve_dual(
    problem: ClassProblem, config: SolverConfig = SolverConfig()
) -> TrainedQuadraticMatrix:
    """Run the projected L-BFGS dual ascent and recover the trained matrix.

    Raises InfeasibleProblemError when an intra-class sample has zero norm
    (its constraint x^T P x >= b > 0 can never hold) and
    NumericalFailureError when an iterate stops being finite.
    """
    check_feasible_samples(problem)

    x, base = _problem_arrays(problem)
    b = problem.margin
    tol = config.grad_tol * max(1.0, b)
    eig_before = eig_call_count()

    # Minimize f(u) = -D(u) over u >= 0.
    u = np.zeros(problem.n_intra)
    dual_value, dual_grad, extras = _raw_eval(x, base, b, u)
    f = -dual_value
    g = -dual_grad
    evals = 1
    trajectory = [dual_value]

    pairs: deque = deque(maxlen=config.memory)
    converged = False
    iterations = 0

    for _ in range(config.max_iterations):
        pg = _projected_gradient(u, g)
        grad_inf = float(np.max(np.abs(pg))) if pg.size else 0.0
        if grad_inf <= tol:
            converged = True
            break

        iterations += 1
        active = (u <= 0.0) & (g > 0.0)
        g_free = np.where(active, 0.0, g)
        d = -_two_loop_direction(g_free, pairs)
        d[active] = 0.0
        descent = float(d @ g)
        if not np.isfinite(descent) or descent >= -1e-14 * float(
            np.linalg.norm(d) * np.linalg.norm(g_free) + 1e-300
        ):
            d = -g_free
            descent = float(d @ g)
        if descent >= 0.0:
            # No descent direction left in the feasible cone; the projected
            # gradient test above should have fired first.
            break

        step = 1.0
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            u_new = np.maximum(u + step * d, 0.0)
            delta = u_new - u
            if not delta.any():
                break
            directional = float(g @ delta)
            f_new, dual_grad_new, extras_new = _eval_min(x, base, b, u_new)
            evals += 1
            if directional < 0.0 and f_new <= f + config.armijo_c * directional:
                accepted = True
                break
            step *= config.line_search_shrink
        if not accepted:
            break

        g_new = -dual_grad_new
        s = u_new - u
        y = g_new - g
        sy = float(s @ y)
        if sy > _CURVATURE_RTOL * float(np.linalg.norm(s) * np.linalg.norm(y)):
            pairs.append((s, y, 1.0 / sy))

        u, f, g, extras = u_new, f_new, g_new, extras_new
        if not (np.isfinite(f) and np.isfinite(g).all()):
            raise NumericalFailureError("solver iterate became non-finite")
        trajectory.append(-f)
    else:
        pg = _projected_gradient(u, g)
        grad_inf = float(np.max(np.abs(pg)))
        converged = grad_inf <= tol

    _, v, neg = extras
    p_arr = (v * -neg) @ v.T
    p = SymmetricMatrix((p_arr + p_arr.T) / 2.0)

    dual_value = -f
    primal_value = 0.5 * float(np.sum(p.entries * p.entries)) + problem.lam * float(
        np.sum(p.entries * problem.extra_scatter.entries)
    )
    quad = np.einsum("ij,jk,ik->i", x, p.entries, x)
    max_violation = float(np.max(np.maximum(b - quad, 0.0)))

    report = SolveReport(
        iterations=iterations,
        converged=converged,
        dual_objective=dual_value,
        primal_objective=primal_value,
        duality_gap=primal_value - dual_value,
        grad_inf_norm=grad_inf,
        max_violation=max_violation,
        objective_evals=evals,
        eig_calls=eig_call_count() - eig_before,
        dual_trajectory=tuple(trajectory),
    )
    return TrainedQuadraticMatrix(matrix=p, dual=DualVariables(u), report=report)


def _eval_min(x, base, b, u):
    """-D(u), the dual gradient, and decomposition extras."""
    dual_value, dual_grad, extras = _raw_eval(x, base, b, u)
    return -dual_value, dual_grad, extras


def kkt_report(
    problem: ClassProblem,
    dual: DualVariables,
    matrix: SymmetricMatrix | None = None,
) -> KktReport:
    """Measure optimality of a dual point and its recovered matrix.

    All quantities should be near zero at an optimum except min_eigenvalue,
    which should be nonnegative up to the PSD certification tolerance.
    """
    u = dual.values
    x, base = _problem_arrays(problem)
    b = problem.margin
    dual_value, dual_grad, (_, v, neg) = _raw_eval(x, base, b, u)
    if matrix is None:
        p_arr = (v * -neg) @ v.T
        matrix = SymmetricMatrix((p_arr + p_arr.T) / 2.0)

    pg = _projected_gradient(u, -dual_grad)
    quad = np.einsum("ij,jk,ik->i", x, matrix.entries, x)
    violations = np.maximum(b - quad, 0.0)
    slack = np.abs(u * (quad - b))
    primal_value = primal_objective(problem, matrix)

    return KktReport(
        grad_inf_norm=float(np.max(np.abs(pg))) if pg.size else 0.0,
        max_violation=float(np.max(violations)) if violations.size else 0.0,
        complementary_slackness=float(np.max(slack)) if slack.size else 0.0,
        duality_gap=primal_value - dual_value,
        min_eigenvalue=min_eigenvalue(matrix),
        dual_objective=dual_value,
        primal_objective=primal_value,
    )


def random_class_problem(
    rng: np.random.Generator,
    dim: int = 8,
    n_intra: int = 20,
    n_extra: int = 40,
    lam: float = 1.0,
    margin: float = 1.0,
    spread: float = 0.5,
) -> ClassProblem:
    """A synthetic single-class instance for diagnostics and stress tests.

    Intra-class samples cluster around a random unit direction with the given
    spread, then are normalized to unit length so the constraint scale stays
    O(margin); extra-class samples are isotropic.
    """
    center = rng.normal(size=dim)
    center /= np.linalg.norm(center)
    intra = center + spread * rng.normal(size=(n_intra, dim))
    intra /= np.linalg.norm(intra, axis=1, keepdims=True)
    extra = rng.normal(size=(n_extra, dim)) / np.sqrt(dim)
    return ClassProblem(
        intra=intra,
        extra_scatter=build_scatter(extra, dim=dim),
        lam=lam,
        margin=margin,
    )
