"""Per-step implicit system solved by damped Newton on a convex barrier.

Each time step of the semi-implicit schemes requires the unique strictly
increasing solution of

    x_i = A_i + h * sum_{j != i} gamma[i][j] / (x_i - x_j),

which is the stationarity condition of the strictly convex objective

    Phi(x) = 0.5 * ||x - A||^2 - h * sum_{i<j} gamma[i][j] * log(x_j - x_i)

on the open chamber x_1 < ... < x_d.  Newton's method on
G(x) = x - A - h*F(x) uses the Jacobian I + h*L, where L is the weighted
graph Laplacian with weights gamma[i][j] / (x_i - x_j)^2; this matrix is
symmetric positive definite with eigenvalues >= 1, so the Newton direction
is always a descent direction for Phi and the solution error is bounded by
the residual.  Steps are damped by halving until the trial iterate stays
strictly inside the chamber and Phi does not increase.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import InteractionMatrix

__all__ = [
    "ImplicitProblem",
    "SolverOptions",
    "NonConvergence",
    "solve",
    "newton_solve",
    "residual",
    "solve_pair_closed_form",
]

MAX_HALVINGS = 60


class NonConvergence(Exception):
    """Residual tolerance not reached; callers abort the path and report it."""

    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(f"{message} (iterations={iterations}, residual={residual:.3e})")
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class ImplicitProblem:
    """One step's algebraic system: find x with x = A + h * F(x)."""

    A: np.ndarray
    h: float
    gamma: InteractionMatrix

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        object.__setattr__(self, "A", A)
        if not self.h > 0.0:
            raise ValueError("h must be > 0")


@dataclass(frozen=True)
class SolverOptions:
    residual_tol: float = 1e-12
    max_iter: int = 100
    # smallest adjacent gap tolerated in intermediate iterates
    min_gap_floor: float = 1e-300

    def __post_init__(self):
        if not self.residual_tol > 0.0:
            raise ValueError("residual_tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


DEFAULT_OPTIONS = SolverOptions()


def _phi(x, A, h, pi, pj, pg):
    """Barrier objective value and the magnitude scale of its summands.

    The scale bounds the evaluation rounding error (the quadratic and
    barrier parts largely cancel, so |Phi| itself does not).
    """
    quad = 0.5 * np.sum((x - A) ** 2)
    barrier = pg * np.log(x[pj] - x[pi])
    return quad - h * np.sum(barrier), quad + h * np.sum(np.abs(barrier))


def _initial_iterate(A, h, gamma: InteractionMatrix) -> np.ndarray:
    # Sort A, then enforce the equilibrium gap scale sqrt(h * min adjacent
    # coupling) by pushing overlapping entries apart, keeping the mean.
    xs = np.sort(A)
    d = len(xs)
    if d == 1:
        return xs
    gmin = np.sqrt(h * np.min(np.diag(gamma.gamma, k=1)))
    ramp = gmin * np.arange(d)
    y = np.maximum.accumulate(xs - ramp) + ramp
    return y + (xs.mean() - y.mean())


def newton_solve(problem: ImplicitProblem, opts: SolverOptions = DEFAULT_OPTIONS):
    """Solve the implicit system; returns (x, iterations, final_residual)."""
    A, h, gamma = problem.A, problem.h, problem.gamma
    if gamma.pair_count == 0:
        # No coupling: the system is x = A identically.
        return A.copy(), 0, 0.0
    pi, pj, pg = gamma.pair_i, gamma.pair_j, gamma.pair_gamma
    gm = gamma.offdiag
    eye = np.arange(gamma.d)

    x = _initial_iterate(A, h, gamma)
    phi, phi_scale = _phi(x, A, h, pi, pj, pg)
    res = np.inf
    for it in range(opts.max_iter):
        diff = x[:, None] - x[None, :]
        np.fill_diagonal(diff, 1.0)  # masked: gm has zero diagonal
        inv = gm / diff
        G = x - A - h * inv.sum(axis=1)
        res = np.max(np.abs(G))
        if res <= opts.residual_tol:
            return x, it, float(res)
        W = inv / diff  # gamma[i][j] / (x_i - x_j)^2
        J = -h * W
        J[eye, eye] = 1.0 + h * W.sum(axis=1)
        delta = np.linalg.solve(J, -G)
        # Stiff barrier curvature can push the attainable residual above an
        # absolute tolerance (the float lattice of x is too coarse).  Since
        # J >= I, a Newton step below working precision means x is within a
        # few ulp of the solution in every direction: accept it.
        if np.max(np.abs(delta)) <= 4.0 * np.finfo(float).eps * (1.0 + np.max(np.abs(x))):
            return x, it + 1, float(res)

        # Near the minimizer the true Phi decrease drops below the rounding
        # error of evaluating Phi, so acceptance allows a slack at that level.
        phi_slack = 16.0 * np.finfo(float).eps * (1.0 + phi_scale)
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = x + t * delta
            if np.all(np.diff(trial) > opts.min_gap_floor):
                phi_trial, scale_trial = _phi(trial, A, h, pi, pj, pg)
                if phi_trial <= phi + phi_slack:
                    x, phi, phi_scale = trial, phi_trial, scale_trial
                    break
            t *= 0.5
        else:
            raise NonConvergence("no acceptable damped Newton step", it, float(res))
    raise NonConvergence("residual tolerance not met", opts.max_iter, float(res))


def solve(problem: ImplicitProblem, opts: SolverOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """The unique strictly increasing solution of x = A + h * F(x)."""
    x, _, _ = newton_solve(problem, opts)
    return x


def residual(problem: ImplicitProblem, x) -> float:
    """Sup-norm residual ||x - A - h*F(x)||_inf; rejects non-increasing x."""
    x = np.asarray(x, dtype=float)
    if np.any(np.diff(x) <= 0.0):
        raise ValueError("x must be strictly increasing")
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    F = (problem.gamma.offdiag / diff).sum(axis=1)
    return float(np.max(np.abs(x - problem.A - problem.h * F)))


def solve_pair_closed_form(a1: float, a2: float, h: float, gamma12: float):
    """Exact d=2 solution, used as an independent oracle for ``solve``.

    The gap D = x2 - x1 is the positive root of D**2 - (a2-a1)*D - 2*h*gamma12,
    and the sum x1 + x2 equals a1 + a2.  The root is evaluated in the
    cancellation-free form for either sign of a2 - a1.
    """
    delta = a2 - a1
    disc = np.sqrt(delta * delta + 8.0 * h * gamma12)
    if delta >= 0.0:
        D = 0.5 * (delta + disc)
    else:
        D = (4.0 * h * gamma12) / (disc - delta)
    s = a1 + a2
    return 0.5 * (s - D), 0.5 * (s + D)
