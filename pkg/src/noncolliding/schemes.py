"""One-step maps and path drivers for the two semi-implicit schemes.

Both schemes treat the singular repulsion drift implicitly (solved at the
new time point) and everything else explicitly:

    SIEM:  x_i = A_i + h * F_i(x),  A_i = x_i + h*b_i(x_i) + sigma_i(x_i)*dW_i
    SIM :  as SIEM plus the correction 0.5*sigma_i*sigma_i'*(dW_i**2 - h) in A_i.

With constant diffusion the correction vanishes and the two schemes take
identical arithmetic paths.  Every step lands strictly inside the ordered
chamber because the implicit solve does.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

from .brownian import IncrementGrid
from .model import ParticleSystem
from .solver import DEFAULT_OPTIONS, ImplicitProblem, NonConvergence, SolverOptions, newton_solve

__all__ = [
    "Scheme",
    "Trajectory",
    "PathAborted",
    "sim_step",
    "siem_step",
    "simulate_path",
    "write_trajectory_csv",
]


class Scheme(enum.Enum):
    SIM = "sim"
    SIEM = "siem"


class PathAborted(Exception):
    """A path was discarded because one implicit solve failed to converge."""

    def __init__(self, scheme: Scheme, step: int, cause: NonConvergence):
        super().__init__(f"{scheme.value} path aborted at step {step}: {cause}")
        self.scheme = scheme
        self.step = step
        self.cause = cause


def _explicit_part(sys: ParticleSystem, x, dW, h):
    return x + h * sys.drift_values(x) + sys.diffusion_values(x) * dW


def _milstein_correction(sys: ParticleSystem, x, dW, h):
    return 0.5 * sys.diffusion_values(x) * sys.diffusion_slope_values(x) * (dW * dW - h)


def _step(sys, x, dW, h, opts, milstein: bool):
    A = _explicit_part(sys, x, dW, h)
    if milstein:
        A = A + _milstein_correction(sys, x, dW, h)
    return newton_solve(ImplicitProblem(A, h, sys.gamma), opts)


def sim_step(sys: ParticleSystem, x, dW, h: float, opts: SolverOptions = DEFAULT_OPTIONS):
    """One Milstein-corrected semi-implicit step from state x."""
    out, _, _ = _step(sys, np.asarray(x, float), np.asarray(dW, float), h, opts, milstein=True)
    return out


def siem_step(sys: ParticleSystem, x, dW, h: float, opts: SolverOptions = DEFAULT_OPTIONS):
    """One Euler-Maruyama semi-implicit step from state x."""
    out, _, _ = _step(sys, np.asarray(x, float), np.asarray(dW, float), h, opts, milstein=False)
    return out


@dataclass(frozen=True)
class Trajectory:
    """Scheme output on one grid: row k holds the state at t_k = k*T/n."""

    system: ParticleSystem
    kind: Scheme
    level: int
    values: np.ndarray  # (n+1, d)
    newton_iterations: int
    max_residual: float

    @property
    def n(self) -> int:
        return 1 << self.level

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.system.horizon, self.n + 1)

    @property
    def endpoint(self) -> np.ndarray:
        return self.values[-1]

    def min_gap(self) -> float:
        if self.system.d < 2:
            return np.inf
        return float(np.min(np.diff(self.values, axis=1)))


def simulate_path(
    sys: ParticleSystem,
    kind: Scheme,
    grid: IncrementGrid,
    opts: SolverOptions = DEFAULT_OPTIONS,
) -> Trajectory:
    """Drive one full path over the grid; deterministic given its inputs.

    Raises PathAborted (carrying the step index) if any implicit solve
    fails; the caller is expected to discard and count the path.
    """
    if grid.d != sys.d:
        raise ValueError(f"grid has {grid.d} channels but the system has d={sys.d}")
    if grid.horizon != sys.horizon:
        raise ValueError(f"grid horizon {grid.horizon} != system horizon {sys.horizon}")
    n = grid.n
    h = grid.dt
    milstein = kind is Scheme.SIM
    values = np.empty((n + 1, sys.d))
    values[0] = sys.x0
    x = sys.x0.copy()
    total_iters = 0
    max_res = 0.0
    inc = grid.increments
    for k in range(n):
        try:
            x, iters, res = _step(sys, x, inc[:, k], h, opts, milstein)
        except NonConvergence as exc:
            raise PathAborted(kind, k, exc) from exc
        total_iters += iters
        if res > max_res:
            max_res = res
        values[k + 1] = x
    if sys.d > 1 and not np.all(np.diff(values, axis=1) > 0.0):
        raise AssertionError("trajectory left the ordered chamber")  # solver contract breach
    return Trajectory(sys, kind, grid.level, values, total_iters, max_res)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Header t,x1..xd, one row per grid node."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i + 1}" for i in range(traj.system.d)])
        for t, row in zip(traj.times, traj.values):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
