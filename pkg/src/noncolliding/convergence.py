"""Strong-rate experiments: coupled-refinement mse, rate fits, diagnostics.

The main experiment drives every scheme over a ladder of dyadic grids that
share one Brownian path per Monte Carlo index (the coarse grid is the exact
pairwise-sum coarsening of the fine one), accumulates mean-square endpoint
differences between neighboring resolutions, and fits the empirical strong
order beta from log2(mse(k)) = -2*beta*k + intercept.

A separate harness validates both schemes against the closed-form geometric
solution of the interaction-free scalar system, and heuristic moment
diagnostics flag blow-up of state moments, inverse gaps, or the mean-square
modulus of continuity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .brownian import coarsen, generate, split
from .model import ParticleSystem, field_from_name
from .schemes import PathAborted, Scheme, simulate_path
from .solver import DEFAULT_OPTIONS, SolverOptions

__all__ = [
    "ExperimentConfig",
    "MseEntry",
    "MseTable",
    "RateFit",
    "RateReport",
    "ExperimentError",
    "DiscardBudgetExceeded",
    "CouplingAuditError",
    "DegenerateFit",
    "run_mse_experiment",
    "fit_rate",
    "strong_error_vs_exact",
    "moment_diagnostics",
    "ordering_sweep",
    "scheme_coincidence",
]

AUDIT_PATHS = 10
DISCARD_BUDGET = 0.10


class ExperimentError(Exception):
    pass


class DiscardBudgetExceeded(ExperimentError):
    pass


class CouplingAuditError(ExperimentError):
    pass


class DegenerateFit(Exception):
    """Fewer than two usable mse points for at least one scheme.

    Carries the partial report so callers can still emit fits for the
    schemes that had enough points.
    """

    def __init__(self, schemes, report):
        names = ", ".join(s.value for s in schemes)
        super().__init__(f"fewer than 2 usable mse points for: {names}")
        self.schemes = tuple(schemes)
        self.report = report


@dataclass(frozen=True)
class ExperimentConfig:
    system: ParticleSystem
    schemes: tuple[Scheme, ...]
    k_min: int
    k_max: int
    paths: int
    master_seed: int
    solver: SolverOptions = DEFAULT_OPTIONS

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if not self.schemes:
            raise ValueError("at least one scheme is required")
        if self.k_min < 0:
            raise ValueError("k_min must be >= 0")
        if self.k_max < self.k_min + 1:
            raise ValueError("k_max must be >= k_min + 1")
        if self.paths < 2:
            raise ValueError("paths must be >= 2")


@dataclass(frozen=True)
class MseEntry:
    k: int
    mse: float
    stderr: float
    discards: int
    n_pairs: int


@dataclass(frozen=True)
class MseTable:
    """Per scheme, one row per refinement exponent k = k_min..k_max."""

    entries: dict[Scheme, list[MseEntry]]
    paths: int = 0
    audited_paths: int = 0


@dataclass(frozen=True)
class RateFit:
    beta: float
    intercept: float
    r2: float
    n_points: int
    excluded_ks: tuple[int, ...] = ()


@dataclass(frozen=True)
class RateReport:
    fits: dict[Scheme, RateFit | None]  # None marks a degenerate (unfittable) scheme


def _jackknife_stderr(values: np.ndarray) -> float:
    m = len(values)
    if m < 2:
        return float("nan")
    total = values.sum()
    loo = (total - values) / (m - 1)
    return float(np.sqrt((m - 1) / m * np.sum((loo - loo.mean()) ** 2)))


def _chunks(n_items: int, workers: int):
    parts = np.array_split(np.arange(n_items), max(workers, 1) * 4)
    return [p.tolist() for p in parts if len(p)]


def _run_indexed(worker, n_items: int, workers: int):
    """Run worker(list_of_indices) over all indices; merge (index, payload) pairs."""
    if workers <= 1:
        return worker(list(range(n_items)))
    out = Parallel(n_jobs=workers)(delayed(worker)(c) for c in _chunks(n_items, workers))
    merged = []
    for part in out:
        merged.extend(part)
    return merged


def _grid_ladder(seed: int, d: int, k_lo: int, k_hi: int, horizon: float, audit: bool):
    """Grids at levels k_lo..k_hi sharing one path; optionally re-verify sums."""
    ladder = {k_hi: generate(seed, d, k_hi, horizon)}
    for lvl in range(k_hi - 1, k_lo - 1, -1):
        fine = ladder[lvl + 1]
        coarse = coarsen(fine)
        if audit:
            expected = fine.increments[:, 0::2] + fine.increments[:, 1::2]
            if not np.array_equal(coarse.increments, expected):
                raise CouplingAuditError(f"coarsening mismatch at level {lvl}")
        ladder[lvl] = coarse
    return ladder


def _mse_path_worker(cfg: ExperimentConfig, indices, audit_upto: int):
    levels = range(cfg.k_min, cfg.k_max + 2)
    out = []
    for i in indices:
        ladder = _grid_ladder(
            split(cfg.master_seed, i),
            cfg.system.d,
            cfg.k_min,
            cfg.k_max + 1,
            cfg.system.horizon,
            audit=i < audit_upto,
        )
        per_scheme = {}
        for scheme in cfg.schemes:
            ends = {}
            for lvl in levels:
                try:
                    ends[lvl] = simulate_path(cfg.system, scheme, ladder[lvl], cfg.solver).endpoint
                except PathAborted:
                    ends[lvl] = None
            sq = []
            for k in range(cfg.k_min, cfg.k_max + 1):
                a, b = ends[k], ends[k + 1]
                sq.append(float(np.sum((a - b) ** 2)) if a is not None and b is not None else np.nan)
            per_scheme[scheme] = sq
        out.append((i, per_scheme))
    return out


def run_mse_experiment(cfg: ExperimentConfig, workers: int = 1) -> MseTable:
    """Coupled-refinement mean-square differences at the endpoint t = horizon.

    Path i draws its own seed by splitting the master seed, so results do
    not depend on the worker count.  Paths whose implicit solve fails are
    excluded pairwise (both resolutions of the affected comparison) and
    counted; more than 10% discards at any k is an error.
    """
    audit_upto = min(AUDIT_PATHS, cfg.paths)
    results = _run_indexed(
        lambda idx: _mse_path_worker(cfg, idx, audit_upto), cfg.paths, workers
    )
    n_k = cfg.k_max - cfg.k_min + 1
    slots = {s: np.full((cfg.paths, n_k), np.nan) for s in cfg.schemes}
    for i, per_scheme in results:
        for s, sq in per_scheme.items():
            slots[s][i] = sq
    entries: dict[Scheme, list[MseEntry]] = {}
    for s in cfg.schemes:
        rows = []
        for j, k in enumerate(range(cfg.k_min, cfg.k_max + 1)):
            col = slots[s][:, j]
            good = col[~np.isnan(col)]
            discards = cfg.paths - len(good)
            if discards > DISCARD_BUDGET * cfg.paths:
                raise DiscardBudgetExceeded(
                    f"{s.value}: {discards}/{cfg.paths} paths discarded at k={k}"
                )
            rows.append(
                MseEntry(
                    k=k,
                    mse=float(good.mean()),
                    stderr=_jackknife_stderr(good),
                    discards=discards,
                    n_pairs=len(good),
                )
            )
        entries[s] = rows
    return MseTable(entries=entries, paths=cfg.paths, audited_paths=audit_upto)


# mse below this is float rounding residue, not signal: for O(1)-O(10)
# positions the squared reassociation noise sits near (eps*scale)^2 ~ 1e-30
MSE_ZERO_FLOOR = 1e-28


def fit_rate(table: MseTable) -> RateReport:
    """OLS of log2(mse) on k per scheme; beta = -slope/2.

    Non-finite entries and entries at rounding level (exact coupling leaves
    mse below MSE_ZERO_FLOOR) are excluded and reported.  Raises
    DegenerateFit (carrying the partial report) when any scheme is left
    with fewer than two usable points.
    """
    fits: dict[Scheme, RateFit | None] = {}
    degenerate = []
    for scheme, rows in table.entries.items():
        usable = [(e.k, e.mse) for e in rows if math.isfinite(e.mse) and e.mse > MSE_ZERO_FLOOR]
        excluded = tuple(e.k for e in rows if not (math.isfinite(e.mse) and e.mse > MSE_ZERO_FLOOR))
        if len(usable) < 2:
            fits[scheme] = None
            degenerate.append(scheme)
            continue
        k = np.array([u[0] for u in usable], dtype=float)
        y = np.log2([u[1] for u in usable])
        kc = k - k.mean()
        slope = float(np.sum(kc * (y - y.mean())) / np.sum(kc**2))
        intercept = float(y.mean() - slope * k.mean())
        ss_res = float(np.sum((y - (slope * k + intercept)) ** 2))
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
        fits[scheme] = RateFit(-0.5 * slope, intercept, r2, len(usable), excluded)
    report = RateReport(fits=fits)
    if degenerate:
        raise DegenerateFit(degenerate, report)
    return report


# --- exact-solution validation harness --------------------------------------


def strong_error_vs_exact(
    k_min: int = 2,
    k_max: int = 7,
    paths: int = 10_000,
    seed: int = 0,
    mu: float = 0.5,
    sigma: float = 0.5,
    x0: float = 1.0,
    horizon: float = 1.0,
    schemes: tuple[Scheme, ...] = (Scheme.SIM, Scheme.SIEM),
) -> RateReport:
    """Fit each scheme's strong order on the scalar geometric system.

    Without interaction the d=1 system dx = mu*x dt + sigma*x dW has the
    closed-form solution x0*exp((mu - sigma^2/2)*T + sigma*W(T)); both
    schemes are then explicit, so all Monte Carlo paths run as one vector
    (one grid channel per path, streams split from the seed as usual).
    """
    b = field_from_name(f"linear({mu!r})")
    s = field_from_name(f"linear({sigma!r})")
    grid = generate(seed, paths, k_max, horizon)
    w_total = grid.increments.sum(axis=1)
    exact = x0 * np.exp((mu - 0.5 * sigma * sigma) * horizon + sigma * w_total)
    entries: dict[Scheme, list[MseEntry]] = {sch: [] for sch in schemes}
    lvl_grid = grid
    for lvl in range(k_max, k_min - 1, -1):
        if lvl < k_max:
            lvl_grid = coarsen(lvl_grid)
        inc = lvl_grid.increments
        h = lvl_grid.dt
        for sch in schemes:
            x = np.full(paths, float(x0))
            milstein = sch is Scheme.SIM
            for k in range(lvl_grid.n):
                dW = inc[:, k]
                a = x + h * b.value(x) + s.value(x) * dW
                if milstein:
                    a = a + 0.5 * s.value(x) * s.derivative(x) * (dW * dW - h)
                x = a
            err2 = (exact - x) ** 2
            entries[sch].append(
                MseEntry(lvl, float(err2.mean()), _jackknife_stderr(err2), 0, paths)
            )
    for sch in schemes:
        entries[sch].sort(key=lambda e: e.k)
    return fit_rate(MseTable(entries=entries, paths=paths))


# --- diagnostics -------------------------------------------------------------


@dataclass(frozen=True)
class MomentDiagnostics:
    """Heuristic finiteness indicators; not a proof of anything."""

    p: float
    level: int
    paths: int
    max_state_moment: float
    max_inverse_gap_moment: float | None  # None when d < 2
    max_holder_quotient: float
    min_adjacent_gap: float | None


def _diag_worker(sys, level, seed, p, opts, indices):
    out = []
    for i in indices:
        traj = simulate_path(sys, Scheme.SIM, generate(split(seed, i), sys.d, level, sys.horizon), opts)
        v = traj.values
        norms_p = np.sum(v * v, axis=1) ** (p / 2.0)
        h = sys.horizon / traj.n
        holder = float(np.max(np.sqrt(np.sum(np.diff(v, axis=0) ** 2, axis=1))) / np.sqrt(h)) if traj.n else 0.0
        if sys.d > 1:
            gaps = np.min(np.diff(v, axis=1), axis=1)
            out.append((i, (norms_p, gaps ** (-p), holder, float(gaps.min()))))
        else:
            out.append((i, (norms_p, None, holder, None)))
    return out


def moment_diagnostics(
    sys: ParticleSystem,
    level: int,
    paths: int,
    seed: int,
    p: float,
    opts: SolverOptions = DEFAULT_OPTIONS,
    workers: int = 1,
) -> MomentDiagnostics:
    """Empirical moment / inverse-gap / continuity statistics over Milstein paths."""
    if not p > 0.0:
        raise ValueError("p must be > 0")
    results = _run_indexed(
        lambda idx: _diag_worker(sys, level, seed, p, opts, idx), paths, workers
    )
    n_nodes = (1 << level) + 1
    norm_slots = np.empty((paths, n_nodes))
    invgap_slots = np.empty((paths, n_nodes)) if sys.d > 1 else None
    holder = np.empty(paths)
    min_gaps = np.empty(paths) if sys.d > 1 else None
    for i, (norms_p, invgaps, hq, mg) in results:
        norm_slots[i] = norms_p
        holder[i] = hq
        if invgap_slots is not None:
            invgap_slots[i] = invgaps
            min_gaps[i] = mg
    return MomentDiagnostics(
        p=p,
        level=level,
        paths=paths,
        max_state_moment=float(norm_slots.mean(axis=0).max()),
        max_inverse_gap_moment=(
            float(invgap_slots.mean(axis=0).max()) if invgap_slots is not None else None
        ),
        max_holder_quotient=float(holder.max()),
        min_adjacent_gap=float(min_gaps.min()) if min_gaps is not None else None,
    )


# --- sweeps used by the validation suite -------------------------------------


@dataclass(frozen=True)
class OrderingSweep:
    paths: int
    rows_checked: int
    ordering_violations: int
    aborted_paths: int
    min_gap: float


def _ordering_worker(sys, kind, level, seed, opts, indices):
    out = []
    for i in indices:
        grid = generate(split(seed, i), sys.d, level, sys.horizon)
        try:
            traj = simulate_path(sys, kind, grid, opts)
        except PathAborted:
            out.append((i, (0, 0, 1, np.inf)))
            continue
        bad = int(np.sum(~np.all(np.diff(traj.values, axis=1) > 0.0, axis=1))) if sys.d > 1 else 0
        out.append((i, (len(traj.values), bad, 0, traj.min_gap())))
    return out


def ordering_sweep(
    sys: ParticleSystem,
    kind: Scheme,
    level: int,
    paths: int,
    seed: int,
    opts: SolverOptions = DEFAULT_OPTIONS,
    workers: int = 1,
) -> OrderingSweep:
    """Simulate many paths and re-check every output row for strict ordering."""
    results = _run_indexed(
        lambda idx: _ordering_worker(sys, kind, level, seed, opts, idx), paths, workers
    )
    rows = sum(r[1][0] for r in results)
    bad = sum(r[1][1] for r in results)
    aborted = sum(r[1][2] for r in results)
    min_gap = min((r[1][3] for r in results), default=np.inf)
    return OrderingSweep(paths, rows, bad, aborted, float(min_gap))


def scheme_coincidence(
    sys: ParticleSystem,
    level: int,
    paths: int,
    seed: int,
    opts: SolverOptions = DEFAULT_OPTIONS,
) -> float:
    """Max componentwise |SIM - SIEM| over whole trajectories on shared grids."""
    worst = 0.0
    for i in range(paths):
        grid = generate(split(seed, i), sys.d, level, sys.horizon)
        a = simulate_path(sys, Scheme.SIM, grid, opts)
        b = simulate_path(sys, Scheme.SIEM, grid, opts)
        worst = max(worst, float(np.max(np.abs(a.values - b.values))))
    return worst
