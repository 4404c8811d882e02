"""Particle system model: coefficient catalog, interaction matrix, validation.

A system of d ordered particles on the line evolves under pairwise repulsion
with strength gamma[i][j] / (x_i - x_j), a per-particle drift b_i and a
per-particle diffusion coefficient sigma_i.  The state space is the open
chamber of strictly increasing vectors x_1 < x_2 < ... < x_d.
"""
from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ScalarField",
    "field_from_name",
    "InteractionMatrix",
    "nearest_neighbor",
    "full_coupling",
    "ParticleSystem",
    "validate_system",
    "singular_drift",
]


# --- coefficient catalog ---------------------------------------------------
#
# Coefficient functions come from a small named catalog with closed-form
# derivatives; nothing is differentiated numerically at runtime.  All value /
# derivative callables are module-level functions (or partials of them) so
# systems pickle cleanly for multiprocess workers, and all accept numpy
# arrays as well as scalars.


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _const(x, c):
    return np.full_like(np.asarray(x, dtype=float), c)


def _affine(x, a, c):
    return a * np.asarray(x, dtype=float) + c


def _linear(x, mu):
    return mu * np.asarray(x, dtype=float)


def _halfsin2(x):
    return 0.5 * np.sin(2.0 * np.asarray(x, dtype=float))


def _cos2(x):
    return np.cos(2.0 * np.asarray(x, dtype=float))


@dataclass(frozen=True)
class ScalarField:
    """A named scalar function together with its exact derivative.

    ``bounded`` marks whether the function (and its derivative) are bounded
    on the whole line; unbounded entries exist for validation harnesses and
    trigger a warning when combined with active repulsion.
    """

    name: str
    value: Callable
    derivative: Callable
    bounded: bool = True


_FIELD_SPEC = re.compile(r"^\s*([a-z_][a-z0-9_]*)\s*(?:\(([^)]*)\))?\s*$")


def field_from_name(spec: str) -> ScalarField:
    """Build a catalog field from a name like ``sin`` or ``affine(0.5, 1)``.

    Known names: zero, constant(c), affine(a, c), sin, halfsin2, linear(mu).
    """
    m = _FIELD_SPEC.match(spec)
    if not m:
        raise ValueError(f"unparseable field spec {spec!r}")
    name, argstr = m.group(1), m.group(2)
    try:
        args = [float(a) for a in argstr.split(",")] if argstr else []
    except ValueError:
        raise ValueError(f"non-numeric parameter in field spec {spec!r}") from None

    def need(n):
        if len(args) != n:
            raise ValueError(f"field {name!r} takes {n} parameter(s), got {len(args)}")

    if name == "zero":
        need(0)
        return ScalarField("zero", _zero, _zero)
    if name == "constant":
        need(1)
        c = args[0]
        return ScalarField(f"constant({c!r})", partial(_const, c=c), _zero)
    if name == "affine":
        need(2)
        a, c = args
        return ScalarField(
            f"affine({a!r}, {c!r})",
            partial(_affine, a=a, c=c),
            partial(_const, c=a),
            bounded=(a == 0.0),
        )
    if name == "sin":
        need(0)
        return ScalarField("sin", np.sin, np.cos)
    if name == "halfsin2":
        need(0)
        return ScalarField("halfsin2", _halfsin2, _cos2)
    if name == "linear":
        need(1)
        mu = args[0]
        return ScalarField(
            f"linear({mu!r})",
            partial(_linear, mu=mu),
            partial(_const, c=mu),
            bounded=(mu == 0.0),
        )
    raise ValueError(f"unknown field name {name!r}")


def derivative_mismatch(f: ScalarField, points=None, eps: float = 1e-5) -> float:
    """Max deviation between f.derivative and a central difference of f.value."""
    if points is None:
        points = np.linspace(-3.0, 3.0, 13)
    points = np.asarray(points, dtype=float)
    cdiff = (f.value(points + eps) - f.value(points - eps)) / (2.0 * eps)
    return float(np.max(np.abs(f.derivative(points) - cdiff)))


# --- interaction matrix ----------------------------------------------------


@dataclass(frozen=True)
class InteractionMatrix:
    """Symmetric nonnegative coupling strengths; the diagonal is ignored.

    Upper-triangle pairs with positive coupling are cached at construction
    for the solver's inner loop.
    """

    d: int
    gamma: np.ndarray
    # caches (derived, not part of equality/identity):
    pair_i: np.ndarray = field(init=False, repr=False, compare=False)
    pair_j: np.ndarray = field(init=False, repr=False, compare=False)
    pair_gamma: np.ndarray = field(init=False, repr=False, compare=False)
    offdiag: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float)
        if g.shape != (self.d, self.d):
            raise ValueError(f"gamma must be {self.d}x{self.d}, got {g.shape}")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        od = g.copy()
        np.fill_diagonal(od, 0.0)
        od.setflags(write=False)
        object.__setattr__(self, "offdiag", od)
        iu, ju = np.triu_indices(self.d, k=1)
        pos = od[iu, ju] > 0.0
        object.__setattr__(self, "pair_i", iu[pos])
        object.__setattr__(self, "pair_j", ju[pos])
        object.__setattr__(self, "pair_gamma", od[iu, ju][pos])

    @property
    def pair_count(self) -> int:
        return len(self.pair_gamma)

    def violations(self) -> list[str]:
        """Invariant violations, with 1-based indices in the messages."""
        out = []
        g = self.gamma
        for i in range(self.d):
            for j in range(i + 1, self.d):
                if g[i, j] != g[j, i]:
                    out.append(f"gamma[{i + 1}][{j + 1}] != gamma[{j + 1}][{i + 1}]")
                if g[i, j] < 0.0 or g[j, i] < 0.0:
                    out.append(f"gamma[{i + 1}][{j + 1}] must be >= 0")
        for i in range(self.d - 1):
            if not (g[i, i + 1] > 0.0):
                out.append(f"gamma[{i + 1}][{i + 2}] must be > 0")
        return out


def nearest_neighbor(d: int, gamma: float) -> InteractionMatrix:
    """Coupling of strength gamma between adjacent particles only."""
    g = np.zeros((d, d))
    idx = np.arange(d - 1)
    g[idx, idx + 1] = gamma
    g[idx + 1, idx] = gamma
    return InteractionMatrix(d, g)


def full_coupling(d: int, gamma: float) -> InteractionMatrix:
    """Equal coupling of strength gamma between every pair."""
    g = np.full((d, d), gamma, dtype=float)
    np.fill_diagonal(g, 0.0)
    return InteractionMatrix(d, g)


# --- particle system -------------------------------------------------------


def _eval_fields(fields: Sequence[ScalarField], attr: str, x: np.ndarray) -> np.ndarray:
    # Fast path: one shared field evaluated on the whole vector at once.
    f0 = fields[0]
    if all(f is f0 for f in fields):
        return np.asarray(getattr(f0, attr)(x), dtype=float)
    return np.array([getattr(f, attr)(xi) for f, xi in zip(fields, x)], dtype=float)


@dataclass(frozen=True)
class ParticleSystem:
    """Immutable description of one d-particle system on [0, horizon]."""

    d: int
    gamma: InteractionMatrix
    b: tuple[ScalarField, ...]
    sigma: tuple[ScalarField, ...]
    x0: np.ndarray
    horizon: float

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(self.b))
        object.__setattr__(self, "sigma", tuple(self.sigma))
        x0 = np.array(self.x0, dtype=float)
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)

    def drift_values(self, x: np.ndarray) -> np.ndarray:
        return _eval_fields(self.b, "value", x)

    def diffusion_values(self, x: np.ndarray) -> np.ndarray:
        return _eval_fields(self.sigma, "value", x)

    def diffusion_slope_values(self, x: np.ndarray) -> np.ndarray:
        return _eval_fields(self.sigma, "derivative", x)


def uniform_system(
    d: int,
    gamma: InteractionMatrix,
    b: ScalarField,
    sigma: ScalarField,
    x0,
    horizon: float = 1.0,
) -> ParticleSystem:
    """System with the same drift and diffusion field for every particle."""
    return ParticleSystem(d, gamma, (b,) * d, (sigma,) * d, np.asarray(x0, float), horizon)


def validate_system(sys: ParticleSystem) -> list[str]:
    """Check all model invariants; an empty list means the system is valid.

    Violations are reported as data (1-based indices), not raised.  A
    warning is emitted when an unbounded coefficient is combined with
    active repulsion, since the solver's good behavior is then the
    caller's responsibility.
    """
    out = []
    if sys.d < 1:
        out.append("d must be >= 1")
    if len(sys.b) != sys.d:
        out.append(f"need {sys.d} drift fields, got {len(sys.b)}")
    if len(sys.sigma) != sys.d:
        out.append(f"need {sys.d} diffusion fields, got {len(sys.sigma)}")
    if not (sys.horizon > 0.0):
        out.append("horizon must be > 0")
    if sys.gamma.d != sys.d:
        out.append(f"gamma is {sys.gamma.d}x{sys.gamma.d} but d={sys.d}")
    else:
        out.extend(sys.gamma.violations())
    if len(sys.x0) != sys.d:
        out.append(f"x0 must have length {sys.d}, got {len(sys.x0)}")
    else:
        for i in range(sys.d - 1):
            if not (sys.x0[i] < sys.x0[i + 1]):
                out.append(f"x0 not strictly increasing at index {i + 1}")
    seen = {}
    for f in (*sys.b, *sys.sigma):
        if f.name not in seen:
            seen[f.name] = derivative_mismatch(f)
    for name, err in seen.items():
        if err > 1e-6:
            out.append(f"field {name}: derivative inconsistent with value (max err {err:.2e})")
    has_coupling = sys.gamma.d == sys.d and sys.gamma.pair_count > 0
    if has_coupling and any(not f.bounded for f in (*sys.b, *sys.sigma)):
        warnings.warn(
            "unbounded coefficient function used with active repulsion; "
            "well-posedness is the caller's responsibility",
            stacklevel=2,
        )
    return out


def singular_drift(sys: ParticleSystem, x) -> np.ndarray:
    """Repulsion drift F_i = sum_{j != i} gamma[i][j] / (x_i - x_j).

    Rejects x outside the open chamber (any x_i >= x_{i+1}).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.d,):
        raise ValueError(f"x must have shape ({sys.d},), got {x.shape}")
    if np.any(np.diff(x) <= 0.0):
        raise ValueError("x must be strictly increasing")
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, np.inf)
    return (sys.gamma.offdiag / diff).sum(axis=1)
