"""Graphon representations: step graphons, composed kernels, type measures.

A step graphon is a piecewise-constant symmetric function on [0,1]^2 given by
block breakpoints and a value matrix.  A composed kernel is the structured form
r(H(Fbar(x)), H(Fbar(y))) built from a connection function r, a fitness
landscape H and the right-continuous generalized inverse Fbar of a type CDF.
Both evaluate vectorized and are immutable.

Conventions: blocks are closed on the left and open on the right, the last
block is closed (right-continuity); zero-width blocks are permitted and keep
block indices aligned with type labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError

_ATOL = 1e-12


def _as_unit_array(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < -_ATOL) or np.any(x > 1 + _ATOL):
        raise ConfigError(f"{name} must lie in [0, 1]")
    return np.clip(x, 0.0, 1.0)


@dataclass(frozen=True)
class StepGraphon:
    """Block graphon: breakpoints 0 = b_0 <= ... <= b_B = 1 and a symmetric B x B value matrix."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if bp.ndim != 1 or bp.size < 2:
            raise ConfigError("breakpoints must be a 1-d sequence with at least two entries")
        if abs(bp[0]) > _ATOL or abs(bp[-1] - 1.0) > _ATOL:
            raise ConfigError("breakpoints must start at 0 and end at 1")
        if np.any(np.diff(bp) < -_ATOL):
            raise ConfigError("breakpoints must be non-decreasing")
        bp = bp.copy()
        bp[0], bp[-1] = 0.0, 1.0
        B = bp.size - 1
        if vals.shape != (B, B):
            raise ConfigError(f"value matrix must be {B}x{B} for {B} blocks")
        if not np.allclose(vals, vals.T, atol=_ATOL):
            raise ConfigError("value matrix must be symmetric")
        if np.any(vals < -_ATOL) or np.any(vals > 1 + _ATOL):
            raise ConfigError("block values must lie in [0, 1]")
        vals = np.clip((vals + vals.T) / 2.0, 0.0, 1.0)
        bp.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @property
    def block_count(self) -> int:
        return self.breakpoints.size - 1

    @property
    def block_widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @classmethod
    def constant(cls, c: float) -> "StepGraphon":
        return cls(np.array([0.0, 1.0]), np.array([[float(c)]]))

    def block_index(self, x) -> np.ndarray:
        """Index of the block containing x (right-continuous; last block closed)."""
        x = _as_unit_array(x, "x")
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        return np.clip(idx, 0, self.block_count - 1)

    def evaluate(self, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return self.values[self.block_index(x), self.block_index(y)]

    __call__ = evaluate

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(repr(float(b)) for b in self.breakpoints) + "\n")
            for row in self.values:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "StepGraphon":
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        bp = np.array([float(t) for t in lines[0].split(",")])
        vals = np.array([[float(t) for t in ln.split(",")] for ln in lines[1:]])
        return cls(bp, vals)


class ConnectionFunction:
    """Continuous symmetric map r: [0,1]^2 -> [0,1] giving connection probabilities.

    Closed forms: constant, product (uv), min.  A type-connection matrix of
    size (m+1) is interpolated bilinearly between nodes l/(m+1) (clamped above
    the last node), so evaluation at the type points reproduces the matrix
    entries exactly.  A uniform grid variant spans [0,1] with G nodes.
    """

    def __init__(self, kind: str, *, c: float | None = None,
                 matrix: np.ndarray | None = None, grid: np.ndarray | None = None):
        if kind not in ("constant", "product", "min", "matrix", "grid"):
            raise ConfigError(f"unknown connection function kind: {kind!r}")
        self.kind = kind
        self.c = None
        self._table = None
        self._nodes = None
        if kind == "constant":
            if c is None or not 0.0 <= float(c) <= 1.0:
                raise ConfigError("constant connection function needs c in [0, 1]")
            self.c = float(c)
        elif kind in ("matrix", "grid"):
            table = np.asarray(matrix if kind == "matrix" else grid, dtype=float)
            if table.ndim != 2 or table.shape[0] != table.shape[1] or table.shape[0] < 1:
                raise ConfigError("connection table must be a square matrix")
            if not np.allclose(table, table.T, atol=_ATOL):
                raise ConfigError("connection table must be symmetric")
            if np.any(table < -_ATOL) or np.any(table > 1 + _ATOL):
                raise ConfigError("connection values must lie in [0, 1]")
            self._table = np.clip((table + table.T) / 2.0, 0.0, 1.0)
            self._table.setflags(write=False)
            M = table.shape[0]
            if kind == "matrix":
                # nodes at l/(m+1); constant continuation past the last node
                self._nodes = np.arange(M) / float(M)
            else:
                self._nodes = np.linspace(0.0, 1.0, M) if M > 1 else np.array([0.0])

    # -- constructors ---------------------------------------------------
    @classmethod
    def constant(cls, c: float) -> "ConnectionFunction":
        return cls("constant", c=c)

    @classmethod
    def product(cls) -> "ConnectionFunction":
        return cls("product")

    @classmethod
    def minimum(cls) -> "ConnectionFunction":
        return cls("min")

    @classmethod
    def matrix(cls, entries) -> "ConnectionFunction":
        return cls("matrix", matrix=np.asarray(entries, dtype=float))

    @classmethod
    def grid(cls, values) -> "ConnectionFunction":
        return cls("grid", grid=np.asarray(values, dtype=float))

    @classmethod
    def two_type(cls, alpha: float, beta: float, delta: float) -> "ConnectionFunction":
        return cls.matrix([[alpha, delta], [delta, beta]])

    # -- evaluation ------------------------------------------------------
    def _positions(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        nodes = self._nodes
        M = nodes.size
        if M == 1:
            z = np.zeros_like(u, dtype=int)
            return z, z, np.zeros_like(u, dtype=float)
        step = nodes[1] - nodes[0]
        p = np.clip(u / step, 0.0, M - 1.0)
        # snap to exact node evaluations so matrix entries are reproduced bit-for-bit
        pr = np.rint(p)
        p = np.where(np.abs(p - pr) < 1e-9, pr, p)
        i0 = np.clip(np.floor(p).astype(int), 0, M - 1)
        i1 = np.minimum(i0 + 1, M - 1)
        return i0, i1, p - i0

    def evaluate(self, u, v) -> np.ndarray:
        u = _as_unit_array(u, "u")
        v = _as_unit_array(v, "v")
        u, v = np.broadcast_arrays(u, v)
        if self.kind == "constant":
            return np.full(u.shape, self.c)
        if self.kind == "product":
            return u * v
        if self.kind == "min":
            return np.minimum(u, v)
        i0, i1, fu = self._positions(u)
        j0, j1, fv = self._positions(v)
        T = self._table
        return ((1 - fu) * (1 - fv) * T[i0, j0] + fu * (1 - fv) * T[i1, j0]
                + (1 - fu) * fv * T[i0, j1] + fu * fv * T[i1, j1])

    __call__ = evaluate

    def to_csv(self, path) -> None:
        if self._table is None:
            raise ConfigError("only matrix/grid connection functions serialize to CSV")
        with open(path, "w", encoding="utf-8") as fh:
            if self.kind == "grid":
                fh.write("# symmetric values on a uniform grid of [0,1]^2; "
                         "row/col i is node i/(G-1)\n")
            else:
                fh.write("# type-connection matrix; row/col l is type point l/(m+1)\n")
            for row in self._table:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "ConnectionFunction":
        kind = "grid"
        rows = []
        with open(path, "r", encoding="utf-8") as fh:
            for ln in fh:
                ln = ln.strip()
                if not ln:
                    continue
                if ln.startswith("#"):
                    if "type-connection" in ln:
                        kind = "matrix"
                    continue
                rows.append([float(t) for t in ln.split(",")])
        table = np.asarray(rows, dtype=float)
        return cls.matrix(table) if kind == "matrix" else cls.grid(table)


@dataclass(frozen=True)
class TypeMeasure:
    """Probability weights (Y_0 .. Y_m) on the atoms l/(m+1)."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ConfigError("weights must be a non-empty vector")
        if np.any(w < -_ATOL):
            raise ConfigError("weights must be non-negative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ConfigError(f"weights must sum to 1 (got {w.sum()!r})")
        w = np.clip(w, 0.0, None)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return self.weights.size - 1

    @property
    def atoms(self) -> np.ndarray:
        return np.arange(self.weights.size) / float(self.weights.size)

    def cdf(self, x) -> np.ndarray | float:
        """F(x) = sum of weights of atoms l/(m+1) with l <= floor((m+1) x); F(1) = 1."""
        scalar = np.isscalar(x)
        x = np.asarray(x, dtype=float)
        if np.any(x < 0) or np.any(x > 1):
            raise ConfigError("cdf argument must lie in [0, 1]")
        mp1 = self.weights.size
        idx = np.minimum(np.floor(mp1 * x).astype(int), mp1 - 1)
        cum = np.concatenate([[0.0], np.cumsum(self.weights)])
        cum[-1] = 1.0
        out = np.where(x >= 1.0, 1.0, cum[idx + 1])
        return float(out) if scalar else out

    def cdf_step(self) -> "StepCDF":
        return StepCDF(self.atoms, self.weights)

    def quantile(self, u):
        return self.cdf_step().quantile(u)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Inverse-CDF sampling through the generalized inverse."""
        return self.quantile(rng.random(size))


@dataclass(frozen=True)
class PointMass:
    """Degenerate vertex measure concentrated at a single point of [0,1]."""

    x0: float

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.full(size, float(self.x0))


@dataclass(frozen=True)
class StepCDF:
    """Distribution function of a purely atomic measure on [0,1]."""

    atoms: np.ndarray
    weights: np.ndarray
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if a.shape != w.shape or a.ndim != 1:
            raise ConfigError("atoms and weights must be 1-d and of equal length")
        if np.any(np.diff(a) < 0):
            raise ConfigError("atoms must be sorted")
        if np.any(w < -_ATOL) or abs(w.sum() - 1.0) > 1e-12:
            raise ConfigError("weights must be non-negative and sum to 1")
        cum = np.cumsum(np.clip(w, 0.0, None))
        cum[-1] = 1.0
        for arr in (a, w, cum):
            arr.setflags(write=False)
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "_cum", cum)

    def __call__(self, x) -> np.ndarray | float:
        scalar = np.isscalar(x)
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.atoms, x, side="right")
        cum = np.concatenate([[0.0], self._cum])
        out = cum[idx]
        return float(out) if scalar else out

    def quantile(self, u):
        """Right-continuous generalized inverse: inf{x : F(x) > u}, with F-bar(1) the left limit."""
        scalar = np.isscalar(u)
        u = np.asarray(u, dtype=float)
        if np.any(u < 0) or np.any(u > 1):
            raise ConfigError("quantile argument must lie in [0, 1]")
        j = np.searchsorted(self._cum, u, side="right")
        # u = 1: limit of F-bar from the left = last atom carrying positive weight
        j_top = int(np.max(np.nonzero(self.weights > 0)[0])) if np.any(self.weights > 0) else 0
        j = np.where(u >= 1.0, j_top, np.minimum(j, self.atoms.size - 1))
        out = self.atoms[j]
        return float(out) if scalar else out


def cdf(mu: TypeMeasure, x):
    """Cumulative distribution function of a type measure at x in [0,1]."""
    return mu.cdf(x)


def generalized_inverse(F, u, tol: float = 1e-12):
    """Right-continuous generalized inverse F-bar(u) = inf{x in [0,1] : F(x) > u}.

    Exact for TypeMeasure / StepCDF inputs; bisection for arbitrary
    non-decreasing callables with F(1) = 1.
    """
    if isinstance(F, TypeMeasure):
        return F.quantile(u)
    if isinstance(F, StepCDF):
        return F.quantile(u)
    scalar = np.isscalar(u)
    uu = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any(uu < 0) or np.any(uu > 1):
        raise ConfigError("quantile argument must lie in [0, 1]")
    out = np.empty_like(uu)
    for idx, uv in np.ndenumerate(uu):
        target = min(uv, 1.0 - 1e-9)  # u = 1 takes the left limit
        if F(0.0) > target:
            out[idx] = 0.0
            continue
        lo, hi = 0.0, 1.0  # F(lo) <= target < F(hi) maintained
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if F(mid) > target:
                hi = mid
            else:
                lo = mid
        out[idx] = hi
    return float(out[0]) if scalar else out.reshape(np.shape(u))


@dataclass(frozen=True)
class LandscapeGrid:
    """Fitness landscape [0,1] -> [0,1] stored as knots with linear interpolation."""

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        v = _as_unit_array(self.values, "landscape values")
        if k.shape != v.shape or k.ndim != 1 or k.size < 2:
            raise ConfigError("knots/values must be matching 1-d arrays (>= 2 points)")
        if np.any(np.diff(k) <= 0) or abs(k[0]) > _ATOL or abs(k[-1] - 1.0) > _ATOL:
            raise ConfigError("knots must increase strictly from 0 to 1")
        k = k.copy()
        k[0], k[-1] = 0.0, 1.0
        k.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)

    @classmethod
    def uniform(cls, values) -> "LandscapeGrid":
        values = np.asarray(values, dtype=float)
        return cls(np.linspace(0.0, 1.0, values.size), values)

    @classmethod
    def identity(cls, points: int = 1025) -> "LandscapeGrid":
        x = np.linspace(0.0, 1.0, points)
        return cls(x, x)

    @classmethod
    def from_type_samples(cls, samples) -> "LandscapeGrid":
        """Exact at the type points l/(m+1); constant on the tail [m/(m+1), 1]."""
        samples = np.asarray(samples, dtype=float)
        mp1 = samples.size
        knots = np.concatenate([np.arange(mp1) / mp1, [1.0]])
        values = np.concatenate([samples, [samples[-1]]])
        return cls(knots, values)

    def __call__(self, u) -> np.ndarray:
        return np.interp(np.asarray(u, dtype=float), self.knots, self.values)


@dataclass(frozen=True)
class ComposedKernel:
    """Kernel h(x, y) = r(H(Fbar(x)), H(Fbar(y))).

    `Fbar=None` means the identity relabeling, i.e. h(x, y) = r(H(x), H(y)),
    the form used with an explicit vertex measure in reweighted densities.
    """

    r: ConnectionFunction
    H: LandscapeGrid | Callable[[np.ndarray], np.ndarray] | None = None
    Fbar: StepCDF | None = None

    def _landscape(self, x: np.ndarray) -> np.ndarray:
        if self.H is None:
            return x
        return np.asarray(self.H(x), dtype=float)

    def evaluate(self, x, y) -> np.ndarray:
        x = _as_unit_array(x, "x")
        y = _as_unit_array(y, "y")
        x, y = np.broadcast_arrays(x, y)
        if self.Fbar is not None:
            x = self.Fbar.quantile(x)
            y = self.Fbar.quantile(y)
        return self.r.evaluate(self._landscape(x), self._landscape(y))

    __call__ = evaluate

    def as_step_graphon(self) -> StepGraphon | None:
        """Exact step form when the reference measure is atomic; None otherwise."""
        if self.Fbar is None:
            return None
        bp = np.concatenate([[0.0], np.cumsum(self.Fbar.weights)])
        bp[-1] = 1.0
        hvals = self._landscape(self.Fbar.atoms)
        vals = self.r.evaluate(hvals[:, None], hvals[None, :])
        return StepGraphon(bp, vals)


def step_graphon_at(Y: TypeMeasure, H_samples, r: ConnectionFunction) -> StepGraphon:
    """Realized block graphon: breakpoints from cumulative type frequencies,
    block value (j, l) = r(H(j/(m+1)), H(l/(m+1)))."""
    H_samples = np.asarray(H_samples, dtype=float)
    if H_samples.shape != (Y.weights.size,):
        raise ConfigError("landscape samples must cover all m+1 types")
    bp = np.concatenate([[0.0], np.cumsum(Y.weights)])
    bp[-1] = 1.0
    vals = r.evaluate(H_samples[:, None], H_samples[None, :])
    return StepGraphon(bp, vals)


def composed_kernel_at(Y: TypeMeasure, H_samples, r: ConnectionFunction) -> ComposedKernel:
    """The ComposedKernel equivalent of step_graphon_at (same pointwise values)."""
    return ComposedKernel(r=r, H=LandscapeGrid.from_type_samples(np.asarray(H_samples, float)),
                          Fbar=Y.cdf_step())
