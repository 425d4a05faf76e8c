"""Population dynamics and the dynamic graph snapshot rule.

simulate_moran runs the event-driven multi-type Moran model (one Exp(n) clock,
two uniform individual draws per event) and records the rescaled path Y(s) =
X(ns)/n on a sampling grid, using the cadlag convention (state at the last
event at or before time ns).  simulate_wright_fisher integrates the limiting
simplex diffusion with Euler-Maruyama steps.  Snapshots connect individuals i
and j when a time-independent pairwise uniform falls below the connection
probability of their current fitness values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError
from .graphs import FiniteGraph
from .graphons import ConnectionFunction, TypeMeasure
from .seeds import counter_uniforms

_EVENT_CHUNK = 1 << 16


@dataclass
class MoranState:
    """Instantaneous state of the particle system."""

    n: int
    m: int
    types: np.ndarray          # length n, labels in 0..m
    counts: np.ndarray         # length m+1, counts per type
    clock: float = 0.0         # elapsed unscaled time

    def __post_init__(self):
        self.types = np.asarray(self.types, dtype=np.int64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.types.shape != (self.n,):
            raise ConfigError("types vector must have length n")
        if self.counts.shape != (self.m + 1,):
            raise ConfigError("counts vector must have length m+1")
        expected = np.bincount(self.types, minlength=self.m + 1)
        if self.types.size and (self.types.min() < 0 or self.types.max() > self.m):
            raise ConfigError("type labels must lie in 0..m")
        if not np.array_equal(expected, self.counts):
            raise ConfigError("counts inconsistent with types")
        if int(self.counts.sum()) != self.n:
            raise ConfigError("counts must sum to n")


@dataclass(frozen=True)
class PopulationPath:
    """Recorded type frequencies on a rescaled-time sampling grid."""

    sample_times: np.ndarray        # (T+1,)
    frequencies: np.ndarray         # (T+1, m+1), each row on the simplex
    source: str                     # "moran" | "wright_fisher"

    def __post_init__(self):
        st = np.asarray(self.sample_times, dtype=float)
        fr = np.asarray(self.frequencies, dtype=float)
        if fr.ndim != 2 or fr.shape[0] != st.size:
            raise ConfigError("frequencies must have one row per sample time")
        if np.any(fr < -1e-12) or np.any(np.abs(fr.sum(axis=1) - 1.0) > 1e-9):
            raise ConfigError("each recorded frequency row must be a probability vector")
        st.setflags(write=False)
        fr.setflags(write=False)
        object.__setattr__(self, "sample_times", st)
        object.__setattr__(self, "frequencies", fr)

    @property
    def m(self) -> int:
        return self.frequencies.shape[1] - 1

    def measure_at(self, s: float) -> TypeMeasure:
        idx = int(np.argmin(np.abs(self.sample_times - s)))
        if abs(self.sample_times[idx] - s) > 1e-9:
            raise ConfigError(f"time {s} is not on the sampling grid")
        w = np.clip(self.frequencies[idx], 0.0, None)
        return TypeMeasure(w / w.sum())


@dataclass(frozen=True)
class LandscapeSpec:
    """Declarative fitness landscape: identity, frequency (type l gets Y_l),
    threshold (mass of sufficiently fit partner types), or a user grid."""

    variant: str
    f: ConnectionFunction | None = None
    c: float | None = None
    grid: np.ndarray | None = None

    def __post_init__(self):
        if self.variant not in ("identity", "frequency", "threshold", "user_grid"):
            raise ConfigError(f"unknown landscape variant {self.variant!r}")
        if self.variant == "threshold":
            if self.f is None or self.c is None or not 0.0 < float(self.c) < 1.0:
                raise ConfigError("threshold landscape needs a symmetric f and c in (0, 1)")
        if self.variant == "user_grid":
            g = np.asarray(self.grid, dtype=float)
            if g.ndim != 1 or g.size < 1 or np.any(g < 0) or np.any(g > 1):
                raise ConfigError("user grid must be a 1-d array with values in [0, 1]")
            g.setflags(write=False)
            object.__setattr__(self, "grid", g)

    @classmethod
    def identity(cls) -> "LandscapeSpec":
        return cls("identity")

    @classmethod
    def frequency(cls) -> "LandscapeSpec":
        return cls("frequency")

    @classmethod
    def threshold(cls, f: ConnectionFunction, c: float) -> "LandscapeSpec":
        return cls("threshold", f=f, c=float(c))

    @classmethod
    def user_grid(cls, values) -> "LandscapeSpec":
        return cls("user_grid", grid=np.asarray(values, dtype=float))


@dataclass(frozen=True)
class EdgeNoise:
    """Pairwise uniforms U_{ij}: a pure function of (seed, min(i,j), max(i,j)).

    Being counter-based, the same object yields the same noise across
    snapshots, so the graph changes only where types changed.
    """

    seed: int

    def uniform_pairs(self, ii, jj) -> np.ndarray:
        ii = np.asarray(ii, dtype=np.uint64)
        jj = np.asarray(jj, dtype=np.uint64)
        lo = np.minimum(ii, jj)
        hi = np.maximum(ii, jj)
        with np.errstate(over="ignore"):
            key = (lo << np.uint64(32)) | hi
        return counter_uniforms(self.seed, key)

    def uniform(self, i: int, j: int) -> float:
        return float(self.uniform_pairs(np.asarray([i]), np.asarray([j]))[0])


# ---------------------------------------------------------------------------
# Moran model
# ---------------------------------------------------------------------------

def _initial_types(n: int, m: int, init) -> np.ndarray:
    """Largest-remainder apportionment of a TypeMeasure / weight vector, or
    explicit integer labels of length n (integer dtype disambiguates)."""
    if isinstance(init, TypeMeasure):
        if init.m != m:
            raise ConfigError(f"initial measure has {init.m + 1} types, expected {m + 1}")
        w = init.weights
    else:
        arr = np.asarray(init)
        if arr.ndim != 1:
            raise ConfigError("init must be a 1-d weight vector or a types vector")
        if arr.dtype.kind in "iu" and arr.size == n:
            types = arr.astype(np.int64)
            if types.min() < 0 or types.max() > m:
                raise ConfigError("type labels must lie in 0..m")
            return types.copy()
        if arr.size != m + 1:
            raise ConfigError(f"initial weights must have m+1 = {m + 1} entries")
        w = TypeMeasure(arr.astype(float)).weights
    raw = w * n
    base = np.floor(raw).astype(np.int64)
    short = n - int(base.sum())
    if short > 0:
        order = np.lexsort((np.arange(m + 1), -(raw - base)))
        base[order[:short]] += 1
    return np.repeat(np.arange(m + 1), base)


def _sample_grid(horizon: float, grid_ds: float) -> np.ndarray:
    if horizon < 0:
        raise ConfigError("horizon must be >= 0")
    if grid_ds <= 0:
        raise ConfigError("grid spacing must be > 0")
    steps = int(round(horizon / grid_ds))
    if abs(steps * grid_ds - horizon) > 1e-9 * max(1.0, horizon):
        steps = int(np.floor(horizon / grid_ds + 1e-9))
    return np.arange(steps + 1) * grid_ds


def simulate_moran(n: int, m: int, init, horizon: float, grid: float, seed: int,
                   return_states: bool = False, debug_checks: bool = False):
    """Event-driven Moran run; returns a PopulationPath (and states if asked).

    Events occur after Exp(rate n) unscaled waiting times; at each event a
    uniformly chosen individual adopts the type of a uniformly chosen
    individual (possibly itself).  The path is recorded at rescaled times
    s = 0, grid, 2*grid, ..., i.e. unscaled times n*s.
    """
    if n < 1 or m < 1:
        raise ConfigError("need n >= 1 and m >= 1")
    sample_s = _sample_grid(horizon, grid)
    targets = n * sample_s
    rng = np.random.default_rng(seed)
    types = _initial_types(n, m, init).tolist()
    counts = np.bincount(types, minlength=m + 1).astype(np.int64)

    freqs = np.empty((targets.size, m + 1))
    states: list[MoranState] = []
    t_now = 0.0
    next_target = 0

    def record(upto: float) -> None:
        nonlocal next_target
        arr = np.bincount(types, minlength=m + 1)
        while next_target < targets.size and targets[next_target] <= upto:
            freqs[next_target] = arr / n
            if return_states:
                states.append(MoranState(n, m, np.array(types, dtype=np.int64),
                                         arr.copy(), float(targets[next_target])))
            next_target += 1

    record(0.0)
    while next_target < targets.size:
        gaps = rng.exponential(1.0 / n, _EVENT_CHUNK)
        times = t_now + np.cumsum(gaps)
        ii = rng.integers(0, n, _EVENT_CHUNK).tolist()
        jj = rng.integers(0, n, _EVENT_CHUNK).tolist()
        done = 0
        while next_target < targets.size and times[-1] > targets[next_target]:
            k = int(np.searchsorted(times, targets[next_target], side="right"))
            if debug_checks:
                for a, b in zip(ii[done:k], jj[done:k]):
                    counts[types[a]] -= 1
                    types[a] = types[b]
                    counts[types[a]] += 1
                    assert int(counts.sum()) == n and counts.min() >= 0
            else:
                for a, b in zip(ii[done:k], jj[done:k]):
                    types[a] = types[b]
            done = k
            record(targets[next_target])
        if next_target >= targets.size:
            break
        if debug_checks:
            for a, b in zip(ii[done:], jj[done:]):
                counts[types[a]] -= 1
                types[a] = types[b]
                counts[types[a]] += 1
                assert int(counts.sum()) == n
        else:
            for a, b in zip(ii[done:], jj[done:]):
                types[a] = types[b]
        t_now = float(times[-1])

    path = PopulationPath(sample_s, freqs, "moran")
    return (path, states) if return_states else path


# ---------------------------------------------------------------------------
# Wright-Fisher diffusion
# ---------------------------------------------------------------------------

def heterozygosity(y) -> float:
    """Genetic diversity 1 - sum(y_l^2); the Ohta-Kimura resampling rate."""
    y = np.asarray(y, dtype=float)
    return float(1.0 - np.dot(y, y))


def _sqrt_psd(a: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(a)
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


def simulate_wright_fisher(m: int, y0, horizon: float, dt: float, grid: float,
                           seed: int, rate_modulator=None) -> PopulationPath:
    """Euler-Maruyama integration of the Wright-Fisher diffusion on the simplex.

    Diffusion matrix a_kl(y) = 2 sigma(y) y_k (delta_kl - y_l) over the first m
    coordinates (so the two-type generator is y(1-y) d^2/dy^2, the Moran limit
    under time scale n); its symmetric PSD square root is refactored each step.
    Negative coordinates are clamped to 0 and the vector renormalized.  dt is
    rounded so an integer number of steps lands exactly on each grid point.
    """
    if m < 1:
        raise ConfigError("need m >= 1")
    if dt <= 0:
        raise ConfigError("dt must be > 0")
    y = y0.weights.copy() if isinstance(y0, TypeMeasure) else \
        TypeMeasure(np.asarray(y0, dtype=float)).weights.copy()
    if y.size != m + 1:
        raise ConfigError(f"y0 must have m+1 = {m + 1} entries")
    if rate_modulator is None:
        sigma: Callable[[np.ndarray], float] = lambda _: 1.0
    elif rate_modulator == "ohta_kimura":
        sigma = heterozygosity
    elif callable(rate_modulator):
        sigma = rate_modulator
    else:
        raise ConfigError(f"unknown rate modulator {rate_modulator!r}")

    sample_s = _sample_grid(horizon, grid)
    steps_per_cell = max(1, int(round(grid / dt)))
    dt_eff = grid / steps_per_cell
    sq_dt = np.sqrt(dt_eff)
    rng = np.random.default_rng(seed)

    freqs = np.empty((sample_s.size, m + 1))
    freqs[0] = y
    for cell in range(1, sample_s.size):
        for _ in range(steps_per_cell):
            head = y[:m]
            sig = float(sigma(y))
            a = 2.0 * sig * (np.diag(head) - np.outer(head, head))
            if m == 1:
                noise = np.sqrt(max(a[0, 0], 0.0)) * rng.standard_normal(1) * sq_dt
            else:
                noise = _sqrt_psd(a) @ rng.standard_normal(m) * sq_dt
            head = head + noise
            y = np.concatenate([head, [1.0 - head.sum()]])
            y = np.clip(y, 0.0, None)
            y /= y.sum()
        freqs[cell] = y
    return PopulationPath(sample_s, freqs, "wright_fisher")


# ---------------------------------------------------------------------------
# landscapes and snapshots
# ---------------------------------------------------------------------------

def evaluate_landscape(spec: LandscapeSpec, Y: TypeMeasure) -> np.ndarray:
    """Landscape samples H(l/(m+1)) for l = 0..m under the current frequencies."""
    atoms = Y.atoms
    if spec.variant == "identity":
        return atoms.copy()
    if spec.variant == "frequency":
        return Y.weights.copy()
    if spec.variant == "threshold":
        fit = spec.f.evaluate(atoms[:, None], atoms[None, :]) >= spec.c
        return fit @ Y.weights
    # user_grid: fixed samples on a uniform grid, interpolated at the type points
    g = spec.grid
    if g.size == atoms.size:
        return g.copy()
    return np.interp(atoms, np.linspace(0.0, 1.0, g.size), g)


def snapshot_graph(state: MoranState, H, r: ConnectionFunction,
                   noise: EdgeNoise) -> FiniteGraph:
    """Graph at the current instant: edge {i,j} iff U_ij < r(H(tau_i), H(tau_j))."""
    H = np.asarray(H, dtype=float)
    if H.shape != (state.m + 1,):
        raise ConfigError("landscape samples must cover all m+1 types")
    P = r.evaluate(H[:, None], H[None, :])
    iu, ju = np.triu_indices(state.n, 1)
    u = noise.uniform_pairs(iu, ju)
    sel = u < P[state.types[iu], state.types[ju]]
    A = np.zeros((state.n, state.n), dtype=bool)
    A[iu[sel], ju[sel]] = True
    A |= A.T
    return FiniteGraph.from_adjacency(A)


def empirical_measure(state: MoranState) -> TypeMeasure:
    """Empirical type distribution: weight X_l/n on atom l/(m+1)."""
    return TypeMeasure(state.counts / state.n)


# ---------------------------------------------------------------------------
# path persistence
# ---------------------------------------------------------------------------

def write_paths_csv(paths: Sequence[PopulationPath], fh_or_path) -> None:
    """Long-format CSV: s, Y_0, ..., Y_m, replicate."""
    if not paths:
        raise ConfigError("no paths to write")
    m = paths[0].m
    own = isinstance(fh_or_path, (str, bytes)) or hasattr(fh_or_path, "__fspath__")
    fh = open(fh_or_path, "w", encoding="utf-8") if own else fh_or_path
    try:
        fh.write("s," + ",".join(f"Y_{l}" for l in range(m + 1)) + ",replicate\n")
        for rep, path in enumerate(paths):
            if path.m != m:
                raise ConfigError("all paths must have the same number of types")
            for s, row in zip(path.sample_times, path.frequencies):
                fh.write(repr(float(s)) + "," + ",".join(repr(float(v)) for v in row)
                         + f",{rep}\n")
    finally:
        if own:
            fh.close()


def read_paths_csv(path) -> list[PopulationPath]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[0] != "s" or header[-1] != "replicate":
            raise ConfigError("not a population path CSV")
        m = len(header) - 3
        by_rep: dict[int, list[tuple[float, list[float]]]] = {}
        for ln in fh:
            parts = ln.strip().split(",")
            rep = int(parts[-1])
            by_rep.setdefault(rep, []).append(
                (float(parts[0]), [float(v) for v in parts[1:-1]]))
    out = []
    for rep in sorted(by_rep):
        rows = by_rep[rep]
        out.append(PopulationPath(np.array([r[0] for r in rows]),
                                  np.array([r[1] for r in rows]), "moran"))
    return out
