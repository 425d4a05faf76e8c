"""Desk-scale experiments: concentration of subgraph densities around their
conditional means, the urn approximation rate, and numerical witnesses of the
two scaling limits (snapshot graphs against realized block graphons as the
population grows; stabilization of block densities as the number of types
grows).

Every reported mean carries a standard error and replicate count; replicates
fan out over a process pool with independently derived seeds and are reduced
in replicate order, so reports are deterministic functions of their configs.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence
import warnings

import numpy as np

from .densities import _check_block_budget, inj_density, mc_density, step_density
from .dynamics import (EdgeNoise, LandscapeSpec, MoranState, empirical_measure,
                       evaluate_landscape, simulate_moran,
                       simulate_wright_fisher, snapshot_graph)
from .errors import ConfigError
from .graphs import MotifGraph, catalog_index
from .graphons import (ComposedKernel, ConnectionFunction, LandscapeGrid,
                       TypeMeasure, step_graphon_at)
from .seeds import replicate_seed, spawn

REPORT_COLUMNS = ("experiment", "x_name", "x", "s", "motif", "statistic",
                  "mean", "std_error", "replicates", "extra")


@dataclass
class ExperimentReport:
    """Per-cell statistics, pass/fail flags and the config that produced them."""

    experiment: str
    config: dict
    rows: list[dict] = field(default_factory=list)
    plot_rows: list[dict] = field(default_factory=list)
    flags: list[dict] = field(default_factory=list)
    wall_seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(f["passed"] for f in self.flags)

    def add_row(self, **kw) -> None:
        row = {c: kw.get(c, "") for c in REPORT_COLUMNS}
        row["experiment"] = self.experiment
        self.rows.append(row)

    def add_flag(self, name: str, passed: bool, detail: str) -> None:
        self.flags.append({"name": name, "passed": bool(passed), "detail": detail})

    def to_csv(self, fh_or_path) -> None:
        own = not hasattr(fh_or_path, "write")
        fh = open(fh_or_path, "w", encoding="utf-8") if own else fh_or_path
        try:
            fh.write(",".join(REPORT_COLUMNS) + "\n")
            for row in self.rows:
                fh.write(",".join(_fmt(row[c]) for c in REPORT_COLUMNS) + "\n")
            for f in self.flags:
                vals = {c: "" for c in REPORT_COLUMNS}
                vals.update(experiment=self.experiment, statistic=f"flag_{f['name']}",
                            mean=1.0 if f["passed"] else 0.0, extra=f["detail"])
                fh.write(",".join(_fmt(vals[c]) for c in REPORT_COLUMNS) + "\n")
        finally:
            if own:
                fh.close()

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = [f"{self.experiment}: {status} "
                 f"({len(self.rows)} cells, {self.wall_seconds:.1f}s)"]
        for f in self.flags:
            parts.append(f"  [{'ok' if f['passed'] else 'FAIL'}] {f['name']}: {f['detail']}")
        return "\n".join(parts)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    s = str(v)
    if "," in s or '"' in s:
        s = '"' + s.replace('"', '""') + '"'
    return s


def emit_plot_data(report: ExperimentReport, fh_or_path) -> None:
    """Long-format plotting CSV: x, series, mean, stderr."""
    own = not hasattr(fh_or_path, "write")
    fh = open(fh_or_path, "w", encoding="utf-8") if own else fh_or_path
    try:
        fh.write("x,series,mean,stderr\n")
        for row in report.plot_rows:
            fh.write(",".join(_fmt(row[c]) for c in ("x", "series", "mean", "stderr")) + "\n")
    finally:
        if own:
            fh.close()


def _map_replicates(fn: Callable, args: list, workers: int) -> list:
    if workers <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, args, chunksize=max(1, len(args) // (2 * workers))))


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    if values.size < 2:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / math.sqrt(values.size))


def _common_grid(s_values: Sequence[float]) -> float:
    """Largest uniform spacing that hits every requested sample time."""
    fracs = [Fraction(float(s)).limit_denominator(10 ** 6) for s in s_values if s > 0]
    if not fracs:
        raise ConfigError("need at least one positive sample time")
    g = fracs[0]
    for f in fracs[1:]:
        g = Fraction(math.gcd(g.numerator * f.denominator, f.numerator * g.denominator),
                     g.denominator * f.denominator)
    return float(g)


# ---------------------------------------------------------------------------
# urn probabilities and conditional means
# ---------------------------------------------------------------------------

def urn_probability(counts: Sequence[int], draws: Sequence[int]) -> Fraction:
    """Exact probability that ordered sampling without replacement from an urn
    with counts[i] balls of colour i yields the given colour tuple."""
    counts = [int(c) for c in counts]
    if any(c < 0 for c in counts):
        raise ConfigError("urn counts must be non-negative")
    total = sum(counts)
    if len(draws) > total:
        warnings.warn("more draws than balls in the urn; probability is 0 by convention")
        return Fraction(0)
    used = [0] * len(counts)
    p = Fraction(1)
    for t, colour in enumerate(draws):
        colour = int(colour)
        if not 0 <= colour < len(counts):
            raise ConfigError(f"draw colour {colour} out of range")
        avail = counts[colour] - used[colour]
        if avail <= 0:
            return Fraction(0)
        p *= Fraction(avail, total - t)
        used[colour] += 1
    return p


def conditional_mean_inj(F: MotifGraph, state, H, r: ConnectionFunction) -> float:
    """Exact conditional mean of t^inj_F(G) given types: the urn-weighted sum
    of edge-probability products over ordered colour tuples."""
    if isinstance(state, MoranState):
        X = state.counts
    else:
        X = np.asarray(state, dtype=np.int64)
    mp1 = X.size
    k = F.k
    _check_block_budget(mp1, k)
    n = int(X.sum())
    if n < k:
        return 0.0
    H = np.asarray(H, dtype=float)
    if H.shape != (mp1,):
        raise ConfigError("landscape samples must cover all m+1 types")
    P = r.evaluate(H[:, None], H[None, :])
    Xf = X.astype(float)
    denom = float(np.prod([n - t for t in range(k)]))
    radix = mp1 ** np.arange(k - 1, -1, -1)

    total = 0.0
    chunk = 1 << 15
    n_tuples = mp1 ** k
    for lo in range(0, n_tuples, chunk):
        codes = np.arange(lo, min(lo + chunk, n_tuples))
        digits = (codes[:, None] // radix[None, :]) % mp1
        num = np.ones(codes.size)
        ok = np.ones(codes.size, dtype=bool)
        for t in range(k):
            prior_same = np.zeros(codes.size)
            for t2 in range(t):
                prior_same += digits[:, t2] == digits[:, t]
            avail = Xf[digits[:, t]] - prior_same
            ok &= avail >= 1
            num *= np.clip(avail, 0.0, None)
        probs = np.where(ok, num / denom, 0.0)
        for i, j in F.edges:
            probs *= P[digits[:, i], digits[:, j]]
        total += float(probs.sum())
    return total


def mcdiarmid_bound(n: int, k: int, eps: float) -> float:
    """Concentration bound 2 exp(-2 eps^2 C(n,2) / C(k,2)^2) for t^inj around
    its conditional mean; each edge flip moves the density by at most
    C(k,2)/C(n,2)."""
    ck2 = math.comb(k, 2)
    if ck2 == 0:
        return 0.0 if eps > 0 else 2.0
    return 2.0 * math.exp(-2.0 * eps * eps * math.comb(n, 2) / ck2 ** 2)


# ---------------------------------------------------------------------------
# concentration experiment
# ---------------------------------------------------------------------------

def _concentration_replicate(args) -> list[float]:
    (n, m, spec, r, motifs, s, init, rep_seed) = args
    moran_seed = spawn(rep_seed, 1)
    noise = EdgeNoise(spawn(rep_seed, 0))
    _, states = simulate_moran(n, m, init, horizon=s, grid=s if s > 0 else 1.0,
                               seed=moran_seed, return_states=True)
    state = states[-1]
    Y = empirical_measure(state)
    H = evaluate_landscape(spec, Y)
    G = snapshot_graph(state, H, r, noise)
    out = []
    for F in motifs:
        t_inj = inj_density(F, G).value
        cond = conditional_mean_inj(F, state, H, r)
        out.append(abs(t_inj - cond))
    return out


def concentration_check(*, m: int, n: int, landscape: LandscapeSpec,
                        r: ConnectionFunction, motifs: Sequence[MotifGraph],
                        s: float, replicates: int, eps: float, seed: int,
                        init=None, workers: int = 1) -> ExperimentReport:
    """Empirical exceedance of |t^inj - conditional mean| over eps versus the
    concentration bound; flags failure when the empirical frequency beats the
    bound by more than 3 binomial standard errors."""
    if replicates < 50:
        raise ConfigError("concentration_check needs at least 50 replicates")
    t0 = time.perf_counter()
    if init is None:
        init = TypeMeasure(np.full(m + 1, 1.0 / (m + 1)))
    cfg = dict(experiment="concentration", m=m, n=n, s=s, replicates=replicates,
               eps=eps, seed=seed, motifs=[F.name or str(F.edges) for F in motifs])
    args = [(n, m, landscape, r, tuple(motifs), s, init, replicate_seed(seed, rep))
            for rep in range(replicates)]
    results = np.asarray(_map_replicates(_concentration_replicate, args, workers))

    rep = ExperimentReport("concentration", cfg)
    for col, F in enumerate(motifs):
        devs = results[:, col]
        exceed = float(np.mean(devs > eps))
        bound = mcdiarmid_bound(n, F.k, eps)
        se_bin = math.sqrt(max(bound * (1 - bound), exceed * (1 - exceed)) / replicates)
        name = F.name or str(F.edges)
        mean_dev, se_dev = _mean_se(devs)
        rep.add_row(x_name="n", x=n, s=s, motif=name, statistic="exceedance",
                    mean=exceed, std_error=se_bin, replicates=replicates,
                    extra=f"bound={bound!r}")
        rep.add_row(x_name="n", x=n, s=s, motif=name, statistic="abs_deviation",
                    mean=mean_dev, std_error=se_dev, replicates=replicates,
                    extra=f"max={float(devs.max())!r}")
        rep.plot_rows.append(dict(x=n, series=f"exceedance_{name}", mean=exceed,
                                  stderr=se_bin))
        rep.plot_rows.append(dict(x=n, series=f"bound_{name}", mean=bound, stderr=0.0))
        rep.add_flag(f"exceedance_{name}",
                     exceed <= bound + 3 * se_bin,
                     f"empirical {exceed!r} vs bound {bound:.3e} (eps={eps})")
    rep.wall_seconds = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# growing-population witness (snapshot graphs vs realized block graphons)
# ---------------------------------------------------------------------------

def _t13_replicate(args) -> np.ndarray:
    (n, m, spec, r, motifs, s_values, ds, init, moran_seed, noise_seed) = args
    noise = EdgeNoise(noise_seed)
    _, states = simulate_moran(n, m, init, horizon=max(s_values), grid=ds,
                               seed=moran_seed, return_states=True)
    out = np.empty((len(s_values), len(motifs)))
    for a, s in enumerate(s_values):
        state = states[int(round(s / ds))]
        Y = empirical_measure(state)
        H = evaluate_landscape(spec, Y)
        G = snapshot_graph(state, H, r, noise)
        h = step_graphon_at(Y, H, r)
        for b, F in enumerate(motifs):
            out[a, b] = abs(inj_density(F, G).value - step_density(F, h).value)
    return out


def theorem13_experiment(*, m: int, landscape: LandscapeSpec, r: ConnectionFunction,
                         motifs: Sequence[MotifGraph], s_grid: Sequence[float],
                         n_list: Sequence[int], replicates: int, seed: int,
                         init=None, workers: int = 1,
                         final_tolerance: float = 0.05) -> ExperimentReport:
    """Snapshot graphs against the realized limiting block graphon built from
    the same frequencies: the catalog-weighted discrepancy D must decrease
    strictly along n_list and finish below final_tolerance."""
    if list(n_list) != sorted(set(n_list)):
        raise ConfigError("n_list must be strictly increasing")
    t0 = time.perf_counter()
    motifs = list(motifs)
    weights = [2.0 ** -catalog_index(F) for F in motifs]
    if init is None:
        init = TypeMeasure(np.full(m + 1, 1.0 / (m + 1)))
    ds = _common_grid(s_grid)
    cfg = dict(experiment="theorem13", m=m, n_list=list(n_list),
               s_grid=[float(s) for s in s_grid], replicates=replicates, seed=seed,
               motifs=[F.name or str(F.edges) for F in motifs],
               final_tolerance=final_tolerance)
    rep = ExperimentReport("theorem13", cfg)

    mean_D = []
    for j, n in enumerate(n_list):
        args = []
        for r_i in range(replicates):
            rs = replicate_seed(seed, r_i)
            args.append((n, m, landscape, r, tuple(motifs), tuple(float(s) for s in s_grid),
                         ds, init, spawn(rs, 1 + j), spawn(rs, 0)))
        res = np.asarray(_map_replicates(_t13_replicate, args, workers))  # (rep, s, motif)
        for a, s in enumerate(s_grid):
            for b, F in enumerate(motifs):
                mu, se = _mean_se(res[:, a, b])
                rep.add_row(x_name="n", x=n, s=float(s), motif=F.name or str(F.edges),
                            statistic="abs_discrepancy", mean=mu, std_error=se,
                            replicates=replicates)
        D_rep = (res * np.asarray(weights)).sum(axis=2).mean(axis=1)  # per replicate
        muD, seD = _mean_se(D_rep)
        mean_D.append(muD)
        rep.add_row(x_name="n", x=n, s="", motif="all", statistic="weighted_D",
                    mean=muD, std_error=seD, replicates=replicates)
        rep.plot_rows.append(dict(x=n, series="weighted_D", mean=muD, stderr=seD))
        for b, F in enumerate(motifs):
            mu, se = _mean_se(res[:, :, b].mean(axis=1))
            rep.plot_rows.append(dict(x=n, series=F.name or str(F.edges),
                                      mean=mu, stderr=se))

    decreasing = all(mean_D[i] > mean_D[i + 1] for i in range(len(mean_D) - 1))
    rep.add_flag("D_strictly_decreasing", decreasing,
                 "mean D along n_list: " + ", ".join(repr(v) for v in mean_D))
    rep.add_flag("final_D_below_tolerance", mean_D[-1] < final_tolerance,
                 f"final mean D {mean_D[-1]!r} < {final_tolerance}")
    rep.wall_seconds = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# growing-type-space witness (block densities stabilize in m)
# ---------------------------------------------------------------------------

def beta22_weights(m: int) -> np.ndarray:
    """Beta(2,2) mass of the cells [l/(m+1), (l+1)/(m+1)); exact and
    consistent across m (W(x) = 3x^2 - 2x^3)."""
    edges = np.arange(m + 2) / (m + 1)
    W = 3 * edges ** 2 - 2 * edges ** 3
    w = np.diff(W)
    return w / w.sum()


def _t17_replicate(args) -> np.ndarray:
    (m, y0, spec, r, motifs, s_values, ds, dt, wf_seed) = args
    path = simulate_wright_fisher(m, y0, horizon=max(s_values), dt=dt, grid=ds,
                                  seed=wf_seed)
    out = np.empty((len(s_values), len(motifs)))
    for a, s in enumerate(s_values):
        Y = path.measure_at(s)
        H = evaluate_landscape(spec, Y)
        h = step_graphon_at(Y, H, r)
        for b, F in enumerate(motifs):
            out[a, b] = step_density(F, h).value
    return out


def theorem17_experiment(*, m_list: Sequence[int], landscape: LandscapeSpec,
                         r: ConnectionFunction, motifs: Sequence[MotifGraph],
                         s_grid: Sequence[float], replicates: int, seed: int,
                         dt: float = 1e-4, mc_budget: int = 200_000,
                         init_builder: Callable[[int], np.ndarray] = beta22_weights,
                         workers: int = 1, gap_tolerance: float = 0.02) -> ExperimentReport:
    """Cauchy-style witness of the large-type-space limit: catalog-weighted
    gaps between replicate-mean block densities at successive m must decrease
    and finish below gap_tolerance; a measure-reweighted Monte Carlo estimate
    must agree with each block sum within 4 standard errors."""
    if list(m_list) != sorted(set(m_list)):
        raise ConfigError("m_list must be strictly increasing")
    t0 = time.perf_counter()
    motifs = list(motifs)
    weights = [2.0 ** -catalog_index(F) for F in motifs]
    ds = _common_grid(s_grid)
    cfg = dict(experiment="theorem17", m_list=list(m_list),
               s_grid=[float(s) for s in s_grid], replicates=replicates, seed=seed,
               dt=dt, mc_budget=mc_budget, gap_tolerance=gap_tolerance,
               motifs=[F.name or str(F.edges) for F in motifs])
    rep = ExperimentReport("theorem17", cfg)

    means = np.empty((len(m_list), len(motifs)))
    cross_ok = True
    cross_details = []
    for j, m in enumerate(m_list):
        y0 = TypeMeasure(init_builder(m))
        args = []
        for r_i in range(replicates):
            rs = replicate_seed(seed, r_i)
            args.append((m, y0, landscape, r, tuple(motifs),
                         tuple(float(s) for s in s_grid), ds, dt, spawn(rs, 10 + j)))
        res = np.asarray(_map_replicates(_t17_replicate, args, workers))  # (rep, s, motif)
        for b, F in enumerate(motifs):
            mu, se = _mean_se(res[:, :, b].mean(axis=1))
            means[j, b] = mu
            rep.add_row(x_name="m", x=m, s="", motif=F.name or str(F.edges),
                        statistic="block_density", mean=mu, std_error=se,
                        replicates=replicates)
            rep.plot_rows.append(dict(x=m, series=F.name or str(F.edges),
                                      mean=mu, stderr=se))

        # two-estimator cross-check on replicate 0 at the last sample time
        path = simulate_wright_fisher(m, y0, horizon=max(s_grid), dt=dt, grid=ds,
                                      seed=spawn(replicate_seed(seed, 0), 10 + j))
        Y = path.measure_at(max(s_grid))
        H = evaluate_landscape(landscape, Y)
        kernel = ComposedKernel(r=r, H=LandscapeGrid.from_type_samples(H), Fbar=None)
        for b, F in enumerate(motifs):
            exact = step_density(F, step_graphon_at(Y, H, r)).value
            mc = mc_density(F, kernel, mu=Y, samples=mc_budget,
                            seed=spawn(seed, 100 + 10 * j + b))
            tol = max(4 * mc.std_error, 1e-9)
            ok = abs(exact - mc.value) <= tol
            cross_ok = cross_ok and ok
            cross_details.append(f"m={m} {F.name}: |{exact:.5f}-{mc.value:.5f}|"
                                 f" vs 4se={4 * mc.std_error:.2e}")
            rep.add_row(x_name="m", x=m, s=float(max(s_grid)), motif=F.name or str(F.edges),
                        statistic="mc_cross_check", mean=abs(exact - mc.value),
                        std_error=mc.std_error, replicates=1,
                        extra=f"block={exact!r};mc={mc.value!r}")

    gaps = [float(np.dot(weights, np.abs(means[i + 1] - means[i])))
            for i in range(len(m_list) - 1)]
    for i, g in enumerate(gaps):
        rep.add_row(x_name="m", x=m_list[i + 1], s="", motif="all",
                    statistic="successive_gap", mean=g, std_error=0.0,
                    replicates=replicates, extra=f"from_m={m_list[i]}")
        rep.plot_rows.append(dict(x=m_list[i + 1], series="successive_gap",
                                  mean=g, stderr=0.0))
    decreasing = all(gaps[i] > gaps[i + 1] for i in range(len(gaps) - 1))
    rep.add_flag("gaps_decreasing", decreasing,
                 "weighted successive gaps: " + ", ".join(repr(g) for g in gaps))
    rep.add_flag("final_gap_below_tolerance", gaps[-1] < gap_tolerance,
                 f"final gap {gaps[-1]!r} < {gap_tolerance}")
    rep.add_flag("mc_cross_check", cross_ok, "; ".join(cross_details))
    rep.wall_seconds = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# moment checks (martingale / heterozygosity, with an exact small-n oracle)
# ---------------------------------------------------------------------------

def moran_rate_matrix(n: int) -> np.ndarray:
    """Unscaled generator of the 2-type Moran count chain on states 0..n."""
    Q = np.zeros((n + 1, n + 1))
    for x in range(n + 1):
        up = (n - x) * x / n
        down = x * (n - x) / n
        Q[x, x] = -(up + down)
        if x < n:
            Q[x, x + 1] = up
        if x > 0:
            Q[x, x - 1] = down
    return Q


def _expm(A: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a Taylor series; ample
    for the small oracle matrices used here."""
    norm = float(np.abs(A).sum(axis=1).max())
    s = max(0, int(math.ceil(math.log2(max(norm, 1e-300)))) + 1) if norm > 0.5 else 0
    B = A / (2 ** s)
    out = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for k in range(1, 40):
        term = term @ B / k
        out = out + term
        if float(np.abs(term).max()) < 1e-18:
            break
    for _ in range(s):
        out = out @ out
    return out


def moran_moment_oracle(n: int, x0: int, s: float, phi: Callable[[np.ndarray], np.ndarray]) -> float:
    """Exact E[phi(X(ns))] for the 2-type Moran chain via matrix exponentiation."""
    P = _expm(moran_rate_matrix(n) * (n * s))
    states = np.arange(n + 1)
    return float(P[x0] @ phi(states))


def _moment_moran_replicate(args):
    (n, y0, s_values, ds, seed) = args
    path = simulate_moran(n, 1, np.array([y0, 1 - y0]), horizon=max(s_values),
                          grid=ds, seed=seed)
    idx = [int(round(s / ds)) for s in s_values]
    y = path.frequencies[idx, 0]
    return np.stack([y, y * (1 - y)], axis=1)


def _moment_wf_replicate(args):
    (y0, s_values, ds, dt, seed) = args
    path = simulate_wright_fisher(1, np.array([y0, 1 - y0]), horizon=max(s_values),
                                  dt=dt, grid=ds, seed=seed)
    idx = [int(round(s / ds)) for s in s_values]
    y = path.frequencies[idx, 0]
    return np.stack([y, y * (1 - y)], axis=1)


def moment_checks(*, n: int = 1000, y0: float = 0.3, s_grid: Sequence[float] = (0.25, 0.5),
                  replicates: int = 400, dt: float = 1e-4, seed: int = 0,
                  oracle_n: int = 6, workers: int = 1) -> ExperimentReport:
    """Martingale and heterozygosity-decay checks for both simulators, each
    within 4 standard errors, cross-validated against the exact matrix-
    exponential oracle at a small population size."""
    t0 = time.perf_counter()
    ds = _common_grid(s_grid)
    cfg = dict(experiment="moments", n=n, y0=y0, s_grid=[float(s) for s in s_grid],
               replicates=replicates, dt=dt, seed=seed, oracle_n=oracle_n)
    rep = ExperimentReport("moments", cfg)
    het0 = y0 * (1 - y0)

    for source, worker, extra in (
            ("moran", _moment_moran_replicate, (n,)),
            ("wright_fisher", _moment_wf_replicate, ())):
        if source == "moran":
            args = [(n, y0, tuple(map(float, s_grid)), ds, spawn(replicate_seed(seed, i), 1))
                    for i in range(replicates)]
        else:
            args = [(y0, tuple(map(float, s_grid)), ds, dt, spawn(replicate_seed(seed, i), 2))
                    for i in range(replicates)]
        res = np.asarray(_map_replicates(worker, args, workers))  # (rep, s, 2)
        for a, s in enumerate(s_grid):
            mu_y, se_y = _mean_se(res[:, a, 0])
            mu_h, se_h = _mean_se(res[:, a, 1])
            target = het0 * math.exp(-2 * float(s))
            rep.add_row(x_name="s", x=float(s), s=float(s), motif="", replicates=replicates,
                        statistic=f"{source}_mean_Y0", mean=mu_y, std_error=se_y,
                        extra=f"target={y0!r}")
            rep.add_row(x_name="s", x=float(s), s=float(s), motif="", replicates=replicates,
                        statistic=f"{source}_heterozygosity", mean=mu_h, std_error=se_h,
                        extra=f"target={target!r}")
            rep.plot_rows.append(dict(x=float(s), series=f"{source}_heterozygosity",
                                      mean=mu_h, stderr=se_h))
            rep.plot_rows.append(dict(x=float(s), series="oracle_exp_decay",
                                      mean=target, stderr=0.0))
            rep.add_flag(f"{source}_martingale_s{s}",
                         abs(mu_y - y0) <= 4 * se_y,
                         f"|{mu_y!r} - {y0}| vs 4se={4 * se_y:.2e}")
            rep.add_flag(f"{source}_heterozygosity_s{s}",
                         abs(mu_h - target) <= 4 * se_h,
                         f"|{mu_h!r} - {target!r}| vs 4se={4 * se_h:.2e}")

    # exact oracle at small n: matrix exponential equals the e^{-2s} decay law,
    # and a Monte Carlo run at the same size must match it
    x0 = oracle_n // 2
    phi = lambda x: x * (oracle_n - x) / oracle_n ** 2
    oracle_dev = 0.0
    for s in s_grid:
        exact = moran_moment_oracle(oracle_n, x0, float(s), phi)
        closed = phi(np.array([x0]))[0] * math.exp(-2 * float(s))
        oracle_dev = max(oracle_dev, abs(exact - closed))
        rep.add_row(x_name="s", x=float(s), s=float(s), motif="", replicates=0,
                    statistic="oracle_heterozygosity", mean=exact, std_error=0.0,
                    extra=f"closed_form={closed!r}")
    rep.add_flag("oracle_matches_closed_form", oracle_dev < 1e-10,
                 f"max |expm - closed form| = {oracle_dev:.2e}")

    small_args = [(oracle_n, x0 / oracle_n, tuple(map(float, s_grid)), ds,
                   spawn(replicate_seed(seed, i), 3)) for i in range(replicates)]
    small = np.asarray(_map_replicates(_moment_moran_replicate, small_args, workers))
    for a, s in enumerate(s_grid):
        mu_h, se_h = _mean_se(small[:, a, 1])
        exact = moran_moment_oracle(oracle_n, x0, float(s), phi)
        rep.add_flag(f"small_n_matches_oracle_s{s}",
                     abs(mu_h - exact) <= 4 * max(se_h, 1e-12),
                     f"|{mu_h!r} - {exact!r}| vs 4se={4 * se_h:.2e}")
    rep.wall_seconds = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# scenario builders
# ---------------------------------------------------------------------------

def scenario(name: str, params: dict | None = None) -> dict:
    """Validated experiment config for the three worked examples."""
    params = dict(params or {})

    def take(key, default=None, required=False):
        if key in params:
            return params.pop(key)
        if required:
            raise ConfigError(f"scenario {name!r} needs parameter {key!r}")
        return default

    if name == "example1":
        m = int(take("m", 1))
        if m == 1:
            alpha = float(take("alpha", required=True))
            beta = float(take("beta", required=True))
            delta = float(take("delta", required=True))
            r = [[alpha, delta], [delta, beta]]
        else:
            r = take("r_matrix", required=True)
        cfg = {"scenario": "example1", "m": m, "landscape.variant": "identity",
               "r.kind": "matrix", "r.matrix": r}
    elif name == "example2":
        m = int(take("m", 3))
        cfg = {"scenario": "example2", "m": m, "landscape.variant": "frequency",
               "r.kind": "product"}
    elif name == "example3":
        c = float(take("c", 0.25))
        if not 0.0 < c < 1.0:
            raise ConfigError("fitness threshold c must lie in (0, 1)")
        f_kind = take("f", "product")
        cfg = {"scenario": "example3", "landscape.variant": "threshold",
               "landscape.c": c, "landscape.f": f_kind, "r.kind": "product",
               "m_list": take("m_list", [4, 9, 19, 39])}
    else:
        raise ConfigError(f"unknown scenario {name!r}; known: example1, example2, example3")
    cfg.update({k: v for k, v in params.items()})
    return cfg
