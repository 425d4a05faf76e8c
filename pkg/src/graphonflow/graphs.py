"""Finite simple graphs, motif patterns and graphon sampling.

Adjacency is stored as packed bit rows (one Python integer bitmask per
vertex), which makes the k-tuple backtracking used for homomorphism counting
a sequence of AND/popcount operations.  All types are immutable after
construction; sampling is a pure function of (n, kernel, seed).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .graphons import StepGraphon

MAX_MOTIF_VERTICES = 7


@dataclass(frozen=True)
class MotifGraph:
    """Small pattern graph F on k <= 7 densely indexed vertices."""

    k: int
    edges: tuple[tuple[int, int], ...]
    name: str | None = None

    def __post_init__(self):
        if not 1 <= self.k <= MAX_MOTIF_VERTICES:
            raise ConfigError(f"motif must have 1..{MAX_MOTIF_VERTICES} vertices, got {self.k}")
        seen = set()
        canon = []
        for u, v in self.edges:
            if u == v:
                raise ConfigError("motif may not contain self-loops")
            if not (0 <= u < self.k and 0 <= v < self.k):
                raise ConfigError(f"motif edge ({u},{v}) out of range for k={self.k}")
            e = (min(u, v), max(u, v))
            if e in seen:
                raise ConfigError(f"duplicate motif edge {e}")
            seen.add(e)
            canon.append(e)
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degrees(self) -> list[int]:
        d = [0] * self.k
        for u, v in self.edges:
            d[u] += 1
            d[v] += 1
        return d

    def adjacency_sets(self) -> list[set[int]]:
        adj = [set() for _ in range(self.k)]
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    def components(self) -> list[list[int]]:
        adj = self.adjacency_sets()
        seen, comps = set(), []
        for start in range(self.k):
            if start in seen:
                continue
            stack, comp = [start], []
            seen.add(start)
            while stack:
                v = stack.pop()
                comp.append(v)
                for w in adj[v]:
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            comps.append(sorted(comp))
        return comps


_NAMED_MOTIFS = {
    "edge": (2, [(0, 1)]),
    "path2": (3, [(0, 1), (1, 2)]),
    "triangle": (3, [(0, 1), (1, 2), (0, 2)]),
    "path3": (4, [(0, 1), (1, 2), (2, 3)]),
    "star3": (4, [(0, 1), (0, 2), (0, 3)]),
    "cycle4": (4, [(0, 1), (1, 2), (2, 3), (0, 3)]),
    "K4me": (4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]),
    "K4": (4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]),
}

# Frozen enumeration behind the subgraph metric: index i carries weight 2^-i.
MOTIF_CATALOG: tuple[MotifGraph, ...] = tuple(
    MotifGraph(k, tuple(edges), name=name)
    for name, (k, edges) in _NAMED_MOTIFS.items()
)


def motif_from_name(name: str) -> MotifGraph:
    """Resolve a named motif or an explicit literal like "k=3;edges=0-1,1-2"."""
    if name in _NAMED_MOTIFS:
        k, edges = _NAMED_MOTIFS[name]
        return MotifGraph(k, tuple(edges), name=name)
    if "k=" in name:
        try:
            parts = dict(p.split("=", 1) for p in name.split(";"))
            k = int(parts["k"])
            spec = parts.get("edges", "").strip()
            edges = []
            if spec:
                for tok in spec.split(","):
                    a, b = tok.split("-")
                    edges.append((int(a), int(b)))
            return MotifGraph(k, tuple(edges), name=name)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"malformed motif literal {name!r}") from exc
    raise ConfigError(f"unknown motif name {name!r}; known: {', '.join(_NAMED_MOTIFS)}")


def catalog_index(motif: MotifGraph) -> int:
    """1-based position in the frozen catalog (determines the 2^-i weight)."""
    for i, F in enumerate(MOTIF_CATALOG, start=1):
        if F.k == motif.k and F.edges == motif.edges:
            return i
    raise ConfigError(f"motif {motif.name or motif.edges} is not in the frozen catalog")


class FiniteGraph:
    """Simple undirected graph with bit-packed symmetric adjacency."""

    __slots__ = ("n", "rows", "_edge_count", "_dense")

    def __init__(self, n: int, rows: Sequence[int]):
        if n < 1:
            raise ConfigError("graph needs at least one vertex")
        if len(rows) != n:
            raise ConfigError("adjacency rows must have length n")
        full = (1 << n) - 1
        for i, r in enumerate(rows):
            if r >> i & 1:
                raise ConfigError(f"self-loop at vertex {i}")
            if r & ~full:
                raise ConfigError(f"row {i} has bits outside 0..n-1")
        total = sum(r.bit_count() for r in rows)
        if total % 2:
            raise ConfigError("adjacency is not symmetric")
        for i, r in enumerate(rows):
            m = r
            while m:
                j = (m & -m).bit_length() - 1
                m &= m - 1
                if not rows[j] >> i & 1:
                    raise ConfigError(f"adjacency not symmetric at ({i},{j})")
        self.n = n
        self.rows = tuple(rows)
        self._edge_count = total // 2
        self._dense = None

    # -- constructors ----------------------------------------------------
    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "FiniteGraph":
        rows = [0] * n
        for u, v in edges:
            if u == v:
                raise ConfigError("self-loops are not allowed")
            if not (0 <= u < n and 0 <= v < n):
                raise ConfigError(f"edge ({u},{v}) out of range for n={n}")
            rows[u] |= 1 << v
            rows[v] |= 1 << u
        return cls(n, rows)

    @classmethod
    def from_adjacency(cls, adj) -> "FiniteGraph":
        A = np.asarray(adj, dtype=bool)
        n = A.shape[0]
        packed = np.packbits(A, axis=1, bitorder="little")
        rows = [int.from_bytes(packed[i].tobytes(), "little") for i in range(n)]
        return cls(n, rows)

    @classmethod
    def empty(cls, n: int) -> "FiniteGraph":
        return cls(n, [0] * n)

    @classmethod
    def complete(cls, n: int) -> "FiniteGraph":
        full = (1 << n) - 1
        return cls(n, [full ^ (1 << i) for i in range(n)])

    # -- accessors ---------------------------------------------------------
    @property
    def edge_count(self) -> int:
        return self._edge_count

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.rows[i] >> j & 1)

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for i, r in enumerate(self.rows):
            m = r >> (i + 1) << (i + 1)  # only j > i
            while m:
                j = (m & -m).bit_length() - 1
                m &= m - 1
                out.append((i, j))
        return out

    def degrees(self) -> np.ndarray:
        return np.array([r.bit_count() for r in self.rows], dtype=np.int64)

    def adjacency(self) -> np.ndarray:
        """Dense float 0/1 matrix (cached; used by the matrix count paths)."""
        if self._dense is None:
            buf = np.zeros((self.n, self.n), dtype=np.uint8)
            width = (self.n + 7) // 8
            for i, r in enumerate(self.rows):
                raw = np.frombuffer(r.to_bytes(width, "little"), dtype=np.uint8)
                buf[i] = np.unpackbits(raw, bitorder="little")[: self.n]
            self._dense = buf.astype(np.float64)
            self._dense.setflags(write=False)
        return self._dense

    def __eq__(self, other) -> bool:
        return isinstance(other, FiniteGraph) and self.n == other.n and self.rows == other.rows

    def __hash__(self) -> int:
        return hash((self.n, self.rows))

    def __repr__(self) -> str:
        return f"FiniteGraph(n={self.n}, edges={self._edge_count})"


def canonical_graphon(G: FiniteGraph) -> StepGraphon:
    """Embed G as a step graphon on n equal-width blocks with 0/1 values."""
    bp = np.arange(G.n + 1) / float(G.n)
    return StepGraphon(bp, G.adjacency())


def sample_graph_from_graphon(n: int, h, seed: int) -> FiniteGraph:
    """G(n, h): vertex labels U_i iid uniform, edge {i,j} with probability h(U_i, U_j).

    `h` may be a StepGraphon or ComposedKernel (anything with vectorized
    evaluate).  Deterministic given the seed; labels are not sorted.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    rng = np.random.default_rng(seed)
    U = rng.random(n)
    iu, ju = np.triu_indices(n, 1)
    P = np.asarray(h.evaluate(U[iu], U[ju]), dtype=float)
    draw = rng.random(iu.size)
    A = np.zeros((n, n), dtype=bool)
    sel = draw < P
    A[iu[sel], ju[sel]] = True
    A |= A.T
    return FiniteGraph.from_adjacency(A)


def write_graph(G: FiniteGraph, path) -> None:
    """Plain-text format: first line "n <count>", then one "i j" per edge (i < j)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"n {G.n}\n")
        for i, j in G.edges():
            fh.write(f"{i} {j}\n")


def read_graph(path) -> FiniteGraph:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("n "):
        raise ConfigError("graph file must start with 'n <count>'")
    try:
        n = int(lines[0].split()[1])
        edges = []
        for ln in lines[1:]:
            a, b = ln.split()
            edges.append((int(a), int(b)))
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"malformed graph file {path}") from exc
    return FiniteGraph.from_edges(n, edges)
