"""Graph representation, canonical edge indexing, generators and the random
vertex partition.

Vertices are ``0..n-1``. Every undirected edge is stored once in canonical
orientation ``u < v`` and identified by its pairing index
``v*(v-1)//2 + u``; all edge arrays of a :class:`Graph` are sorted by that
index so iteration order is reproducible.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class GraphError(ValueError):
    """Raised for malformed graphs and invalid generator parameters."""


class Edge(NamedTuple):
    u: int
    v: int
    weight: int | None = None


def edge_index(u: int, v: int) -> int:
    if u == v:
        raise GraphError(f"degenerate edge ({u}, {u})")
    if u > v:
        u, v = v, u
    if u < 0:
        raise GraphError(f"negative vertex id in ({u}, {v})")
    return v * (v - 1) // 2 + u


def edge_from_index(idx: int) -> tuple[int, int]:
    if idx < 0:
        raise GraphError(f"negative edge index {idx}")
    # v is the largest integer with v*(v-1)/2 <= idx
    v = (1 + math.isqrt(1 + 8 * idx)) // 2
    while v * (v - 1) // 2 > idx:
        v -= 1
    while (v + 1) * v // 2 <= idx:
        v += 1
    return idx - v * (v - 1) // 2, v


def edge_index_array(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    lo = np.minimum(u, v).astype(np.int64)
    hi = np.maximum(u, v).astype(np.int64)
    return hi * (hi - 1) // 2 + lo


def edges_from_index_array(idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    idx = np.asarray(idx, dtype=np.int64)
    v = ((1 + np.sqrt(1 + 8 * idx.astype(np.float64))) // 2).astype(np.int64)
    # float sqrt can be off by one near perfect squares
    v -= (v * (v - 1) // 2 > idx).astype(np.int64)
    v += ((v + 1) * v // 2 <= idx).astype(np.int64)
    return idx - v * (v - 1) // 2, v


def num_pairs(n: int) -> int:
    return n * (n - 1) // 2


def ceil_log2(x: int) -> int:
    """``ceil(log2(x))`` for x >= 1, computed exactly on integers."""
    if x < 1:
        raise ValueError("ceil_log2 needs x >= 1")
    return (x - 1).bit_length()


class Graph:
    """Undirected simple graph with optional non-negative integer weights.

    ``src``/``dst``/``weight``/``index`` are parallel arrays over edges
    sorted by edge index. Adjacency is kept in CSR form (``indptr``,
    ``nbr``, ``eid``) where ``eid`` points back into the edge arrays.
    """

    def __init__(self, n: int, edges: Iterable[Sequence[int]] = (), weighted: bool | None = None):
        if n < 0:
            raise GraphError("vertex count must be non-negative")
        self.n = int(n)
        rows = [tuple(int(x) for x in e) for e in edges]
        if weighted is None:
            weighted = bool(rows) and all(len(r) >= 3 for r in rows)
        self.weighted = bool(weighted)
        if rows:
            arr_u = np.array([r[0] for r in rows], dtype=np.int64)
            arr_v = np.array([r[1] for r in rows], dtype=np.int64)
            arr_w = np.array([r[2] if len(r) >= 3 else 0 for r in rows], dtype=np.int64)
            if self.weighted and any(len(r) < 3 for r in rows):
                raise GraphError("weighted graph with an unweighted edge")
        else:
            arr_u = arr_v = arr_w = np.zeros(0, dtype=np.int64)
        self._set_edges(arr_u, arr_v, arr_w if self.weighted else None)

    @classmethod
    def from_arrays(cls, n: int, u: np.ndarray, v: np.ndarray, weight: np.ndarray | None = None) -> "Graph":
        g = cls.__new__(cls)
        g.n = int(n)
        g.weighted = weight is not None
        g._set_edges(np.asarray(u, dtype=np.int64), np.asarray(v, dtype=np.int64),
                     None if weight is None else np.asarray(weight, dtype=np.int64))
        return g

    def _set_edges(self, u: np.ndarray, v: np.ndarray, w: np.ndarray | None) -> None:
        n = self.n
        if u.size:
            if (u == v).any():
                bad = int(u[u == v][0])
                raise GraphError(f"self-loop at vertex {bad}")
            if min(u.min(), v.min()) < 0 or max(u.max(), v.max()) >= n:
                raise GraphError("edge endpoint outside [0, n)")
            if w is not None and (w < 0).any():
                raise GraphError("negative edge weight")
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        idx = hi * (hi - 1) // 2 + lo
        order = np.argsort(idx, kind="stable")
        idx = idx[order]
        if idx.size > 1 and (np.diff(idx) == 0).any():
            raise GraphError("parallel edges are not supported")
        self.src = lo[order]
        self.dst = hi[order]
        self.index = idx
        self.weight = None if w is None else w[order]
        self._build_adjacency()

    def _build_adjacency(self) -> None:
        m = self.m
        ends = np.concatenate([self.src, self.dst])
        others = np.concatenate([self.dst, self.src])
        eids = np.concatenate([np.arange(m), np.arange(m)])
        order = np.lexsort((others, ends))
        self.nbr = others[order]
        self.eid = eids[order]
        counts = np.bincount(ends, minlength=self.n)
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    @property
    def m(self) -> int:
        return int(self.src.size)

    def degree(self, u: int | None = None):
        deg = np.diff(self.indptr)
        return deg if u is None else int(deg[u])

    def neighbors(self, u: int) -> np.ndarray:
        return self.nbr[self.indptr[u]:self.indptr[u + 1]]

    def incident(self, u: int) -> np.ndarray:
        """Edge ids (positions in the edge arrays) incident to ``u``."""
        return self.eid[self.indptr[u]:self.indptr[u + 1]]

    def edges(self) -> list[Edge]:
        if self.weight is None:
            return [Edge(int(a), int(b)) for a, b in zip(self.src, self.dst)]
        return [Edge(int(a), int(b), int(c)) for a, b, c in zip(self.src, self.dst, self.weight)]

    def edge_set(self) -> set[tuple[int, int]]:
        return set(zip(self.src.tolist(), self.dst.tolist()))

    def has_edge(self, u: int, v: int) -> bool:
        if u == v or not (0 <= u < self.n and 0 <= v < self.n):
            return False
        i = np.searchsorted(self.index, edge_index(u, v))
        return bool(i < self.m and self.index[i] == edge_index(u, v))

    def edge_position(self, u: int, v: int) -> int:
        """Position of edge (u, v) in the edge arrays; ``-1`` if absent."""
        if not self.has_edge(u, v):
            return -1
        return int(np.searchsorted(self.index, edge_index(u, v)))

    def weight_of(self, u: int, v: int) -> int:
        pos = self.edge_position(u, v)
        if pos < 0:
            raise GraphError(f"no edge ({u}, {v})")
        return 0 if self.weight is None else int(self.weight[pos])

    def subgraph(self, keep: np.ndarray) -> "Graph":
        """Spanning subgraph keeping the edges where the boolean mask is set."""
        keep = np.asarray(keep, dtype=bool)
        w = None if self.weight is None else self.weight[keep]
        return Graph.from_arrays(self.n, self.src[keep], self.dst[keep], w)

    def without_edges(self, pairs: Iterable[Sequence[int]]) -> "Graph":
        drop = np.zeros(self.m, dtype=bool)
        for p in pairs:
            pos = self.edge_position(int(p[0]), int(p[1]))
            if pos < 0:
                raise GraphError(f"edge ({p[0]}, {p[1]}) not in graph")
            drop[pos] = True
        return self.subgraph(~drop)

    def with_weights(self, weight: np.ndarray) -> "Graph":
        return Graph.from_arrays(self.n, self.src, self.dst, np.asarray(weight, dtype=np.int64))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        if self.n != other.n or self.weighted != other.weighted or self.m != other.m:
            return False
        same = np.array_equal(self.index, other.index)
        if self.weight is not None:
            same = same and np.array_equal(self.weight, other.weight)
        return bool(same)

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m}, weighted={self.weighted})"


# --------------------------------------------------------------------------
# generators

@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    params: tuple = ()
    weighted: bool = False

    def __str__(self) -> str:
        def fmt(p):
            if isinstance(p, (list, tuple)):
                return "".join(str(x) for x in p) if self.family == "scs_gadget" else ",".join(map(str, p))
            return str(p)
        body = ",".join(fmt(p) for p in self.params)
        return f"{self.family}({body})" + ("+w" if self.weighted else "")


_SPEC_RE = re.compile(r"^\s*([a-z_]+)\s*\((.*)\)\s*(\+w)?\s*$")


def parse_spec(text: str) -> GeneratorSpec:
    """Parse ``gnp(100,0.05)``, ``cycle(5)``, ``disjoint_cliques(5,6,7)``,
    ``scs_gadget(3,010,100)``; a trailing ``+w`` asks for random weights."""
    mt = _SPEC_RE.match(text)
    if not mt:
        raise GraphError(f"cannot parse generator spec {text!r}")
    family, body, w = mt.group(1), mt.group(2), mt.group(3)
    args = [a.strip() for a in body.split(",") if a.strip()]
    try:
        if family == "gnp":
            if len(args) != 2:
                raise GraphError("gnp takes (n, p)")
            params = (int(args[0]), float(args[1]))
        elif family in ("path", "cycle", "dumbbell", "complete"):
            if len(args) != 1:
                raise GraphError(f"{family} takes (n)")
            params = (int(args[0]),)
        elif family == "disjoint_cliques":
            params = (tuple(int(a) for a in args),)
        elif family == "scs_gadget":
            if len(args) != 3:
                raise GraphError("scs_gadget takes (b, X, Y)")
            params = (int(args[0]), tuple(int(c) for c in args[1]), tuple(int(c) for c in args[2]))
        else:
            raise GraphError(f"unknown generator family {family!r}")
    except ValueError as exc:
        raise GraphError(f"bad parameters in {text!r}: {exc}") from None
    return GeneratorSpec(family, params, weighted=bool(w))


def gnp(n: int, p: float, seed: int = 0) -> Graph:
    if not 0.0 <= p <= 1.0:
        raise GraphError(f"gnp edge probability {p} outside [0, 1]")
    if n < 0:
        raise GraphError("n must be non-negative")
    rng = np.random.default_rng(seed)
    npairs = num_pairs(n)
    if npairs == 0 or p == 0.0:
        return Graph(n)
    # geometric skipping keeps this O(m) instead of O(n^2)
    if p >= 0.25:
        keep = np.flatnonzero(rng.random(npairs) < p)
    else:
        chunks, pos = [], -1
        while True:
            gaps = rng.geometric(p, size=max(16, int(1.2 * p * (npairs - pos)) + 16))
            cand = pos + np.cumsum(gaps)
            chunks.append(cand[cand < npairs])
            if cand[-1] >= npairs:
                break
            pos = int(cand[-1])
        keep = np.concatenate(chunks)
    u, v = edges_from_index_array(keep)
    return Graph.from_arrays(n, u, v)


def path(n: int) -> Graph:
    if n < 1:
        raise GraphError("path needs n >= 1")
    a = np.arange(n - 1)
    return Graph.from_arrays(n, a, a + 1)


def cycle(n: int) -> Graph:
    if n < 3:
        raise GraphError("cycle needs n >= 3")
    a = np.arange(n)
    return Graph.from_arrays(n, a, (a + 1) % n)


def _clique_edges(offset: int, size: int) -> tuple[np.ndarray, np.ndarray]:
    iu, ju = np.triu_indices(size, k=1)
    return iu + offset, ju + offset


def complete(n: int) -> Graph:
    if n < 1:
        raise GraphError("complete graph needs n >= 1")
    u, v = _clique_edges(0, n)
    return Graph.from_arrays(n, u, v)


def disjoint_cliques(sizes: Sequence[int]) -> Graph:
    if not sizes or any(s < 1 for s in sizes):
        raise GraphError("clique sizes must be positive")
    us, vs, off = [], [], 0
    for s in sizes:
        u, v = _clique_edges(off, s)
        us.append(u)
        vs.append(v)
        off += s
    return Graph.from_arrays(off, np.concatenate(us), np.concatenate(vs))


def dumbbell(n: int) -> Graph:
    """Two cliques on n//2 vertices each joined by a single bridge."""
    if n < 4 or n % 2:
        raise GraphError("dumbbell needs an even n >= 4")
    h = n // 2
    u1, v1 = _clique_edges(0, h)
    u2, v2 = _clique_edges(h, h)
    u = np.concatenate([u1, u2, [h - 1]])
    v = np.concatenate([v1, v2, [h]])
    return Graph.from_arrays(n, u, v)


def scs_gadget(b: int, x: Sequence[int], y: Sequence[int]) -> tuple[Graph, Graph]:
    """Set-disjointness gadget on n = 2b+2 vertices.

    Vertex 0 is ``s``, 1 is ``t``, ``u_i = 2+i`` and ``v_i = 2+b+i``.
    G holds (s,t), (u_i,v_i), (s,u_i), (v_i,t). H keeps (s,t) and every
    (u_i,v_i); it has (s,u_i) iff x[i] == 0 and (v_i,t) iff y[i] == 0.
    """
    if b < 1:
        raise GraphError("scs_gadget needs b >= 1")
    if len(x) != b or len(y) != b:
        raise GraphError("scs_gadget vectors must have length b")
    if any(c not in (0, 1) for c in list(x) + list(y)):
        raise GraphError("scs_gadget vectors must be 0/1")
    s, t = 0, 1
    g_edges = [(s, t)]
    h_edges = [(s, t)]
    for i in range(b):
        ui, vi = 2 + i, 2 + b + i
        g_edges += [(ui, vi), (s, ui), (vi, t)]
        h_edges.append((ui, vi))
        if x[i] == 0:
            h_edges.append((s, ui))
        if y[i] == 0:
            h_edges.append((vi, t))
    n = 2 * b + 2
    return Graph(n, g_edges), Graph(n, h_edges)


def random_weights(g: Graph, seed: int, high: int = 2**32) -> Graph:
    """Attach i.i.d. integer weights in [1, high); ties are broken by edge
    index wherever weights are compared."""
    rng = np.random.default_rng(seed)
    return g.with_weights(rng.integers(1, high, size=g.m, dtype=np.int64))


def generate(spec: GeneratorSpec | str, seed: int = 0):
    """Build the graph for ``spec``. ``scs_gadget`` returns ``(G, H)``."""
    if isinstance(spec, str):
        spec = parse_spec(spec)
    fam, p = spec.family, spec.params
    if fam == "gnp":
        g = gnp(p[0], p[1], seed)
    elif fam == "path":
        g = path(p[0])
    elif fam == "cycle":
        g = cycle(p[0])
    elif fam == "complete":
        g = complete(p[0])
    elif fam == "disjoint_cliques":
        g = disjoint_cliques(p[0])
    elif fam == "dumbbell":
        g = dumbbell(p[0])
    elif fam == "scs_gadget":
        G, H = scs_gadget(*p)
        if spec.weighted:
            G = random_weights(G, seed)
            H = _restrict_weights(G, H)
        return G, H
    else:
        raise GraphError(f"unknown generator family {fam!r}")
    if spec.weighted:
        g = random_weights(g, seed + 0x5EED)
    return g


def _restrict_weights(g: Graph, h: Graph) -> Graph:
    pos = np.searchsorted(g.index, h.index)
    return h.with_weights(g.weight[pos])


# --------------------------------------------------------------------------
# random vertex partition

@dataclass
class Partition:
    home: np.ndarray
    k: int
    seed: int | None = None
    _members: list[np.ndarray] | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return int(self.home.size)

    def machine_of(self, v: int) -> int:
        return int(self.home[v])

    def members(self, machine: int) -> np.ndarray:
        if self._members is None:
            order = np.argsort(self.home, kind="stable")
            counts = np.bincount(self.home, minlength=self.k)
            self._members = np.split(order, np.cumsum(counts)[:-1])
        return self._members[machine]

    def loads(self) -> np.ndarray:
        return np.bincount(self.home, minlength=self.k)


def rvp_partition(g: Graph | int, k: int, seed: int) -> Partition:
    """Assign every vertex i.i.d. uniformly to one of ``k`` machines."""
    n = g if isinstance(g, int) else g.n
    if k < 1:
        raise GraphError("need at least one machine")
    if k > n:
        warnings.warn(f"k={k} exceeds n={n}; the model assumes n >= k", stacklevel=2)
    rng = np.random.default_rng(seed)
    return Partition(rng.integers(0, k, size=n).astype(np.int64), k, seed)


# --------------------------------------------------------------------------
# text format: "n m [weighted]" then m lines "u v [w]"

def write_graph(g: Graph, dest) -> None:
    lines = [f"{g.n} {g.m}" + (" weighted" if g.weighted else "")]
    if g.weighted:
        lines += [f"{a} {b} {c}" for a, b, c in zip(g.src.tolist(), g.dst.tolist(), g.weight.tolist())]
    else:
        lines += [f"{a} {b}" for a, b in zip(g.src.tolist(), g.dst.tolist())]
    text = "\n".join(lines) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        Path(dest).write_text(text)


def read_graph(source) -> Graph:
    text = source.read() if hasattr(source, "read") else Path(source).read_text()
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise GraphError("empty graph file")
    head = rows[0]
    if len(head) not in (2, 3) or (len(head) == 3 and head[2] != "weighted"):
        raise GraphError(f"bad header line {' '.join(head)!r}")
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError:
        raise GraphError(f"bad header line {' '.join(head)!r}") from None
    weighted = len(head) == 3
    body = rows[1:]
    if len(body) != m:
        raise GraphError(f"header announces {m} edges, found {len(body)}")
    width = 3 if weighted else 2
    edges = []
    for ln, r in enumerate(body, start=2):
        if len(r) != width:
            raise GraphError(f"line {ln}: expected {width} fields")
        try:
            vals = [int(x) for x in r]
        except ValueError:
            raise GraphError(f"line {ln}: non-integer field") from None
        if vals[0] >= vals[1]:
            raise GraphError(f"line {ln}: edges must be written with u < v")
        edges.append(vals)
    return Graph(n, edges, weighted=weighted)
