"""Applications of the connectivity engine: minimum spanning tree, a
sampling-based min-cut estimate and the graph verification problems.

All sub-runs of one call share a single :class:`Network`, so the metrics
returned cover the whole computation.
"""

from __future__ import annotations

import math
import shlex
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .connectivity import Config, ConnectivityRun
from .graph import Graph, GraphError, Partition, ceil_log2, read_graph
from .randomness import broadcast_seed, field_prime, make_hash
from .sim import Network, RoundMetrics


def _network(n: int, k: int, cfg: Config) -> Network:
    return Network(k, max(n, 2), c_B=cfg.c_B, trace=cfg.trace, keep_cells=cfg.keep_cells)


def _stream(cfg: Config, name: int) -> np.random.Generator:
    # independent named streams of machine 0's private randomness
    return np.random.default_rng([cfg.aseed, name])


_MST, _MINCUT, _VERIFY = 1, 2, 3


# -- minimum spanning tree -----------------------------------------------------

@dataclass
class MSTResult:
    edges: set
    total_weight: int
    outputting_machine: dict
    spanning: bool
    phases: int
    metrics: RoundMetrics


def run_mst(g: Graph, part: Partition, cfg: Config | None = None) -> MSTResult:
    """Boruvka over minimum-weight outgoing edges found by repeated
    thresholded resampling. On a disconnected input the spanning forest is
    returned with ``spanning`` False."""
    cfg = cfg or Config()
    if not g.weighted:
        raise GraphError("MST needs a weighted graph")
    runner = ConnectivityRun(g, part, cfg, net=_network(g.n, part.k, cfg),
                             rng=_stream(cfg, _MST), weighted_mwoe=True)
    res = runner.run()
    edges, owner, total = set(), {}, 0
    for e, m in zip(runner.merge_edges, runner.merge_owner):
        if e in edges:
            continue
        edges.add(e)
        owner[e] = m
        total += g.weight_of(*e)
    return MSTResult(edges, total, owner, len(edges) == g.n - 1 or g.n == 0, res.phases,
                     runner.net.snapshot_metrics())


# -- min-cut estimate ------------------------------------------------------------

@dataclass
class MinCutEstimate:
    estimate: int
    j_star: int
    trials_per_level: int
    disconnected: bool = False
    levels_run: int = 0
    metrics: RoundMetrics | None = None


def _is_connected(g: Graph, part: Partition, cfg: Config, net: Network, rng) -> bool:
    runner = ConnectivityRun(g, part, cfg, net=net, rng=rng)
    runner.run()
    return runner.count_components() == 1


def sample_edges(g: Graph, net: Network, rng, j: int) -> Graph:
    """Keep each edge with probability about 2**-j; the decision hashes the
    edge index with a broadcast seed, so both endpoints agree for free."""
    if j == 0:
        return g
    p = field_prime(g.n)
    d = 2 * max(1, ceil_log2(max(g.n, 2)))
    seed, _ = broadcast_seed(net, d * p.bit_length(), rng)
    h = make_hash(seed, d, p, p)
    keep = np.asarray(h.raw(g.index)) < (p >> j)
    return g.subgraph(keep)


def run_mincut_estimate(g: Graph, part: Partition, cfg: Config | None = None,
                        c1: int | None = None, c2: int = 3) -> MinCutEstimate:
    """Sample at rates 1, 1/2, 1/4, ... and record the last rate at which
    every trial stayed connected; a level stops at its first failure."""
    cfg = cfg or Config()
    n = g.n
    logn = max(1, ceil_log2(max(n, 2)))
    c1 = c1 if c1 is not None else 3 * logn
    net = _network(n, part.k, cfg)
    rng = _stream(cfg, _MINCUT)
    lnn = max(1, math.ceil(math.log(max(n, 2))))
    if n <= 1:
        return MinCutEstimate(0, 0, c1, disconnected=True, metrics=net.snapshot_metrics())
    j_star, j = -1, 0
    # beyond log2(m)+1 the sample is almost surely empty
    max_level = ceil_log2(max(g.m, 1)) + 2
    while j <= max_level:
        ok = True
        trials = 1 if j == 0 else c1  # level 0 keeps every edge
        for _ in range(trials):
            sub = sample_edges(g, net, rng, j)
            if not _is_connected(sub, part, cfg, net, rng):
                ok = False
                break
        if not ok:
            break
        j_star = j
        j += 1
    if j_star < 0:
        return MinCutEstimate(0, 0, c1, disconnected=True, levels_run=1, metrics=net.snapshot_metrics())
    return MinCutEstimate(c2 * (1 << j_star) * lnn, j_star, c1, levels_run=j + 1,
                          metrics=net.snapshot_metrics())


# -- verification ------------------------------------------------------------------

PROBLEMS = ("scs", "cycle", "e_cycle", "st_conn", "cut", "edge_on_all_paths", "st_cut", "bipartite")


@dataclass
class VerificationQuery:
    problem: str
    g: Graph
    h: Graph | None = None
    s: int | None = None
    t: int | None = None
    edge: tuple[int, int] | None = None

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise GraphError(f"unknown problem {self.problem!r}")
        g = self.g
        if self.h is not None:
            if self.h.n != g.n:
                raise GraphError("subgraph has a different vertex count")
            if not np.isin(self.h.index, g.index).all():
                raise GraphError("subgraph is not contained in the graph")
        if self.problem in ("scs", "cut", "st_cut") and self.h is None:
            raise GraphError(f"{self.problem} needs a subgraph")
        if self.problem in ("st_conn", "edge_on_all_paths", "st_cut"):
            if self.s is None or self.t is None:
                raise GraphError(f"{self.problem} needs s and t")
            if not (0 <= self.s < g.n and 0 <= self.t < g.n):
                raise GraphError("s or t outside the vertex set")
            if self.s == self.t:
                raise GraphError("s and t must differ")
        if self.problem in ("edge_on_all_paths", "e_cycle"):
            if self.edge is None:
                raise GraphError(f"{self.problem} needs an edge")
            host = self.h if (self.problem == "e_cycle" and self.h is not None) else g
            if not host.has_edge(*self.edge):
                raise GraphError(f"edge {self.edge} not in the graph")


@dataclass
class VerifyResult:
    answer: bool
    metrics: RoundMetrics
    components: dict = field(default_factory=dict)


def parse_query(text: str, base: Path | None = None) -> VerificationQuery:
    """Parse ``problem=TAG graph=FILE [subgraph=FILE] [s=ID t=ID] [u=ID v=ID]``.
    ``cut=FILE`` is accepted as an alias of ``subgraph=FILE``."""
    fields = {}
    for tok in shlex.split(text, comments=True):
        if "=" not in tok:
            raise GraphError(f"expected key=value, got {tok!r}")
        key, val = tok.split("=", 1)
        fields[key.strip()] = val.strip()

    def load(name):
        p = Path(fields[name])
        if base is not None and not p.is_absolute():
            p = base / p
        return read_graph(p)

    if "problem" not in fields or "graph" not in fields:
        raise GraphError("query needs problem= and graph=")
    if "cut" in fields and "subgraph" not in fields:
        fields["subgraph"] = fields["cut"]
    try:
        q = VerificationQuery(
            problem=fields["problem"], g=load("graph"),
            h=load("subgraph") if "subgraph" in fields else None,
            s=int(fields["s"]) if "s" in fields else None,
            t=int(fields["t"]) if "t" in fields else None,
            edge=(int(fields["u"]), int(fields["v"])) if "u" in fields and "v" in fields else None)
    except ValueError as exc:
        raise GraphError(f"bad query value: {exc}") from None
    q.validate()
    return q


class _Verifier:
    def __init__(self, q: VerificationQuery, part: Partition, cfg: Config):
        self.q = q
        self.part = part
        self.cfg = cfg
        self.net = _network(q.g.n, part.k, cfg)
        self.rng = _stream(cfg, _VERIFY)
        self.logn = max(1, ceil_log2(max(q.g.n, 2)))
        self.counts: dict = {}

    def components(self, g: Graph, part: Partition | None = None) -> tuple[np.ndarray, int]:
        runner = ConnectivityRun(g, part or self.part, self.cfg, net=self.net, rng=self.rng)
        runner.run()
        return runner.labels, runner.count_components()

    def same_label(self, labels: np.ndarray, a: int, b: int) -> bool:
        """Home machines of a and b report their labels to machine 0."""
        home = self.part.home
        for v in (a, b):
            self.net.send(int(home[v]), 0, int(labels[v]), self.logn)
        got = self.net.exchange()[0]
        return got[0][1] == got[1][1]

    def edge_count(self, g: Graph) -> int:
        """Each machine counts the edges whose smaller endpoint it hosts."""
        per = np.bincount(self.part.home[g.src], minlength=self.part.k)
        for m in range(1, self.part.k):
            self.net.send(m, 0, int(per[m]), 2 * self.logn)
        got = self.net.exchange()[0]
        return int(per[0]) + sum(c for _, c in got)

    def run(self) -> bool:
        q = self.q
        tag = q.problem
        if tag == "scs":
            _, cc = self.components(q.h)
            return cc == 1
        if tag == "cut":
            rest = q.g.subgraph(~np.isin(q.g.index, q.h.index))
            _, cc = self.components(rest)
            return cc > 1
        if tag == "st_conn":
            labels, _ = self.components(q.g)
            return self.same_label(labels, q.s, q.t)
        if tag == "edge_on_all_paths":
            labels, _ = self.components(q.g.without_edges([q.edge]))
            return not self.same_label(labels, q.s, q.t)
        if tag == "st_cut":
            rest = q.g.subgraph(~np.isin(q.g.index, q.h.index))
            labels, _ = self.components(rest)
            return not self.same_label(labels, q.s, q.t)
        if tag == "e_cycle":
            host = q.h if q.h is not None else q.g
            labels, _ = self.components(host.without_edges([q.edge]))
            return self.same_label(labels, *q.edge)
        if tag == "cycle":
            host = q.h if q.h is not None else q.g
            _, cc = self.components(host)
            m = self.edge_count(host)
            self.counts.update(cc=cc, m=m)
            return m > host.n - cc
        if tag == "bipartite":
            _, cc = self.components(q.g)
            dc = double_cover(q.g)
            home2 = np.concatenate([self.part.home, self.part.home])
            _, cc2 = self.components(dc, Partition(home2, self.part.k))
            self.counts.update(cc=cc, cc_cover=cc2)
            return cc2 == 2 * cc
        raise GraphError(f"unknown problem {tag!r}")


def double_cover(g: Graph) -> Graph:
    """Vertex v becomes v and v+n; edge (u, v) becomes (u, v+n), (v, u+n)."""
    n = g.n
    u = np.concatenate([g.src, g.dst])
    v = np.concatenate([g.dst + n, g.src + n])
    return Graph.from_arrays(2 * n, u, v)


def verify(q: VerificationQuery, part: Partition, cfg: Config | None = None) -> VerifyResult:
    cfg = cfg or Config()
    q.validate()
    if part.n != q.g.n:
        raise GraphError("partition and graph disagree on n")
    v = _Verifier(q, part, cfg)
    ans = v.run()
    return VerifyResult(bool(ans), v.net.snapshot_metrics(), v.counts)
