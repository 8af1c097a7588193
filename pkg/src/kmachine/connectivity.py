"""Boruvka-style connectivity over the simulated k-machine network.

Each phase:

1. machine 0 broadcasts seeds for a fresh sketch matrix and proxy hash;
2. every machine sums the sketches of its component parts and ships one
   part sketch per component to the component's proxy ``h(label)``;
3. proxies add the part sketches and sample an outgoing edge, then ask the
   home machine of the edge's far endpoint to confirm the edge and report
   that endpoint's label;
4. if no component found an edge the run stops; otherwise every component
   draws a rank and points at its sampled neighbour iff the neighbour
   ranks higher (DRR forest);
5. trees are merged level by level from the leaves: in each iteration a
   fresh proxy of every current leaf tells all machines holding a part of
   the leaf the parent's label, and they relabel locally.

Vertices never move; only labels change. Every merge follows a confirmed
graph edge, so equal labels always imply connectivity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, Partition, ceil_log2, edges_from_index_array
from .randomness import (HashFunction, RankFunction, broadcast_seed, draw_rank,
                         field_prime, make_hash, make_rank_function, rank_greater)
from .sim import Network, RoundMetrics
from .sketch import make_sketch_spec, query_many, sketch_groups, sketch_seed_bits, weight_keys


@dataclass
class Config:
    seed: int = 0
    aseed: int = 0
    c_B: int = 4
    c_R: int = 3
    c_d: int = 5
    phase_cap: int | None = None
    trace: bool = False
    keep_cells: bool = False


@dataclass
class DRRForest:
    parent: dict = field(default_factory=dict)
    rank: dict = field(default_factory=dict)
    edge: dict = field(default_factory=dict)
    ties: int = 0

    @property
    def nodes(self) -> set:
        return set(self.rank) | set(self.parent) | set(self.parent.values())

    @property
    def roots(self) -> set:
        return {c for c in self.nodes if c not in self.parent}

    def root_of(self, c):
        while c in self.parent:
            c = self.parent[c]
        return c

    def depths(self) -> dict:
        memo: dict = {}
        for c in self.nodes:
            chain = []
            x = c
            while x in self.parent and x not in memo:
                chain.append(x)
                x = self.parent[x]
            base = memo.get(x, 0)
            for y in reversed(chain):
                base += 1
                memo[y] = base
            memo.setdefault(c, base if not chain else memo[c])
        return memo

    def depth(self) -> int:
        d = self.depths()
        return max(d.values(), default=0)

    def levels(self) -> list[list]:
        """Non-root nodes grouped by merge iteration: a node merges once all
        of its children have merged, i.e. in iteration height+1."""
        children: dict = {}
        for c, par in self.parent.items():
            children.setdefault(par, []).append(c)
        height: dict = {}

        def h(c):
            if c in height:
                return height[c]
            stack = [(c, False)]
            while stack:
                x, done = stack.pop()
                if done:
                    height[x] = 1 + max((height[y] for y in children.get(x, ())), default=-1)
                    continue
                if x in height:
                    continue
                stack.append((x, True))
                stack.extend((y, False) for y in children.get(x, ()) if y not in height)
            return height[c]

        out: dict = {}
        for c in self.parent:
            out.setdefault(h(c), []).append(c)
        return [sorted(out[i]) for i in sorted(out)]


def build_drr(out_edges: dict, ranks: dict) -> DRRForest:
    """Attach each component to its sampled neighbour iff the neighbour has
    the larger (rank, label). ``out_edges`` maps component -> neighbour
    component or None; ``ranks`` must cover every component mentioned."""
    forest = DRRForest(rank=dict(ranks))
    for c, nb in out_edges.items():
        if nb is None:
            continue
        if nb == c:
            raise ValueError(f"component {c} sampled an internal edge")
        if ranks[nb] == ranks[c]:
            forest.ties += 1
        if rank_greater(ranks[nb], nb, ranks[c], c):
            forest.parent[c] = nb
    return forest


def merge_drr(forest: DRRForest, labels: np.ndarray) -> np.ndarray:
    """Sequential reference: relabel every vertex with its tree root."""
    labels = np.asarray(labels).copy()
    for level in forest.levels():
        for c in level:
            labels[labels == c] = forest.parent[c]
    return labels


def check_termination(found: dict) -> bool:
    """True when no component reported an outgoing edge."""
    return all(v is None for v in found.values())


@dataclass
class ConnectivityResult:
    labels: np.ndarray
    metrics: RoundMetrics
    phases: int
    drr_depths: list
    merge_edges: list
    hit_cap: bool = False
    components: int | None = None

    @property
    def rounds(self) -> int:
        return self.metrics.rounds_elapsed

    @property
    def max_drr_depth(self) -> int:
        return max(self.drr_depths, default=0)


class ConnectivityRun:
    """One execution of the algorithm; state is split per machine where it
    matters (vertex labels live with their home machine, DRR state with the
    component's proxy)."""

    def __init__(self, g: Graph, part: Partition, cfg: Config | None = None,
                 net: Network | None = None, rng: np.random.Generator | None = None,
                 weighted_mwoe: bool = False):
        self.g = g
        self.part = part
        self.cfg = cfg or Config()
        self.n = g.n
        self.k = part.k
        if part.n != g.n:
            raise ValueError("partition and graph disagree on n")
        self.net = net or Network(self.k, max(self.n, 2), c_B=self.cfg.c_B,
                                  trace=self.cfg.trace, keep_cells=self.cfg.keep_cells)
        self.rng = rng if rng is not None else np.random.default_rng([self.cfg.aseed, 0])
        self.p = field_prime(self.n)
        self.logn = max(1, ceil_log2(max(self.n, 2)))
        self.home = part.home
        self.labels = np.arange(self.n, dtype=np.int64)
        self.phase = 0
        self.rho = 0
        self.drr_depths: list[int] = []
        self.merge_edges: list[tuple[int, int]] = []
        self.merge_owner: list[int] = []
        self.proxy_d = max(1, -(-self.n * self.logn // self.k))
        self.sketch_d = self.cfg.c_d * self.logn
        self.weighted_mwoe = weighted_mwoe
        self._wkeys = weight_keys(g) if weighted_mwoe else None
        self._rankfn: RankFunction | None = None
        self.sampled_edges: list[tuple[int, int]] = []

    # -- shared randomness -------------------------------------------------------

    def fresh_proxy_hash(self) -> HashFunction:
        """h_{j,rho} for the next iteration rho of the current phase."""
        self.rho += 1
        if self.k == 1:
            return HashFunction(np.zeros(1, dtype=np.int64), self.p, 1)
        width = self.p.bit_length()
        seed, _ = broadcast_seed(self.net, self.proxy_d * width, self.rng)
        return make_hash(seed, self.proxy_d, self.k, self.p)

    def fresh_sketch_spec(self, tag: tuple):
        seed, _ = broadcast_seed(self.net, sketch_seed_bits(self.n, self.cfg.c_R, self.cfg.c_d), self.rng)
        return make_sketch_spec(seed, self.n, tag=tag, c_R=self.cfg.c_R, c_d=self.cfg.c_d)

    def rank_function(self) -> RankFunction:
        if self._rankfn is None:
            width = self.p.bit_length()
            seed, _ = broadcast_seed(self.net, 2 * self.sketch_d * width, self.rng)
            self._rankfn = make_rank_function(seed, self.sketch_d, self.n, self.p)
        return self._rankfn

    @staticmethod
    def proxies(h: HashFunction, labels: np.ndarray) -> np.ndarray:
        labels = np.asarray(labels, dtype=np.int64)
        if h.range == 1 or labels.size == 0:
            return np.zeros(labels.size, dtype=np.int64)
        uniq, inv = np.unique(labels, return_inverse=True)
        return np.asarray(h(uniq), dtype=np.int64).reshape(-1)[inv]

    # -- small helpers ------------------------------------------------------------

    def parts(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(part of each vertex, machine of each part, label of each part)."""
        key = self.home * self.n + self.labels
        uniq, inv = np.unique(key, return_inverse=True)
        return inv.astype(np.int64), uniq // self.n, uniq % self.n

    def global_or(self, flags: np.ndarray) -> bool:
        """Every machine reports one bit to machine 0, which broadcasts the OR."""
        net = self.net
        for m in range(1, self.k):
            net.send(m, 0, bool(flags[m]), 1)
        got = net.exchange()
        result = bool(flags[0]) or any(bit for _, bit in got[0])
        for m in range(1, self.k):
            net.send(0, m, result, 1)
        net.exchange()
        return result

    # -- edge selection -----------------------------------------------------------

    def aggregate_and_query(self, h: HashFunction, spec, part_of, part_machine, part_label,
                            active_parts: np.ndarray | None = None,
                            thresholds: np.ndarray | None = None) -> dict:
        """Ship part sketches to proxies and decode one edge per component.

        Returns {label: (proxy, edge index, sign) or None} for every
        component that had a part in the aggregation.
        """
        net = self.net
        group = part_of if active_parts is None else np.where(active_parts[part_of], part_of, -1)
        nparts = part_machine.size
        sk = sketch_groups(self.g, group, nparts, spec, thresholds=thresholds)
        proxy_of_part = self.proxies(h, part_label)
        sel = np.arange(nparts) if active_parts is None else np.flatnonzero(active_parts)
        bits = spec.size_bits
        for pid in sel.tolist():
            net.send(int(part_machine[pid]), int(proxy_of_part[pid]), (int(part_label[pid]), sk[pid]), bits)
        inboxes = net.exchange()
        found: dict = {}
        for q in range(self.k):
            box = inboxes[q]
            if not box:
                continue
            labs = np.fromiter((lab for _, (lab, _) in box), dtype=np.int64, count=len(box))
            stack = np.stack([s for _, (_, s) in box])
            order = np.argsort(labs, kind="stable")
            labs, stack = labs[order], stack[order]
            uniq, starts = np.unique(labs, return_index=True)
            summed = np.add.reduceat(stack, starts, axis=0) % spec.p
            idx, sign = query_many(summed, spec)
            for lab, i, s in zip(uniq.tolist(), idx.tolist(), sign.tolist()):
                found[lab] = None if i < 0 else (q, i, s)
        return found

    def confirm(self, found: dict) -> dict:
        """Proxies ask the far endpoint's home machine to check the sampled
        edge and report the neighbour label (and weight).

        Returns {label: (proxy, inside, outside, neighbour label, weight key, index)}
        for confirmed edges; rejected samples are dropped.
        """
        net, g = self.net, self.g
        hits = [(lab, v) for lab, v in found.items() if v is not None]
        if not hits:
            return {}
        labs = np.array([h[0] for h in hits], dtype=np.int64)
        prox = np.array([h[1][0] for h in hits], dtype=np.int64)
        idx = np.array([h[1][1] for h in hits], dtype=np.int64)
        sign = np.array([h[1][2] for h in hits], dtype=np.int64)
        x, y = edges_from_index_array(idx)
        inside = np.where(sign > 0, x, y)
        outside = np.where(sign > 0, y, x)
        dest = self.home[outside]
        for t in range(labs.size):
            net.send(int(prox[t]), int(dest[t]), (int(labs[t]), int(idx[t]), int(inside[t]), int(outside[t])),
                     4 * self.logn)
        inboxes = net.exchange()
        wbits = 64 if self.weighted_mwoe else 0
        for m in range(self.k):
            for src, (lab, i, a, b) in inboxes[m]:
                pos = np.searchsorted(g.index, i)
                real = pos < g.m and g.index[pos] == i
                nb = int(self.labels[b])
                ok = bool(real) and nb != lab
                wk = int(self._wkeys[pos]) if (ok and self._wkeys is not None) else None
                net.send(m, src, (lab, ok, a, b, nb, wk, i), 2 * self.logn + 1 + wbits)
        inboxes = net.exchange()
        out: dict = {}
        for q in range(self.k):
            for _, (lab, ok, a, b, nb, wk, i) in inboxes[q]:
                if ok:
                    out[lab] = (q, a, b, nb, wk, i)
                else:
                    self.net.metrics.bump("rejected_samples")
        return out

    def select_outgoing_edges(self, part_info=None) -> tuple[dict, dict]:
        """One edge-selection round for all current components.

        Returns (sampled, confirmed) where ``sampled`` maps every component
        label to its decoded sample (or None) and ``confirmed`` holds the
        verified inter-component edges.
        """
        if part_info is None:
            part_info = self.parts()
        part_of, part_machine, part_label = part_info
        spec = self.fresh_sketch_spec(tag=(self.phase, self.rho + 1))
        h = self.fresh_proxy_hash()
        found = self.aggregate_and_query(h, spec, part_of, part_machine, part_label)
        if self.weighted_mwoe:
            found = self._eliminate(found, h, part_of, part_machine, part_label)
        confirmed = self.confirm(found)
        return found, confirmed

    def _eliminate(self, found, h, part_of, part_machine, part_label) -> dict:
        """Drive each component's sample down to its lightest outgoing edge:
        confirm the current sample to learn its weight, tell every part the
        threshold, and resample from sketches holding only strictly lighter
        edges. An empty resample certifies the current edge as the lightest
        and retires the component."""
        t = 2 * self.logn
        live = {lab: v for lab, v in found.items() if v is not None}
        for rep in range(t):
            conf = self.confirm(live)
            if not conf:
                break
            thr_by_label = {lab: c[4] - 1 for lab, c in conf.items()}
            # proxy -> every machine that holds a part of the component
            active = np.array([lab in thr_by_label for lab in part_label.tolist()])
            prox = self.proxies(h, part_label)
            for pid in np.flatnonzero(active).tolist():
                lab = int(part_label[pid])
                self.net.send(int(prox[pid]), int(part_machine[pid]), (lab, thr_by_label[lab]), self.logn + 64)
            inboxes = self.net.exchange()
            thr_vertex = np.full(self.n, -1, dtype=np.int64)
            for m in range(self.k):
                got = dict((lab, thr) for _, (lab, thr) in inboxes[m])
                mine = np.flatnonzero(self.home == m)
                for v, lab in zip(mine.tolist(), self.labels[mine].tolist()):
                    if lab in got:
                        thr_vertex[v] = got[lab]
            spec = self.fresh_sketch_spec(tag=(self.phase, self.rho, rep))
            again = self.aggregate_and_query(h, spec, part_of, part_machine, part_label,
                                             active_parts=active, thresholds=thr_vertex)
            live = {}
            for lab in thr_by_label:
                res = again.get(lab)
                if res is not None:
                    found[lab] = live[lab] = res
                else:
                    # nothing lighter: keep the confirmed sample
                    q, a, b, nb, wk, i = conf[lab]
                    found[lab] = (q, i, 1 if a < b else -1)
            if not live:
                break
        if live:
            self.net.metrics.bump("unfinished_eliminations", len(live))
        return found

    # -- merging ------------------------------------------------------------------

    def build_forest(self, confirmed: dict) -> tuple[DRRForest, dict, set]:
        """Selection proxies decide parent links locally (ranks come from the
        shared rank function) and notify the DRR state holders. Returns the
        forest, holder of each component and the components with children."""
        rf = self.rank_function()
        labs = np.array(sorted(confirmed), dtype=np.int64)
        if labs.size == 0:
            return DRRForest(), {}, set()
        nbs = np.array([confirmed[c][3] for c in labs.tolist()], dtype=np.int64)
        r_self = draw_rank(rf, labs, self.phase)
        r_nb = draw_rank(rf, nbs, self.phase)
        up = rank_greater(r_nb, nbs, r_self, labs)
        forest = DRRForest()
        for c, r in zip(labs.tolist(), np.atleast_1d(r_self).tolist()):
            forest.rank[c] = int(r)
        ties = int(np.sum(np.asarray(r_nb) == np.asarray(r_self)))
        forest.ties = ties
        if ties:
            self.net.metrics.bump("rank_ties", ties)
        holder_h = self.fresh_proxy_hash()
        parents = labs[up]
        children_of = nbs[up]
        if parents.size == 0:
            return forest, {}, set()
        hold_self = self.proxies(holder_h, parents)
        hold_par = self.proxies(holder_h, children_of)
        for t in range(parents.size):
            c, par = int(parents[t]), int(children_of[t])
            q = confirmed[c][0]
            a, b = confirmed[c][1], confirmed[c][2]
            self.net.send(q, int(hold_self[t]), ("parent", c, par, (min(a, b), max(a, b)), q), 4 * self.logn)
            self.net.send(q, int(hold_par[t]), ("child", par, c), 2 * self.logn)
        inboxes = self.net.exchange()
        holder_of: dict = {}
        has_children: set = set()
        for m in range(self.k):
            for _, msg in inboxes[m]:
                if msg[0] == "parent":
                    _, c, par, e, owner = msg
                    forest.parent[c] = par
                    forest.edge[c] = (e, owner)
                    holder_of[c] = m
                else:
                    has_children.add(msg[1])
        self._holder_hash = holder_h
        return forest, holder_of, has_children

    def merge_forest(self, forest: DRRForest, holder_of: dict) -> int:
        """Level-wise merging from the leaves; returns iterations used."""
        net = self.net
        if not forest.parent:
            return 0
        holder_h = self._holder_hash
        pending: dict = {}
        for c, par in forest.parent.items():
            pending[par] = pending.get(par, 0) + 1
        merged: set = set()
        iterations = 0
        while True:
            flags = np.zeros(self.k, dtype=bool)
            for c in forest.parent:
                if c not in merged:
                    flags[holder_of[c]] = True
            if not self.global_or(flags):
                break
            iterations += 1
            h = self.fresh_proxy_hash()
            leaves = [c for c in forest.parent if c not in merged and pending.get(c, 0) == 0]
            leaf_arr = np.array(leaves, dtype=np.int64)
            leaf_proxy = self.proxies(h, leaf_arr)
            for c, q in zip(leaves, leaf_proxy.tolist()):
                net.send(holder_of[c], q, ("leaf", c, forest.parent[c]), 2 * self.logn)
            # every machine announces the labels it holds to their fresh proxies
            _, part_machine, part_label = self.parts()
            part_proxy = self.proxies(h, part_label)
            for m, lab, q in zip(part_machine.tolist(), part_label.tolist(), part_proxy.tolist()):
                net.send(m, q, ("here", lab), self.logn)
            inboxes = net.exchange()
            for q in range(self.k):
                leaf_here = {}
                for src, msg in inboxes[q]:
                    if msg[0] == "leaf":
                        leaf_here[msg[1]] = msg[2]
                for src, msg in inboxes[q]:
                    if msg[0] == "here" and msg[1] in leaf_here:
                        net.send(q, src, ("relabel", msg[1], leaf_here[msg[1]]), 2 * self.logn)
            hold_par = self.proxies(holder_h, np.array([forest.parent[c] for c in leaves], dtype=np.int64))
            for c, hp in zip(leaves, hold_par.tolist()):
                net.send(holder_of[c], hp, ("done", forest.parent[c]), self.logn)
                merged.add(c)
            inboxes = net.exchange()
            for m in range(self.k):
                relabel = {}
                for _, msg in inboxes[m]:
                    if msg[0] == "relabel":
                        relabel[msg[1]] = msg[2]
                    else:
                        pending[msg[1]] -= 1
                if relabel:
                    mine = np.flatnonzero(self.home == m)
                    old = self.labels[mine]
                    keys = np.array(sorted(relabel), dtype=np.int64)
                    vals = np.array([relabel[x] for x in keys.tolist()], dtype=np.int64)
                    pos = np.searchsorted(keys, old)
                    pos = np.minimum(pos, keys.size - 1)
                    hit = keys[pos] == old
                    self.labels[mine[hit]] = vals[pos[hit]]
        return iterations

    # -- driver ---------------------------------------------------------------------

    def phase_cap(self) -> int:
        return self.cfg.phase_cap if self.cfg.phase_cap is not None else 12 * self.logn

    def run(self) -> ConnectivityResult:
        net = self.net
        cap = self.phase_cap()
        hit_cap = False
        while True:
            if self.phase >= cap:
                hit_cap = True
                break
            self.phase += 1
            self.rho = 0
            net.begin_phase()
            n_comp = int(np.unique(self.labels).size)
            found, confirmed = self.select_outgoing_edges()
            flags = np.zeros(self.k, dtype=bool)
            for lab, c in confirmed.items():
                flags[c[0]] = True
            if not self.global_or(flags):
                net.end_phase(phase=self.phase, components=n_comp, sampled=0, confirmed=0,
                              merges=0, drr_depth=0, merge_iterations=0)
                break
            forest, holder_of, _ = self.build_forest(confirmed)
            depth = forest.depth()
            iters = self.merge_forest(forest, holder_of)
            for c, (e, owner) in forest.edge.items():
                self.merge_edges.append(e)
                self.merge_owner.append(owner)
            self.drr_depths.append(depth)
            net.end_phase(phase=self.phase, components=n_comp,
                          sampled=sum(v is not None for v in found.values()),
                          confirmed=len(confirmed), merges=len(forest.parent),
                          drr_depth=depth, merge_iterations=iters)
        return ConnectivityResult(self.labels.copy(), net.snapshot_metrics(), self.phase,
                                  list(self.drr_depths), list(self.merge_edges), hit_cap)

    def count_components(self) -> int:
        """Machines send YES for each held label to its proxy; proxies
        forward their distinct labels to machine 0."""
        net = self.net
        h = self.fresh_proxy_hash()
        _, part_machine, part_label = self.parts()
        prox = self.proxies(h, part_label)
        for m, lab, q in zip(part_machine.tolist(), part_label.tolist(), prox.tolist()):
            net.send(m, q, lab, self.logn)
        inboxes = net.exchange()
        for q in range(self.k):
            labs = sorted({lab for _, lab in inboxes[q]})
            if labs:
                net.send(q, 0, labs, self.logn * len(labs))
        inboxes = net.exchange()
        seen = set()
        for _, labs in inboxes[0]:
            seen.update(labs)
        return len(seen)


def run_connectivity(g: Graph, part: Partition, cfg: Config | None = None, count: bool = False,
                     net: Network | None = None, rng: np.random.Generator | None = None) -> ConnectivityResult:
    runner = ConnectivityRun(g, part, cfg, net=net, rng=rng)
    res = runner.run()
    if count:
        res.components = runner.count_components()
        res.metrics = runner.net.snapshot_metrics()
    return res


def count_components(g: Graph, part: Partition, cfg: Config | None = None) -> int:
    return run_connectivity(g, part, cfg, count=True).components
