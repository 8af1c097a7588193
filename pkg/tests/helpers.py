"""Brute-force oracles and random instances shared by the test modules."""
from collections import deque

from kmachine.algorithms import VerificationQuery
from kmachine.graph import Graph, generate, scs_gadget


def adjacency(g, skip=()):
    skip = {(min(e), max(e)) for e in skip}
    adj = [[] for _ in range(g.n)]
    for a, b in zip(g.src.tolist(), g.dst.tolist()):
        if (a, b) not in skip:
            adj[a].append(b)
            adj[b].append(a)
    return adj


def bfs_reach(adj, s):
    seen = {s}
    todo = deque([s])
    while todo:
        x = todo.popleft()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                todo.append(y)
    return seen


def bfs_components(adj):
    lab = [-1] * len(adj)
    c = 0
    for r in range(len(adj)):
        if lab[r] < 0:
            for x in bfs_reach(adj, r):
                lab[x] = c
            c += 1
    return lab, c


def two_colourable(adj):
    colour = [-1] * len(adj)
    for r in range(len(adj)):
        if colour[r] >= 0:
            continue
        colour[r] = 0
        todo = deque([r])
        while todo:
            x = todo.popleft()
            for y in adj[x]:
                if colour[y] < 0:
                    colour[y] = 1 - colour[x]
                    todo.append(y)
                elif colour[y] == colour[x]:
                    return False
    return True


def odd_components(g):
    """Number of components containing an odd cycle."""
    adj = adjacency(g)
    lab, c = bfs_components(adj)
    odd = 0
    for comp in range(c):
        members = [v for v in range(g.n) if lab[v] == comp]
        keep = set(members)
        sub = [[y for y in adj[x] if y in keep] if x in keep else [] for x in range(g.n)]
        colour = {}
        r = members[0]
        colour[r] = 0
        todo = deque([r])
        bad = False
        while todo and not bad:
            x = todo.popleft()
            for y in sub[x]:
                if y not in colour:
                    colour[y] = 1 - colour[x]
                    todo.append(y)
                elif colour[y] == colour[x]:
                    bad = True
        odd += bad
    return odd


def has_cycle_dfs(g):
    adj = adjacency(g)
    seen = [False] * g.n
    for r in range(g.n):
        if seen[r]:
            continue
        stack = [(r, -1)]
        while stack:
            x, par = stack.pop()
            if seen[x]:
                return True
            seen[x] = True
            for y in adj[x]:
                if y != par:
                    stack.append((y, x))
    return False


def brute_answer(q):
    g, tag = q.g, q.problem
    minus_h = [(a, b) for a, b in q.h.edge_set()] if q.h is not None else []
    if tag == "scs":
        return bfs_components(adjacency(q.h))[1] == 1
    if tag == "cut":
        return bfs_components(adjacency(g, minus_h))[1] > 1
    if tag == "st_conn":
        return q.t in bfs_reach(adjacency(g), q.s)
    if tag == "edge_on_all_paths":
        return q.t not in bfs_reach(adjacency(g, [q.edge]), q.s)
    if tag == "st_cut":
        return q.t not in bfs_reach(adjacency(g, minus_h), q.s)
    if tag == "e_cycle":
        host = q.h if q.h is not None else g
        return q.edge[1] in bfs_reach(adjacency(host, [q.edge]), q.edge[0])
    if tag == "cycle":
        return has_cycle_dfs(q.h if q.h is not None else g)
    if tag == "bipartite":
        return two_colourable(adjacency(g))
    raise ValueError(tag)


def _sub(g, rng, frac):
    return g.subgraph(rng.random(g.m) < frac)


def _pick_edge(g, rng):
    e = int(rng.integers(0, g.m))
    return int(g.src[e]), int(g.dst[e])


def gadget_query(i, rng):
    """An scs gadget instance and whether its vectors are disjoint."""
    b = int(rng.integers(2, 9))
    x = rng.integers(0, 2, b).tolist()
    y = rng.integers(0, 2, b).tolist()
    if i % 2 == 0:
        y = [yy & (1 - xx) for xx, yy in zip(x, y)]
    g, h = scs_gadget(b, x, y)
    return VerificationQuery("scs", g, h=h), not any(a and c for a, c in zip(x, y))


def random_query(tag, i, rng, n=48):
    """A random instance of ``tag``; densities vary with ``i`` so both answers occur."""
    c = (1.0, 2.0, 4.0)[i % 3]
    if tag == "scs" and i < 20:
        return gadget_query(i, rng)[0]
    if tag == "bipartite":
        kind = i % 4
        if kind == 0:
            g = generate(f"cycle({int(rng.integers(3, 40))})")
        elif kind == 1:
            g = _tree(n, rng)
        else:
            g = generate(f"gnp({n},{c / n})", int(rng.integers(1 << 30)))
        return VerificationQuery(tag, g)
    g = generate(f"gnp({n},{(c + 1) / n})", int(rng.integers(1 << 30)))
    while g.m < 2:
        g = generate(f"gnp({n},{(c + 1) / n})", int(rng.integers(1 << 30)))
    if tag == "scs":
        return VerificationQuery(tag, g, h=_sub(g, rng, (0.6, 0.9, 1.0)[i % 3]))
    if tag == "cycle":
        if i % 3 == 0:
            return VerificationQuery(tag, _tree(n, rng))
        return VerificationQuery(tag, g, h=_sub(g, rng, 0.4))
    if tag == "e_cycle":
        h = _sub(g, rng, 0.7)
        if h.m == 0:
            h = g
        return VerificationQuery(tag, g, h=h, edge=_pick_edge(h, rng))
    s, t = (int(v) for v in rng.choice(n, 2, replace=False))
    if tag == "st_conn":
        return VerificationQuery(tag, g, s=s, t=t)
    if tag == "edge_on_all_paths":
        return VerificationQuery(tag, g, s=s, t=t, edge=_pick_edge(g, rng))
    if tag == "cut":
        g = generate(f"gnp({n},{10 / n})", int(rng.integers(1 << 30)))
        return VerificationQuery(tag, g, h=_sub(g, rng, (0.02, 0.2, 0.6)[i % 3]))
    if tag == "st_cut":
        return VerificationQuery(tag, g, h=_sub(g, rng, (0.1, 0.3, 0.6)[i % 3]), s=s, t=t)
    raise ValueError(tag)


def _tree(n, rng):
    return Graph(n, [(int(rng.integers(0, v)), v) for v in range(1, n)])
