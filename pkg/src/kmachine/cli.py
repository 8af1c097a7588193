"""Command-line entry point: ``kmachine gen|run|bench``.

Each ``run`` produces one CSV record with the fixed header below; ``bench``
sweeps a grid of (n, k) cells and appends one record per trial.
"""

from __future__ import annotations

import argparse
import csv
import math
import statistics
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import algorithms, oracles
from .connectivity import Config, ConnectivityRun
from .graph import Graph, GraphError, generate, parse_spec, read_graph, rvp_partition, write_graph

CSV_HEADER = ["n", "k", "algo", "seed", "rounds", "total_bits", "phases", "max_drr_depth", "correct", "wall_ms"]
ALGOS = ("connectivity", "mst", "mincut") + tuple(f"verify:{t}" for t in algorithms.PROBLEMS)


@dataclass
class RunConfig:
    algo: str = "connectivity"
    graph: str | None = None
    gen: str | None = None
    k: int = 4
    cb: int = 4
    seed: int = 0
    aseed: int = 0
    phase_cap: int | None = None
    query: str | None = None
    out: str | None = None
    result: str | None = None
    trace: bool = False

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in fields(self)
                       if getattr(self, f.name) is not None)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls(**parse_config(text))


def parse_config(text: str) -> dict:
    """Flat ``key=value`` lines; ``#`` starts a comment."""
    known = {f.name: f for f in fields(RunConfig)}
    out = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise GraphError(f"config line {ln}: expected key=value")
        key, val = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise GraphError(f"config line {ln}: unknown key {key!r}")
        if key in ("k", "cb", "seed", "aseed", "phase_cap"):
            out[key] = int(val)
        elif key == "trace":
            out[key] = val.lower() in ("1", "true", "yes", "on")
        else:
            out[key] = val
    return out


@dataclass
class BenchRecord:
    n: int
    k: int
    algo: str
    seed: int
    rounds: int
    total_bits: int
    phases: int
    max_drr_depth: int
    correct: bool
    wall_ms: int

    def row(self) -> list:
        d = asdict(self)
        d["correct"] = "true" if self.correct else "false"
        return [d[h] for h in CSV_HEADER]


def partition_seed(seed: int) -> int:
    # keep the partition stream apart from the graph generator's stream
    return int(np.random.SeedSequence([seed, 1]).generate_state(1)[0])


def load_input(cfg: RunConfig) -> tuple[Graph, Graph | None]:
    if (cfg.graph is None) == (cfg.gen is None):
        raise GraphError("give exactly one of --graph and --gen")
    if cfg.graph is not None:
        return read_graph(cfg.graph), None
    spec = parse_spec(cfg.gen)
    g = generate(spec, cfg.seed)
    if isinstance(g, tuple):
        return g
    if cfg.algo == "mst" and not g.weighted:
        g = generate(parse_spec(cfg.gen + "+w"), cfg.seed)
    return g, None


def build_query(cfg: RunConfig, g: Graph, h: Graph | None) -> algorithms.VerificationQuery:
    tag = cfg.algo.split(":", 1)[1]
    vals = {}
    if cfg.query:
        for tok in cfg.query.split():
            if "=" not in tok:
                raise GraphError(f"bad query token {tok!r}")
            key, val = tok.split("=", 1)
            vals[key] = val
    if "problem" in vals and vals["problem"] != tag:
        raise GraphError("query problem disagrees with --algo")
    sub = vals.get("subgraph", vals.get("cut"))
    if sub is not None:
        h = read_graph(sub)
    try:
        q = algorithms.VerificationQuery(
            tag, g, h,
            s=int(vals["s"]) if "s" in vals else None,
            t=int(vals["t"]) if "t" in vals else None,
            edge=(int(vals["u"]), int(vals["v"])) if "u" in vals and "v" in vals else None)
    except ValueError as exc:
        raise GraphError(f"bad query value: {exc}") from None
    q.validate()
    return q


def oracle_verify(q: algorithms.VerificationQuery) -> bool:
    """Sequential answer for a verification query."""
    tag, g = q.problem, q.g
    if tag == "scs":
        return oracles.count_classes(oracles.oracle_components(q.h)) == 1
    if tag == "cut":
        rest = g.subgraph(~np.isin(g.index, q.h.index))
        return oracles.count_classes(oracles.oracle_components(rest)) > 1
    if tag == "st_conn":
        return oracles.oracle_st_connected(g, q.s, q.t)
    if tag == "edge_on_all_paths":
        return not oracles.oracle_st_connected(g.without_edges([q.edge]), q.s, q.t)
    if tag == "st_cut":
        rest = g.subgraph(~np.isin(g.index, q.h.index))
        return not oracles.oracle_st_connected(rest, q.s, q.t)
    if tag == "e_cycle":
        host = q.h if q.h is not None else g
        return oracles.oracle_st_connected(host.without_edges([q.edge]), *q.edge)
    if tag == "cycle":
        host = q.h if q.h is not None else g
        return host.m > host.n - oracles.count_classes(oracles.oracle_components(host))
    if tag == "bipartite":
        return oracles.oracle_bipartite(g)
    raise GraphError(f"unknown problem {tag!r}")


def _depth_and_phases(metrics) -> tuple[int, int]:
    depths = [s.get("drr_depth", 0) for s in metrics.phase_stats]
    return len(metrics.phase_stats), max(depths, default=0)


def execute(cfg: RunConfig, trace_stream=None) -> tuple[BenchRecord, str]:
    """Run one configuration; returns the record and the result text."""
    if cfg.algo not in ALGOS:
        raise GraphError(f"unknown algorithm {cfg.algo!r}")
    if cfg.k < 2:
        raise GraphError("distributed runs need k >= 2")
    g, h = load_input(cfg)
    part = rvp_partition(g, cfg.k, partition_seed(cfg.seed))
    acfg = Config(seed=cfg.seed, aseed=cfg.aseed, c_B=cfg.cb, phase_cap=cfg.phase_cap, trace=cfg.trace)
    start = time.perf_counter()
    lines = []
    if cfg.algo == "connectivity":
        runner = ConnectivityRun(g, part, acfg)
        if trace_stream is not None:
            runner.net.trace_stream = trace_stream
        res = runner.run()
        metrics = runner.net.snapshot_metrics()
        correct = oracles.same_partition(res.labels, oracles.oracle_components(g))
        lines = [f"{v} {lab}" for v, lab in enumerate(res.labels.tolist())]
    elif cfg.algo == "mst":
        res = algorithms.run_mst(g, part, acfg)
        metrics = res.metrics
        ora = oracles.oracle_mst(g)
        correct = res.total_weight == ora.total_weight and res.spanning == ora.spanning
        lines = [f"{u} {v} {g.weight_of(u, v)} {res.outputting_machine[(u, v)]}" for u, v in sorted(res.edges)]
        lines.append(f"# total_weight={res.total_weight} spanning={str(res.spanning).lower()}")
    elif cfg.algo == "mincut":
        res = algorithms.run_mincut_estimate(g, part, acfg)
        metrics = res.metrics
        true = oracles.oracle_mincut(g) if g.n <= 500 else None
        if true is None:
            correct = False
        elif true == 0:
            correct = res.disconnected
        else:
            correct = 1 <= res.estimate / true <= 4 * max(1, math.ceil(math.log2(max(g.n, 2))))
        lines = [f"estimate={res.estimate} j_star={res.j_star} trials_per_level={res.trials_per_level} "
                 f"disconnected={str(res.disconnected).lower()}"]
    else:
        q = build_query(cfg, g, h)
        res = algorithms.verify(q, part, acfg)
        metrics = res.metrics
        correct = res.answer == oracle_verify(q)
        lines = [f"{q.problem}={str(res.answer).lower()}"]
    wall = int(round((time.perf_counter() - start) * 1000))
    phases, depth = _depth_and_phases(metrics)
    rec = BenchRecord(g.n, cfg.k, cfg.algo, cfg.seed, metrics.rounds_elapsed, metrics.total_bits,
                      phases, depth, bool(correct), wall)
    return rec, "\n".join(lines) + "\n"


def write_records(records: list[BenchRecord], dest) -> None:
    """Append rows; the header is written only into an empty/new file."""
    if dest is None or dest == "-":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(r.row())
        return
    path = Path(dest)
    fresh = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if fresh:
            w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(r.row())


def summarize(records: list[BenchRecord]) -> list[str]:
    """Median rounds per (n, k) and the ratio to the cell with twice the k."""
    cells: dict = {}
    for r in records:
        cells.setdefault((r.n, r.k), []).append(r.rounds)
    med = {key: statistics.median(v) for key, v in cells.items()}
    out = ["n,k,median_rounds,ratio_to_2k"]
    for (n, k) in sorted(med):
        nxt = med.get((n, 2 * k))
        ratio = f"{med[(n, k)] / nxt:.4f}" if nxt else ""
        out.append(f"{n},{k},{med[(n, k)]:g},{ratio}")
    return out


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; command-line flags override it")
    p.add_argument("--algo", choices=ALGOS)
    p.add_argument("--k", type=int)
    p.add_argument("--cb", type=int)
    p.add_argument("--aseed", type=int)
    p.add_argument("--phase-cap", type=int, dest="phase_cap")
    p.add_argument("--out", help="CSV file to append records to (default: stdout)")
    p.add_argument("--trace", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kmachine", description="k-machine model graph algorithm simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="write a generated graph")
    g.add_argument("spec")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    r = sub.add_parser("run", help="run one algorithm and emit a CSV record")
    src = r.add_mutually_exclusive_group()
    src.add_argument("--graph")
    src.add_argument("--gen")
    r.add_argument("--seed", type=int)
    r.add_argument("--query", help='verification arguments, e.g. "s=0 t=5 subgraph=H.txt"')
    r.add_argument("--result", help="write labels / edges / answer here")
    _add_common(r)

    b = sub.add_parser("bench", help="sweep (n, k) cells")
    b.add_argument("--n", default="512,1024", help="comma-separated vertex counts")
    b.add_argument("--k-list", default="4,8,16", dest="k_list")
    b.add_argument("--family", default="gnp({n},8/{n})", help="generator template with {n}")
    b.add_argument("--trials", type=int, default=1)
    b.add_argument("--seed", type=int, default=0, help="seed of the first trial")
    b.add_argument("--summary", help="write the median/ratio table here (default: stderr)")
    _add_common(b)
    return ap


def resolve(args: argparse.Namespace) -> RunConfig:
    base = parse_config(Path(args.config).read_text()) if getattr(args, "config", None) else {}
    for f in fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            base[f.name] = val
    return RunConfig(**base)


def _family(template: str, n: int) -> str:
    spec = template.replace("{n}", str(n))
    # allow arithmetic like 8/512 inside the template
    head, _, rest = spec.partition("(")
    parts = []
    for tok in rest.rstrip(")").split(","):
        tok = tok.strip()
        if "/" in tok:
            a, b = tok.split("/")
            tok = repr(float(a) / float(b))
        parts.append(tok)
    return f"{head}({','.join(parts)})"


def cmd_gen(args) -> int:
    out = generate(parse_spec(args.spec), args.seed)
    path = Path(args.out)
    if isinstance(out, tuple):
        g, h = out
        write_graph(g, path)
        write_graph(h, path.with_name(path.stem + ".H" + path.suffix))
    else:
        write_graph(out, path)
    return 0


def cmd_run(args) -> int:
    cfg = resolve(args)
    rec, text = execute(cfg)
    if cfg.result:
        Path(cfg.result).write_text(text)
    write_records([rec], cfg.out)
    return 0


def cmd_bench(args) -> int:
    cfg = resolve(args)
    records = []
    for n in _int_list(args.n):
        for k in _int_list(args.k_list):
            if k > n:
                raise GraphError(f"k={k} exceeds n={n}")
            for t in range(args.trials):
                seed = args.seed + t
                one = RunConfig(algo=cfg.algo, gen=_family(args.family, n), k=k, cb=cfg.cb, seed=seed,
                                aseed=(cfg.aseed or 0) + seed, phase_cap=cfg.phase_cap)
                rec, _ = execute(one)
                records.append(rec)
                if cfg.out:
                    write_records([rec], cfg.out)
    if not cfg.out:
        write_records(records, None)
    table = "\n".join(summarize(records)) + "\n"
    if args.summary:
        Path(args.summary).write_text(table)
    else:
        sys.stderr.write(table)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return {"gen": cmd_gen, "run": cmd_run, "bench": cmd_bench}[args.cmd](args)
    except (GraphError, OSError) as exc:
        print(f"kmachine: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
