"""Linear l0-sampling sketches of vertex incidence vectors.

The incidence vector of ``u`` has a +1 at the index of every edge (u, y)
with u < y and a -1 at every edge (x, u) with x < u, so summing the vectors
of a vertex set cancels its internal edges.

A sketch keeps R independent repetitions of L nested levels. Level j of
repetition r sees the coordinates whose level hash h_r has at least j
trailing zero bits (probability 2**-j). Each level stores three linear
functions of the vector over Z_p:

    count       = sum a_i
    index_sum   = sum a_i * i
    fingerprint = sum a_i * z**i

A level holding a single +-1 entry is recognised by count = +-1,
index_sum/count in range and fingerprint == count * z**(index_sum/count).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .graph import Graph, ceil_log2, num_pairs
from .randomness import (SeedBlock, field_prime, make_hash, mulmod, powmod,
                         trailing_zeros)

COUNT, INDEX, FINGER = 0, 1, 2


class SketchMismatch(ValueError):
    """Sketches built from different sketch matrices cannot be combined."""


def sketch_shape(n: int, c_R: int = 3) -> tuple[int, int]:
    logn = max(1, ceil_log2(max(n, 2)))
    R = c_R * logn
    L = ceil_log2(max(num_pairs(n), 1)) + 1
    return R, L


def sketch_bits(n: int, c_R: int = 3) -> int:
    R, L = sketch_shape(n, c_R)
    return R * L * 3 * field_prime(n).bit_length()


@dataclass(eq=False)
class SketchMatrixSpec:
    """Shared description of one sketch matrix: per-repetition level
    hashes and the fingerprint base, identical on all machines."""

    n: int
    p: int
    R: int
    L: int
    level_coeffs: np.ndarray  # (R, d)
    z: int
    tag: tuple = ()

    @property
    def npairs(self) -> int:
        return num_pairs(self.n)

    @property
    def width(self) -> int:
        return self.p.bit_length()

    @property
    def size_bits(self) -> int:
        return self.R * self.L * 3 * self.width

    def compatible(self, other: "SketchMatrixSpec") -> bool:
        return self is other or (
            self.n == other.n and self.p == other.p and self.tag == other.tag
            and self.z == other.z and np.array_equal(self.level_coeffs, other.level_coeffs))

    def levels(self, idx: np.ndarray) -> np.ndarray:
        """(R, len(idx)) array: the deepest level each coordinate reaches."""
        idx = np.asarray(idx, dtype=np.int64)
        p = self.p
        co = self.level_coeffs
        acc = np.repeat(co[:, -1:], idx.size, axis=1)
        small = idx.size == 0 or int(idx.max()) * p + p < (1 << 62)
        for i in range(co.shape[1] - 2, -1, -1):
            if small:
                acc = (acc * idx + co[:, i:i + 1]) % p
            else:
                acc = (mulmod(acc, np.broadcast_to(idx, acc.shape), p) + co[:, i:i + 1]) % p
        return trailing_zeros(acc, self.L - 1)

    def zpow(self, idx: np.ndarray) -> np.ndarray:
        return powmod(self.z, np.asarray(idx, dtype=np.int64), self.p)


def sketch_seed_bits(n: int, c_R: int = 3, c_d: int = 5) -> int:
    R, _ = sketch_shape(n, c_R)
    d = c_d * max(1, ceil_log2(max(n, 2)))
    return (R * d + 1) * field_prime(n).bit_length()


@lru_cache(maxsize=None)
def _prime_factors(m: int) -> tuple[int, ...]:
    out, f = [], 2
    while f * f <= m:
        if m % f == 0:
            out.append(f)
            while m % f == 0:
                m //= f
        f += 1 if f == 2 else 2
    if m > 1:
        out.append(m)
    return tuple(out)


def primitive_root_from(z: int, p: int) -> int:
    """First generator of Z_p^* at or after z (cyclically). A base of small
    multiplicative order repeats z^i across indices and breaks verification."""
    qs = _prime_factors(p - 1)
    for step in range(p - 1):
        c = (z - 1 + step) % (p - 1) + 1
        if all(pow(c, (p - 1) // q, p) != 1 for q in qs):
            return c
    raise ValueError(f"no primitive root mod {p}")


def make_sketch_spec(seed: SeedBlock, n: int, tag: tuple = (), c_R: int = 3, c_d: int = 5,
                     offset: int = 0) -> SketchMatrixSpec:
    """Derive a sketch matrix from broadcast seed bits: R level hashes of
    independence c_d*ceil(log2 n) and a fingerprint base z in [1, p)."""
    p = field_prime(n)
    R, L = sketch_shape(n, c_R)
    d = c_d * max(1, ceil_log2(max(n, 2)))
    width = p.bit_length()
    need = (R * d + 1) * width
    if len(seed) - offset < need:
        raise ValueError(f"insufficient seed bits for sketch matrix: need {need}")
    coeffs = np.stack([make_hash(seed, d, p, p, offset + r * d * width).coeffs for r in range(R)])
    z = primitive_root_from(int(seed.words(1, width, offset + R * d * width)[0]) % (p - 1) + 1, p)
    return SketchMatrixSpec(n, p, R, L, coeffs, z, tuple(tag))


class L0Sketch:
    __slots__ = ("data", "spec")

    def __init__(self, data: np.ndarray, spec: SketchMatrixSpec):
        self.data = data
        self.spec = spec

    @classmethod
    def zero(cls, spec: SketchMatrixSpec) -> "L0Sketch":
        return cls(np.zeros((spec.R, spec.L, 3), dtype=np.int64), spec)

    def is_zero(self) -> bool:
        return not self.data.any()

    def __add__(self, other: "L0Sketch") -> "L0Sketch":
        return add(self, other)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, L0Sketch):
            return NotImplemented
        return self.spec.compatible(other.spec) and np.array_equal(self.data, other.data)

    @property
    def size_bits(self) -> int:
        return self.spec.size_bits

    def to_bits(self) -> np.ndarray:
        """Big-endian fixed-width field elements, (repetition, level, field)
        order, as a 0/1 uint8 array of exactly ``size_bits`` entries."""
        w = self.spec.width
        vals = self.data.reshape(-1).astype(np.uint64)
        shifts = np.arange(w - 1, -1, -1, dtype=np.uint64)
        return ((vals[:, None] >> shifts) & np.uint64(1)).astype(np.uint8).reshape(-1)

    def to_bytes(self) -> bytes:
        return np.packbits(self.to_bits()).tobytes()

    @classmethod
    def from_bytes(cls, raw: bytes, spec: SketchMatrixSpec) -> "L0Sketch":
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[:spec.size_bits]
        if bits.size != spec.size_bits:
            raise ValueError("truncated sketch")
        w = spec.width
        weights = np.left_shift(np.int64(1), np.arange(w - 1, -1, -1, dtype=np.int64))
        vals = bits.reshape(-1, w).astype(np.int64) @ weights
        return cls(vals.reshape(spec.R, spec.L, 3), spec)


def add(s1: L0Sketch, s2: L0Sketch) -> L0Sketch:
    if not s1.spec.compatible(s2.spec):
        raise SketchMismatch("sketches come from different sketch matrices")
    return L0Sketch((s1.data + s2.data) % s1.spec.p, s1.spec)


# -- construction ------------------------------------------------------------

def _accumulate(spec: SketchMatrixSpec, owner: np.ndarray, idx: np.ndarray, coef: np.ndarray,
                nowners: int, levels: np.ndarray | None = None, zp: np.ndarray | None = None) -> np.ndarray:
    """Sum coefficient vectors into per-owner sketches.

    ``owner[t]`` receives ``coef[t]`` at coordinate ``idx[t]``. Returns an
    int64 array (nowners, R, L, 3) reduced mod p.
    """
    R, L, p = spec.R, spec.L, spec.p
    out = np.zeros((nowners, R, L, 3), dtype=np.int64)
    if idx.size == 0:
        return out
    if levels is None:
        levels = spec.levels(idx)
    if zp is None:
        zp = spec.zpow(idx)
    coef = np.asarray(coef, dtype=np.int64)
    cell = (owner[None, :] * R + np.arange(R)[:, None]) * L + levels  # (R, t)
    cell = cell.ravel()
    size = nowners * R * L
    cnt = np.broadcast_to(coef, (R, coef.size)).ravel()
    isum = np.broadcast_to((coef * idx) % p, (R, coef.size)).ravel()
    fp = np.broadcast_to(mulmod(coef % p, zp, p), (R, coef.size)).ravel()
    for f, vals in ((COUNT, cnt), (INDEX, isum), (FINGER, fp)):
        acc = _scatter(cell, vals, size, p, coef.size)
        out[..., f] = acc.reshape(nowners, R, L)
    # level j holds every coordinate that reached level >= j
    out = np.flip(np.cumsum(np.flip(out, axis=2), axis=2), axis=2) % p
    return out


def _scatter(cell: np.ndarray, vals: np.ndarray, size: int, p: int, per_cell: int) -> np.ndarray:
    # float64 bincount is exact while every partial sum stays below 2**53;
    # a cell collects at most ``per_cell`` terms, each of magnitude < p
    if per_cell * max(p, 1) < (1 << 52):
        return np.rint(np.bincount(cell, weights=vals.astype(np.float64), minlength=size)).astype(np.int64) % p
    acc = np.zeros(size, dtype=np.int64)
    # chunks keep every int64 partial sum below 2**62
    step = max(1, (1 << 62) // max(p, 1) - 1)
    for s in range(0, vals.size, step):
        part = np.zeros(size, dtype=np.int64)
        np.add.at(part, cell[s:s + step], vals[s:s + step] % p)
        acc = (acc + part) % p
    return acc


def incidence(g: Graph, u: int, threshold: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(edge indices, signs) of the incidence vector of ``u``.

    With ``threshold`` set, edges whose weight key exceeds it are zeroed.
    """
    eids = g.incident(u)
    idx = g.index[eids]
    sign = np.where(g.src[eids] == u, 1, -1).astype(np.int64)
    if threshold is not None:
        keep = weight_keys(g)[eids] <= threshold
        idx, sign = idx[keep], sign[keep]
    return idx, sign


def weight_keys(g: Graph) -> np.ndarray:
    """Total order on edges: weight first, edge index as the tie-break."""
    w = g.weight if g.weight is not None else np.zeros(g.m, dtype=np.int64)
    return w * max(num_pairs(g.n), 1) + g.index


def sketch_vector(entries: dict[int, int], spec: SketchMatrixSpec) -> L0Sketch:
    """Sketch of an explicit integer vector given as {index: value}."""
    if not entries:
        return L0Sketch.zero(spec)
    idx = np.fromiter(entries.keys(), dtype=np.int64, count=len(entries))
    val = np.fromiter(entries.values(), dtype=np.int64, count=len(entries))
    data = _accumulate(spec, np.zeros(idx.size, dtype=np.int64), idx, val, 1)
    return L0Sketch(data[0], spec)


def sketch_vertex(g: Graph, u: int, spec: SketchMatrixSpec, threshold: int | None = None) -> L0Sketch:
    idx, sign = incidence(g, u, threshold)
    data = _accumulate(spec, np.zeros(idx.size, dtype=np.int64), idx, sign, 1)
    return L0Sketch(data[0], spec)


def sketch_groups(g: Graph, group: np.ndarray, ngroups: int, spec: SketchMatrixSpec,
                  thresholds: np.ndarray | None = None) -> np.ndarray:
    """Sketches of the summed incidence vectors of vertex groups.

    ``group[v]`` is the group of vertex v (or -1 to leave it out). With
    ``thresholds`` (per vertex), vertex v drops incident edges whose weight
    key exceeds ``thresholds[v]``. Edges with both endpoints in one group
    cancel exactly, so they are skipped without changing the result.
    Returns (ngroups, R, L, 3).
    """
    gu, gv = group[g.src], group[g.dst]
    keep_u = gu >= 0
    keep_v = gv >= 0
    if thresholds is not None:
        keys = weight_keys(g)
        keep_u &= keys <= thresholds[g.src]
        keep_v &= keys <= thresholds[g.dst]
    cancel = keep_u & keep_v & (gu == gv)
    keep_u &= ~cancel
    keep_v &= ~cancel
    live = keep_u | keep_v
    eidx = g.index[live]
    levels = spec.levels(eidx)
    zp = spec.zpow(eidx)
    ku, kv = keep_u[live], keep_v[live]
    owner = np.concatenate([gu[live][ku], gv[live][kv]])
    idx = np.concatenate([eidx[ku], eidx[kv]])
    coef = np.concatenate([np.ones(ku.sum(), dtype=np.int64), -np.ones(kv.sum(), dtype=np.int64)])
    lv = np.concatenate([levels[:, ku], levels[:, kv]], axis=1)
    zz = np.concatenate([zp[ku], zp[kv]])
    return _accumulate(spec, owner, idx, coef, ngroups, levels=lv, zp=zz)


# -- querying ----------------------------------------------------------------

def query_many(data: np.ndarray, spec: SketchMatrixSpec) -> tuple[np.ndarray, np.ndarray]:
    """Decode a stack of sketches (N, R, L, 3).

    Repetitions are tried in order and, inside one, levels from 0 upward;
    the first verified one-sparse level wins. Returns (index, sign) arrays
    with index -1 where nothing verified.
    """
    N = data.shape[0]
    p = spec.p
    out_idx = np.full(N, -1, dtype=np.int64)
    out_sign = np.zeros(N, dtype=np.int64)
    pending = np.arange(N)
    for r in range(spec.R):
        if pending.size == 0:
            break
        block = data[pending, r]  # (P, L, 3)
        c = block[..., COUNT]
        plus = c == 1
        minus = c == p - 1
        ok = plus | minus
        cand_idx = np.where(minus, (p - block[..., INDEX]) % p, block[..., INDEX])
        ok &= cand_idx < spec.npairs
        if not ok.any():
            continue
        rows, lv = np.nonzero(ok)
        ci = cand_idx[rows, lv]
        expect = spec.zpow(ci)
        expect = np.where(minus[rows, lv], (p - expect) % p, expect)
        good = expect == block[rows, lv, FINGER]
        if not good.any():
            continue
        rows, lv, ci = rows[good], lv[good], ci[good]
        # nonzero() is row-major, so the first hit per row is its lowest level
        first = np.unique(rows, return_index=True)[1]
        hit_rows = rows[first]
        targets = pending[hit_rows]
        out_idx[targets] = ci[first]
        out_sign[targets] = np.where(plus[hit_rows, lv[first]], 1, -1)
        done = np.zeros(pending.size, dtype=bool)
        done[hit_rows] = True
        pending = pending[~done]
    return out_idx, out_sign


def query(s: L0Sketch) -> tuple[int, int] | None:
    idx, sign = query_many(s.data[None], s.spec)
    if idx[0] < 0:
        return None
    return int(idx[0]), int(sign[0])
