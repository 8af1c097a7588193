"""Shared randomness: polynomial hash families over Z_p, the two-round
relay broadcast of machine 0's seed bits, and per-phase component ranks.

A degree-(d-1) polynomial with uniformly random coefficients over Z_p is a
d-wise independent family; ``p`` is always the smallest prime above n^3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import ceil_log2

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(x: int) -> bool:
    """Deterministic Miller-Rabin for x < 3.3e24."""
    if x < 2:
        return False
    for q in _MR_BASES:
        if x % q == 0:
            return x == q
    d, s = x - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        y = pow(a, d, x)
        if y in (1, x - 1):
            continue
        for _ in range(s - 1):
            y = y * y % x
            if y == x - 1:
                break
        else:
            return False
    return True


def next_prime(x: int) -> int:
    """Smallest prime strictly greater than x."""
    c = x + 1
    while not is_prime(c):
        c += 1
    return c


def field_prime(n: int) -> int:
    return next_prime(max(n, 2) ** 3)


# -- vectorised arithmetic mod p ---------------------------------------------

_FLOAT_SAFE = 1 << 50


def mulmod(a, b, p: int) -> np.ndarray:
    """Elementwise a*b mod p for int64 arrays with entries in [0, p)."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if p <= (1 << 31):
        return (a * b) % p
    if p < _FLOAT_SAFE:
        # float quotient is within one of the true quotient; the residue
        # is recovered exactly with wrap-around uint64 arithmetic
        q = np.floor(a.astype(np.float64) * b.astype(np.float64) / float(p)).astype(np.int64)
        r = (a.astype(np.uint64) * b.astype(np.uint64) - q.astype(np.uint64) * np.uint64(p)).astype(np.int64)
        r = np.where(r < 0, r + p, r)
        r = np.where(r >= p, r - p, r)
        return r
    return np.array([int(x) * int(y) % p for x, y in zip(a.ravel().tolist(), b.ravel().tolist())],
                    dtype=object).reshape(a.shape)


def powmod(base, exp, p: int) -> np.ndarray:
    """Elementwise base**exp mod p; ``exp`` is a non-negative int64 array."""
    exp = np.array(exp, dtype=np.int64)
    base = np.broadcast_to(np.asarray(base, dtype=np.int64) % p, exp.shape).copy()
    result = np.ones(exp.shape, dtype=np.int64)
    e = exp.copy()
    while True:
        odd = (e & 1).astype(bool)
        if odd.any():
            result = np.where(odd, mulmod(result, base, p), result)
        e >>= 1
        if not e.any():
            break
        base = mulmod(base, base, p)
    return result


def inverse_mod(a: int, p: int) -> int:
    return pow(int(a), -1, p)


def poly_eval(coeffs: np.ndarray, keys, p: int) -> np.ndarray:
    """Evaluate sum(coeffs[i] * x**i) mod p at every key (keys >= 0).

    Long polynomials are split into blocks so the Python-level loop runs
    about 2*sqrt(d) times instead of d times.
    """
    keys = np.asarray(keys, dtype=np.int64)
    flat = keys.ravel() % p
    d = len(coeffs)
    if d == 0:
        return np.zeros(keys.shape, dtype=np.int64)
    small = flat.size == 0 or int(flat.max()) * p + p < (1 << 62)
    coeffs = np.asarray(coeffs, dtype=np.int64)
    if d <= 64 or not small:
        acc = np.full(flat.shape, coeffs[-1], dtype=np.int64)
        for c in coeffs[-2::-1]:
            if small:
                acc = (acc * flat + c) % p
            else:
                acc = (mulmod(acc, flat, p) + c) % p
        return acc.reshape(keys.shape)
    bs = math.isqrt(d - 1) + 1
    nb = -(-d // bs)
    padded = np.zeros(nb * bs, dtype=np.int64)
    padded[:d] = coeffs
    blocks = padded.reshape(nb, bs)  # blocks[j, t] multiplies x**(j*bs + t)
    inner = np.broadcast_to(blocks[:, -1], (flat.size, nb)).copy()
    col = flat[:, None]
    for t in range(bs - 2, -1, -1):
        inner = (inner * col + blocks[:, t]) % p
    step = powmod(flat, np.full(flat.shape, bs, dtype=np.int64), p)
    acc = inner[:, -1].copy()
    for j in range(nb - 2, -1, -1):
        acc = (mulmod(acc, step, p) + inner[:, j]) % p
    return acc.reshape(keys.shape)


def trailing_zeros(x: np.ndarray, cap: int) -> np.ndarray:
    """Trailing zero bits of each entry, with 0 mapped to ``cap``."""
    x = np.asarray(x, dtype=np.int64)
    low = x & -x
    tz = np.zeros(x.shape, dtype=np.int64)
    nz = low > 0
    tz[nz] = np.log2(low[nz].astype(np.float64)).round().astype(np.int64)
    tz[~nz] = cap
    return np.minimum(tz, cap)


# -- seeds and hash functions ------------------------------------------------------

@dataclass(frozen=True)
class SeedBlock:
    bits: np.ndarray  # uint8 array of 0/1
    origin: int = 0

    def __len__(self) -> int:
        return int(self.bits.size)

    def words(self, count: int, width: int, offset: int = 0) -> np.ndarray:
        """Read ``count`` big-endian ``width``-bit integers from ``offset``."""
        need = count * width
        if offset + need > len(self):
            raise ValueError(f"seed has {len(self) - offset} bits left, {need} needed")
        if width > 62:
            raise ValueError("word width above 62 bits")
        chunk = self.bits[offset:offset + need].reshape(count, width).astype(np.int64)
        weights = np.left_shift(np.int64(1), np.arange(width - 1, -1, -1, dtype=np.int64))
        return chunk @ weights


def random_seed_block(rng: np.random.Generator, ell: int) -> SeedBlock:
    return SeedBlock(rng.integers(0, 2, size=ell, dtype=np.uint8))


@dataclass(frozen=True)
class HashFunction:
    coeffs: np.ndarray
    p: int
    range: int

    @property
    def d(self) -> int:
        return len(self.coeffs)

    def raw(self, keys) -> np.ndarray:
        return poly_eval(self.coeffs, keys, self.p)

    def __call__(self, keys):
        out = self.raw(keys) % self.range
        return int(out) if np.ndim(out) == 0 else out


def seed_bits_needed(d: int, p: int) -> int:
    return d * p.bit_length()


def make_hash(seed: SeedBlock, d: int, range_: int, p: int, offset: int = 0) -> HashFunction:
    """Build a d-wise independent hash into [0, range_) from seed bits."""
    if d < 1:
        raise ValueError("independence degree must be >= 1")
    if range_ < 1:
        raise ValueError("hash range must be positive")
    width = p.bit_length()
    if len(seed) - offset < d * width:
        raise ValueError(f"insufficient seed bits: need {d * width}, have {len(seed) - offset}")
    coeffs = seed.words(d, width, offset) % p
    return HashFunction(coeffs, p, range_)


def hash_from_rng(rng: np.random.Generator, d: int, range_: int, p: int) -> HashFunction:
    return HashFunction(rng.integers(0, p, size=d, dtype=np.int64), p, range_)


def broadcast_seed(net, ell: int, rng: np.random.Generator) -> tuple[SeedBlock, int]:
    """Make ``ell`` fresh bits of machine 0 common knowledge.

    Machine 0 deals B-bit chunks round-robin over its k-1 links; each relay
    then forwards what it got to every other machine. Stage by stage this
    is two rounds per (k-1)*B bits, so the total is
    ``2 * ceil(ell / ((k-1)*B))`` rounds. Returns the block every machine
    reassembled, after checking they all agree.
    """
    block = random_seed_block(rng, ell)
    k, B = net.k, net.B
    if ell == 0 or k == 1:
        return block, 0
    start = net.metrics.rounds_elapsed
    chunks = [(off, block.bits[off:off + B]) for off in range(0, ell, B)]
    for relay in range(1, k):
        mine = chunks[relay - 1::k - 1]
        net.enqueue_batch(0, relay, mine, [c[1].size for c in mine])
    stage_rounds = net.run_until_drained()
    received = net.collect_all()
    for relay in range(1, k):
        got = [pl for _, pl in received[relay]]
        sizes = [pl[1].size for pl in got]
        for dst in range(1, k):
            if dst != relay:
                net.enqueue_batch(relay, dst, got, sizes)
    forward_rounds = net.run_until_drained()
    if forward_rounds < stage_rounds:
        # with k = 2 there is nobody to forward to; the stage still lasts
        net.idle(stage_rounds - forward_rounds)
    forwarded = net.collect_all()
    for m in range(1, k):
        got = np.zeros(ell, dtype=np.uint8)
        filled = np.zeros(ell, dtype=bool)
        for _, (off, piece) in received[m] + forwarded[m]:
            got[off:off + piece.size] = piece
            filled[off:off + piece.size] = True
        if not filled.all() or not np.array_equal(got, block.bits):
            raise RuntimeError(f"machine {m} reassembled a different seed")
    return block, net.metrics.rounds_elapsed - start


def broadcast_rounds(ell: int, k: int, B: int) -> int:
    if ell == 0 or k == 1:
        return 0
    return 2 * -(-ell // ((k - 1) * B))


# -- ranks -------------------------------------------------------------------

@dataclass(frozen=True)
class RankFunction:
    """Ranks of w = 4*ceil(log2 n) bits from two independent polynomials:
    rank = (a(key)*p + b(key)) mod 2**w with key = phase*n + label."""

    a: HashFunction
    b: HashFunction
    n: int

    @property
    def w(self) -> int:
        return 4 * max(1, ceil_log2(max(self.n, 2)))

    def key(self, label, phase):
        return np.asarray(phase, dtype=np.int64) * self.n + np.asarray(label, dtype=np.int64)


def make_rank_function(seed: SeedBlock, d: int, n: int, p: int) -> RankFunction:
    width = p.bit_length()
    a = make_hash(seed, d, p, p, offset=0)
    b = make_hash(seed, d, p, p, offset=d * width)
    return RankFunction(a, b, n)


def draw_rank(h: RankFunction, component_label, phase):
    w = h.w
    if w > 64:
        raise ValueError("ranks wider than 64 bits are not supported")
    keys = h.key(component_label, phase)
    hi = h.a.raw(keys).astype(np.uint64)
    lo = h.b.raw(keys).astype(np.uint64)
    val = hi * np.uint64(h.a.p) + lo  # wraps mod 2**64, fine since w <= 64
    if w < 64:
        val = val & np.uint64((1 << w) - 1)
    return int(val) if np.ndim(val) == 0 else val


def rank_greater(rank_a, label_a, rank_b, label_b):
    """Order on (rank, label): equal ranks are resolved in favour of the
    higher label, so the lower label never becomes the parent."""
    rank_a = np.asarray(rank_a, dtype=np.uint64)
    rank_b = np.asarray(rank_b, dtype=np.uint64)
    return (rank_a > rank_b) | ((rank_a == rank_b) & (np.asarray(label_a) > np.asarray(label_b)))
