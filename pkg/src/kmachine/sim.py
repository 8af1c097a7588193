"""Synchronous k-machine network with per-link bandwidth caps.

All algorithm traffic goes through :class:`Network`. A communication step
is: enqueue any number of envelopes, then :meth:`Network.run_until_drained`.
Every ordered link delivers its FIFO queue greedily, at most ``B`` bits per
round; a message crosses in a round only if it fits in what is left of that
round, and messages larger than ``B`` are split into ``B``-bit frames that
each carry a small reassembly header. Links are independent, so the rounds
consumed by a step are the maximum over links; the per-link schedules are
computed arithmetically rather than by stepping every round.

Local computation never advances the round counter, and ``src == dst``
sends are delivered immediately at zero cost.
"""

from __future__ import annotations

import copy
import sys
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any

from .graph import ceil_log2


@dataclass(slots=True)
class MessageEnvelope:
    src: int
    dst: int
    payload: Any
    size_bits: int


@dataclass(frozen=True)
class BandwidthConfig:
    """Per-link per-round capacity ``B = c_B * ceil(log2 n)**2`` bits."""

    n: int
    c_B: int = 4
    bits_override: int | None = None

    @property
    def logn(self) -> int:
        return max(1, ceil_log2(max(self.n, 2)))

    @property
    def B(self) -> int:
        if self.bits_override is not None:
            return self.bits_override
        return self.c_B * self.logn ** 2

    @property
    def header_bits(self) -> int:
        """Framing charged per algorithm message (source, destination, tags)."""
        return 4 * self.logn

    @property
    def frame_header_bits(self) -> int:
        """Reassembly header carried by every frame of a fragmented message."""
        return 2 * self.logn


@dataclass
class RoundMetrics:
    rounds_elapsed: int = 0
    bits_per_link: dict = field(default_factory=dict)
    max_link_bits_in_round: int = 0
    per_phase_rounds: list = field(default_factory=list)
    total_bits: int = 0
    messages: int = 0
    steps: int = 0
    bandwidth_violations: int = 0
    max_link_messages_in_step: int = 0
    phase_stats: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)

    def bump(self, key: str, amount: int = 1) -> None:
        self.counters[key] = self.counters.get(key, 0) + amount


class BandwidthError(RuntimeError):
    pass


class Network:
    """Round-accurate message passing among ``k`` machines."""

    def __init__(self, k: int, n: int, c_B: int = 4, bits_per_round: int | None = None,
                 trace: bool = False, trace_stream=None, keep_cells: bool = False):
        if k < 1:
            raise ValueError("need at least one machine")
        self.k = k
        self.cfg = BandwidthConfig(n=n, c_B=c_B, bits_override=bits_per_round)
        if self.cfg.B < 1:
            raise ValueError("bandwidth must be at least one bit per round")
        self.B = self.cfg.B
        self.header_bits = self.cfg.header_bits
        self.frame_header_bits = self.cfg.frame_header_bits
        self.trace = trace
        self.trace_stream = trace_stream if trace_stream is not None else sys.stderr
        # keep_cells records every (link, round) load; tests use it to audit
        # the cap directly
        self.keep_cells = keep_cells or trace
        self.cells: dict[tuple[int, int], list[int]] = defaultdict(list)
        self._queues: dict[tuple[int, int], list[MessageEnvelope]] = defaultdict(list)
        self._inbox: list[list[tuple[int, Any]]] = [[] for _ in range(k)]
        self.metrics = RoundMetrics()
        self._phase_start: int | None = None

    # -- sending ----------------------------------------------------------

    def enqueue(self, env: MessageEnvelope) -> None:
        if not (0 <= env.src < self.k and 0 <= env.dst < self.k):
            raise ValueError(f"bad link ({env.src}, {env.dst}) for k={self.k}")
        if env.size_bits < 1:
            raise ValueError("messages carry at least one bit")
        if env.src == env.dst:
            self._inbox[env.dst].append((env.src, env.payload))
            return
        self._queues[(env.src, env.dst)].append(env)

    def enqueue_batch(self, src: int, dst: int, payloads: list, sizes: list[int]) -> None:
        """Enqueue many header-less messages on one link, in order."""
        if not (0 <= src < self.k and 0 <= dst < self.k):
            raise ValueError(f"bad link ({src}, {dst}) for k={self.k}")
        if min(sizes, default=1) < 1:
            raise ValueError("messages carry at least one bit")
        if src == dst:
            self._inbox[dst].extend((src, pl) for pl in payloads)
            return
        self._queues[(src, dst)].extend(MessageEnvelope(src, dst, pl, s) for pl, s in zip(payloads, sizes))

    def send(self, src: int, dst: int, payload: Any, payload_bits: int) -> None:
        """Enqueue an algorithm message, charging the per-message header."""
        self.enqueue(MessageEnvelope(src, dst, payload, payload_bits + self.header_bits))

    def wire_bits(self, size_bits: int) -> int:
        """Bits a message occupies on the link once fragmented."""
        if size_bits <= self.B:
            return size_bits
        per = self.B - self.frame_header_bits
        if per < 1:
            raise BandwidthError("frame header does not fit into B")
        frames = -(-size_bits // per)
        return size_bits + frames * self.frame_header_bits

    # -- rounds -----------------------------------------------------------

    def _pack_link(self, queue: list[MessageEnvelope]) -> tuple[int, int, int, list[int] | None]:
        """Greedy FIFO schedule of one link.

        Returns (rounds, wire bits, max bits in any round, per-round loads
        if cells are being kept).
        """
        B = self.B
        rounds, used, wire, peak = 0, B, 0, 0
        cells = [] if self.keep_cells else None
        sizes = [e.size_bits for e in queue]
        if len(set(sizes)) == 1 and sizes[0] <= B and cells is None:
            s = sizes[0]
            per_round = B // s
            rounds = -(-len(sizes) // per_round)
            peak = min(len(sizes), per_round) * s
            return rounds, s * len(sizes), peak, None
        fh = self.frame_header_bits
        for s in sizes:
            if s <= B:
                if used + s > B:
                    if cells is not None and rounds:
                        cells.append(used)
                    peak = max(peak, used if rounds else 0)
                    rounds += 1
                    used = s
                else:
                    used += s
                wire += s
                continue
            per = B - fh
            if per < 1:
                raise BandwidthError("frame header does not fit into B")
            frames = -(-s // per)
            last = s - (frames - 1) * per + fh
            if rounds:
                if cells is not None:
                    cells.append(used)
                peak = max(peak, used)
            if cells is not None:
                cells.extend([B] * (frames - 1))
            if frames > 1:
                peak = max(peak, B)
            rounds += frames
            used = last
            wire += s + frames * fh
        if rounds:
            if cells is not None:
                cells.append(used)
            peak = max(peak, used)
        return rounds, wire, peak, cells

    def run_until_drained(self) -> int:
        """Deliver everything queued; returns the rounds this took."""
        if not self._queues:
            return 0
        m = self.metrics
        step_rounds = 0
        start = m.rounds_elapsed
        per_round_trace: dict[int, list[str]] = defaultdict(list) if self.trace else None
        for link in sorted(self._queues):
            queue = self._queues[link]
            rounds, wire, peak, cells = self._pack_link(queue)
            step_rounds = max(step_rounds, rounds)
            m.bits_per_link[link] = m.bits_per_link.get(link, 0) + wire
            m.total_bits += wire
            m.messages += len(queue)
            m.max_link_messages_in_step = max(m.max_link_messages_in_step, len(queue))
            m.max_link_bits_in_round = max(m.max_link_bits_in_round, peak)
            if peak > self.B:
                m.bandwidth_violations += 1
            if cells is not None:
                self.cells[link].extend([0] * (start - len(self.cells[link])))
                self.cells[link].extend(cells)
                if per_round_trace is not None:
                    for r, bits in enumerate(cells):
                        per_round_trace[start + r + 1].append(f"link({link[0]}→{link[1]})={bits}")
            inbox = self._inbox[link[1]]
            for env in queue:
                inbox.append((env.src, env.payload))
        self._queues.clear()
        m.rounds_elapsed += step_rounds
        m.steps += 1
        if per_round_trace is not None:
            for r in sorted(per_round_trace):
                print(f"round {r}: " + ",".join(per_round_trace[r]), file=self.trace_stream)
        return step_rounds

    def idle(self, rounds: int) -> None:
        """Let rounds pass with no traffic (fixed-length protocol stages)."""
        self.metrics.rounds_elapsed += rounds

    def collect(self, machine: int) -> list[tuple[int, Any]]:
        """Take and clear everything delivered to ``machine``, as (src,
        payload) pairs; messages from one source keep their send order."""
        got = self._inbox[machine]
        self._inbox[machine] = []
        return got

    def collect_all(self) -> list[list[tuple[int, Any]]]:
        return [self.collect(i) for i in range(self.k)]

    def exchange(self) -> list[list[tuple[int, Any]]]:
        self.run_until_drained()
        return self.collect_all()

    # -- phases and metrics ----------------------------------------------------

    def begin_phase(self) -> None:
        self._phase_start = self.metrics.rounds_elapsed

    def end_phase(self, **stats) -> None:
        if self._phase_start is None:
            return
        used = self.metrics.rounds_elapsed - self._phase_start
        self.metrics.per_phase_rounds.append(used)
        stats["rounds"] = used
        self.metrics.phase_stats.append(stats)
        self._phase_start = None

    def snapshot_metrics(self) -> RoundMetrics:
        return copy.deepcopy(self.metrics)

    def cell_violations(self) -> int:
        return sum(1 for cells in self.cells.values() for c in cells if c > self.B)
