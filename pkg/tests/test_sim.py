import io

import numpy as np
import pytest

from kmachine.connectivity import Config, run_connectivity
from kmachine.graph import generate, rvp_partition
from kmachine.sim import BandwidthConfig, MessageEnvelope, Network


def env(src, dst, bits, payload=None):
    return MessageEnvelope(src, dst, payload, bits)


def test_bandwidth_config():
    cfg = BandwidthConfig(n=1024)
    assert cfg.B == 4 * 10 ** 2
    assert cfg.header_bits == 40 and cfg.frame_header_bits == 20
    assert BandwidthConfig(n=1024, c_B=1).B == 100


def test_single_small_message():
    net = Network(2, 16, bits_per_round=100)
    net.enqueue(env(0, 1, 10))
    assert net.run_until_drained() == 1


def test_large_message_on_one_link():
    # 250 bits: three frames of at most 100 bits (frame headers ride along)
    net = Network(2, 4, bits_per_round=100)
    net.enqueue(env(0, 1, 250))
    assert net.run_until_drained() == 3
    assert net.snapshot_metrics().rounds_elapsed == 3
    assert net.metrics.max_link_bits_in_round <= 100


def test_independent_links_in_parallel():
    net = Network(20, 64, bits_per_round=100)
    for i in range(10):
        net.enqueue(env(i, 10 + i, 50))
    assert net.run_until_drained() == 1


def test_empty_drain():
    net = Network(3, 8)
    assert net.run_until_drained() == 0
    assert net.snapshot_metrics().rounds_elapsed == 0


def test_fan_out_one_round():
    k = 8
    net = Network(k, 64)
    for d in range(1, k):
        net.enqueue(env(0, d, net.B))
    assert net.run_until_drained() == 1


def test_atomic_messages_and_fifo():
    net = Network(2, 4, bits_per_round=100, keep_cells=True)
    for i, bits in enumerate([60, 60, 30, 70]):
        net.enqueue(env(0, 1, bits, i))
    # 60 | 60+30 | 70
    assert net.run_until_drained() == 3
    assert net.cells[(0, 1)] == [60, 90, 70]
    assert [pl for _, pl in net.collect(1)] == [0, 1, 2, 3]


def test_local_delivery_is_free():
    net = Network(3, 8)
    net.send(1, 1, "x", 10_000)
    assert net.run_until_drained() == 0
    assert net.collect(1) == [(1, "x")]
    assert net.metrics.total_bits == 0


def test_bad_links_rejected():
    net = Network(3, 8)
    with pytest.raises(ValueError):
        net.enqueue(env(0, 3, 5))
    with pytest.raises(ValueError):
        net.enqueue(env(0, 1, 0))


def test_send_charges_header():
    net = Network(2, 1024)
    net.send(0, 1, None, 10)
    net.run_until_drained()
    assert net.metrics.total_bits == 10 + net.header_bits


def test_fragment_cells_never_exceed_cap():
    rng = np.random.default_rng(3)
    net = Network(4, 64, keep_cells=True)
    for _ in range(300):
        s, d = rng.choice(4, 2, replace=False)
        net.enqueue(env(int(s), int(d), int(rng.integers(1, 5 * net.B))))
    net.run_until_drained()
    assert net.cell_violations() == 0
    assert net.metrics.bandwidth_violations == 0
    for link, cells in net.cells.items():
        assert sum(cells) == net.metrics.bits_per_link[link]


def test_trace_lines():
    buf = io.StringIO()
    net = Network(3, 8, bits_per_round=50, trace=True, trace_stream=buf)
    net.enqueue(env(0, 1, 40))
    net.enqueue(env(2, 1, 30))
    net.run_until_drained()
    assert buf.getvalue().strip() == "round 1: link(0→1)=40,link(2→1)=30"


def test_proxy_aggregation_round_bound():
    # n/k messages per machine to uniformly random destinations
    n, k = 1024, 8
    net0 = Network(k, n)
    s = net0.B // 2
    ideal = -(-(n // k) * s // ((k - 1) * net0.B))
    for seed in range(100):
        rng = np.random.default_rng(seed)
        net = Network(k, n)
        for m in range(k):
            for dst in rng.integers(0, k, n // k).tolist():
                net.enqueue(env(m, dst, s))
        r = net.run_until_drained()
        assert r <= 4 * ideal


def test_metrics_consistency_after_connectivity():
    g = generate("gnp(512,0.05)", 1)
    res = run_connectivity(g, rvp_partition(g, 8, 1), Config(aseed=1))
    m = res.metrics
    B = Network(8, 512).B
    assert all(v <= B * m.rounds_elapsed for v in m.bits_per_link.values())
    assert sum(m.per_phase_rounds) <= m.rounds_elapsed


def test_determinism_of_metrics():
    g = generate("gnp(128,0.05)", 2)
    part = rvp_partition(g, 4, 2)
    a = run_connectivity(g, part, Config(aseed=9))
    b = run_connectivity(g, part, Config(aseed=9))
    assert np.array_equal(a.labels, b.labels)
    assert a.metrics == b.metrics
