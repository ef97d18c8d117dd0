import numpy as np
import pytest

from accessim.engine import Simulator
from accessim.transport import (DatagramVideoFlow, ReliableTransfer,
                                TransportOptions, fragment_sizes)
from accessim.video import VideoStreamer, gen_synthetic_trace


class FluidPath:
    """Single bottleneck link test double: FIFO serialization at rate_bps
    with a byte-bounded queue (tail drop), plus symmetric propagation."""

    def __init__(self, sim, rate_bps, rtt, queue_cap=None):
        self.sim = sim
        self.rate = rate_bps
        self.rtt = rtt
        self.ack_delay = rtt / 2.0
        self.queue_cap = queue_cap
        self.free = 0.0
        self.drops = 0
        self.sent_log = []

    def send(self, wire, cb, meta):
        now = self.sim.now
        backlog = max(0.0, self.free - now) * self.rate / 8.0
        if self.queue_cap is not None and backlog + wire > self.queue_cap:
            self.drops += 1
            return
        start = max(now, self.free)
        self.free = start + wire * 8.0 / self.rate
        self.sent_log.append((now, wire))
        self.sim.schedule(self.free + self.rtt / 2.0, cb, meta)


class TestFragmentation:
    def test_single_fragment(self):
        assert fragment_sizes(1000) == [1040]

    def test_three_fragments(self):
        assert fragment_sizes(3000) == [1500, 1500, 120]

    def test_overhead_accounting(self):
        rng = np.random.default_rng(6)
        for size in rng.integers(1, 100_000, 200):
            frags = fragment_sizes(int(size))
            assert sum(frags) == size + 40 * len(frags)
            assert all(f <= 1500 for f in frags)

    def test_rejects_empty_frame(self):
        with pytest.raises(ValueError):
            fragment_sizes(0)


def _transfer(size, rate=100e6, rtt=0.010, queue_cap=None, opts=None):
    sim = Simulator()
    path = FluidPath(sim, rate, rtt, queue_cap)
    done = {}
    xfer = ReliableTransfer(sim, path, size, lambda t: done.setdefault("t", t),
                            opts=opts or TransportOptions())
    xfer.start(0.0)
    sim.run_until(10_000.0)
    return sim, path, xfer, done.get("t")


class TestReliableTransfer:
    def test_single_segment_completion_time(self):
        rtt = 0.010
        size = 1460
        _, _, _, end = _transfer(size, rate=100e6, rtt=rtt)
        serialization = (size + 40) * 8 / 100e6
        assert end == pytest.approx(1.5 * rtt + serialization, abs=1e-6)

    def test_exact_byte_conservation(self):
        rng = np.random.default_rng(12)
        for size in [1, 1460, 1461, 100_000, *rng.integers(1, 3_000_000, 6)]:
            _, _, xfer, end = _transfer(int(size))
            assert end is not None
            assert xfer.delivered == int(size)

    def test_conservation_with_losses(self):
        rng = np.random.default_rng(13)
        for size in rng.integers(50_000, 2_000_000, 4):
            _, path, xfer, end = _transfer(int(size), rate=8e6,
                                           queue_cap=30_000)
            assert end is not None
            assert xfer.delivered == int(size)
            assert path.drops > 0 or xfer.counters.get("retransmissions", 0) == 0

    def test_long_transfer_saturates_bottleneck(self):
        # fluid limit: huge buffer, no loss; steady throughput -> line rate
        rate = 5e6
        size = 4_000_000
        _, _, _, end = _transfer(size, rate=rate)
        wire_factor = (1460 + 40) / 1460
        ideal = size * 8 * wire_factor / rate
        assert end == pytest.approx(ideal, rel=0.05)

    def test_slow_start_grows_exponentially(self):
        sim = Simulator()
        path = FluidPath(sim, 1e9, 0.010)
        xfer = ReliableTransfer(sim, path, 3_000_000, lambda t: None,
                                opts=TransportOptions(initial_ssthresh=1e9),
                                log_cwnd=True)
        xfer.start(0.0)
        sim.run_until(0.075)   # handshake + ~6 round trips
        peak = max(c for _, c, _ in xfer.cwnd_log)
        # doubling reaches >= 64 segments by then; additive growth could not
        assert peak >= 64 * 1460

    def test_per_ack_window_rules(self):
        sim = Simulator()
        path = FluidPath(sim, 1e9, 0.010)
        xfer = ReliableTransfer(sim, path, 10_000_000, lambda t: None)
        xfer.nxt = 4
        # slow start: window grows by the bytes acked
        xfer.cwnd, xfer.ssthresh = 4 * 1460.0, 65536.0
        xfer._on_ack(2)
        assert xfer.cwnd == 4 * 1460.0 + 2 * 1460.0
        # congestion avoidance: one segment per window's worth of acks
        xfer.cwnd = xfer.ssthresh = 10 * 1460.0
        xfer.nxt = 20
        xfer._on_ack(4)
        assert xfer.cwnd == pytest.approx(
            10 * 1460.0 + 1460.0 * (2 * 1460.0) / (10 * 1460.0))

    def test_loss_halves_window(self):
        sim = Simulator()
        path = FluidPath(sim, 8e6, 0.010, queue_cap=20_000)
        xfer = ReliableTransfer(sim, path, 2_000_000, lambda t: None,
                                log_cwnd=True)
        xfer.start(0.0)
        sim.run_until(10_000.0)
        assert xfer.counters.get("retransmissions", 0) > 0
        drops = [i for i in range(1, len(xfer.cwnd_log))
                 if xfer.cwnd_log[i][1] < 0.8 * xfer.cwnd_log[i - 1][1]]
        assert drops, "expected at least one multiplicative decrease"
        i = drops[0]
        before = xfer.cwnd_log[i - 1][1]
        after = xfer.cwnd_log[i][1]
        assert after <= 0.75 * before

    def test_inflight_never_exceeds_cwnd(self):
        sim = Simulator()
        path = FluidPath(sim, 8e6, 0.010, queue_cap=25_000)
        observed = []
        seen = {"max": 0}
        orig = FluidPath.send

        def spying(self_path, wire, cb, meta):
            # new data only: recovery retransmits are exempt from the
            # window check while the pre-loss flight drains
            if meta >= seen["max"]:
                seen["max"] = meta + 1
                observed.append((xfer._flight() + wire - 40, xfer.cwnd))
            orig(self_path, wire, cb, meta)

        path.send = spying.__get__(path)
        xfer = ReliableTransfer(sim, path, 1_000_000, lambda t: None)
        xfer.start(0.0)
        sim.run_until(10_000.0)
        assert xfer.delivered == 1_000_000
        assert observed
        assert all(flight <= cwnd + 1e-6 for flight, cwnd in observed)

    def test_two_transfers_share_fairly(self):
        # AIMD fairness through one bottleneck with tail drop
        sim = Simulator()
        rate = 16e6
        path = FluidPath(sim, rate, 0.010, queue_cap=120_000)
        ends = {}
        size = 12_000_000
        a = ReliableTransfer(sim, path, size, lambda t: ends.setdefault("a", t))
        b = ReliableTransfer(sim, path, size, lambda t: ends.setdefault("b", t))
        a.start(0.0)
        b.start(0.5)
        sim.run_until(100_000.0)
        assert "a" in ends and "b" in ends
        rate_a = size / ends["a"]
        rate_b = size / (ends["b"] - 0.5)
        assert abs(rate_a - rate_b) / max(rate_a, rate_b) < 0.20


class TestVideoFlow:
    def test_open_loop_periodic_and_complete(self):
        sim = Simulator()
        path = FluidPath(sim, 100e6, 0.010)
        trace = gen_synthetic_trace(12, 2, 2e6, 240, seed=3)
        streamer = VideoStreamer(trace=trace, rng=np.random.default_rng(1))
        flow = DatagramVideoFlow(sim, path, streamer)
        flow.start(0.0, stop=10.0)
        sim.run_until(20.0)
        n_sent = len(streamer.emitted_types)
        assert n_sent == 300           # 10 s at 30 fps
        assert len(flow.arrivals) == n_sent
        emission_gaps = np.diff([t for t, _ in path.sent_log])
        assert emission_gaps.min() >= 0.0

    def test_lost_fragment_means_lost_frame(self):
        sim = Simulator()
        path = FluidPath(sim, 100e6, 0.010)
        trace = gen_synthetic_trace(12, 2, 8e6, 120, seed=4)
        streamer = VideoStreamer(trace=trace, rng=np.random.default_rng(2))
        flow = DatagramVideoFlow(sim, path, streamer)

        dropped = {"done": False}
        orig = path.send

        def lossy(wire, cb, meta):
            if not dropped["done"] and meta == 5:
                dropped["done"] = True
                return
            orig(wire, cb, meta)

        path.send = lossy
        flow.start(0.0, stop=2.0)
        sim.run_until(5.0)
        assert 5 not in flow.arrivals
        assert len(flow.arrivals) == len(streamer.emitted_types) - 1

    def test_source_never_throttles(self):
        # emissions keep their period even when the path is overloaded
        sim = Simulator()
        path = FluidPath(sim, 1e6, 0.010, queue_cap=20_000)
        trace = gen_synthetic_trace(12, 2, 8e6, 120, seed=5)
        streamer = VideoStreamer(trace=trace, rng=np.random.default_rng(3))
        flow = DatagramVideoFlow(sim, path, streamer)
        flow.start(0.0, stop=4.0)
        sim.run_until(30.0)
        assert len(streamer.emitted_types) == 120
        assert path.drops > 0
