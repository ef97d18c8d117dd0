"""Shared access network: classifier, per-subscriber token bucket filters,
feeder scheduler, and distribution links.

Downstream packets traverse: server -> backbone (pure delay at its line
rate; provisioned far above the access load so it never queues) -> access
switch, where a per-subscriber token bucket filter shapes the flow ->
shared feeder link served round-robin (or FIFO) across subscribers ->
per-subscriber distribution link -> user.  The ack/request path back to
the servers is uncongested fixed delay.
"""

from array import array
from collections import deque
from dataclasses import dataclass

import numpy as np


class Packet:
    __slots__ = ("cb", "meta", "wire", "sub")

    def __init__(self, cb, meta, wire, sub):
        self.cb = cb
        self.meta = meta
        self.wire = wire
        self.sub = sub


_EPS_BYTES = 1e-6


class TokenBucketFilter:
    """Single-queue token bucket shaper with peak-rate paced releases.

    Tokens accrue at tgr (bits/s) up to tbs bytes; a packet leaves only
    when the bucket covers its wire size and the peak-rate spacing from
    the previous release has elapsed.  Blocked packets wait in a FIFO of
    cap_bytes; overflow is tail-dropped.
    """

    __slots__ = ("sim", "tgr", "tbs", "peak", "cap", "out", "tokens",
                 "last_update", "queue", "queued_bytes", "next_release",
                 "_service", "drops", "drop_bytes", "log_times", "log_bytes")

    def __init__(self, sim, tgr, tbs, peak_rate, cap_bytes, out, log=False):
        self.sim = sim
        self.tgr = tgr
        self.tbs = float(tbs)
        self.peak = peak_rate
        self.cap = cap_bytes
        self.out = out
        self.tokens = float(tbs)          # bucket starts full
        self.last_update = 0.0
        self.queue = deque()
        self.queued_bytes = 0
        self.next_release = 0.0
        self._service = None
        self.drops = 0
        self.drop_bytes = 0
        self.log_times = array("d") if log else None
        self.log_bytes = array("q") if log else None

    def refill(self, now):
        if now > self.last_update:
            self.tokens = min(self.tbs,
                              self.tokens + self.tgr / 8.0 * (now - self.last_update))
            self.last_update = now
        return self.tokens

    def handle(self, pkt):
        now = self.sim.now
        self.refill(now)
        if (not self.queue and self.tokens + _EPS_BYTES >= pkt.wire
                and now + 1e-12 >= self.next_release):
            self._release(pkt, now)
            return
        if self.queued_bytes + pkt.wire > self.cap:
            self.drops += 1
            self.drop_bytes += pkt.wire
            return
        self.queue.append(pkt)
        self.queued_bytes += pkt.wire
        if self._service is None:
            self._schedule_service(now)

    def _release(self, pkt, now):
        self.tokens = max(0.0, self.tokens - pkt.wire)
        self.next_release = now + pkt.wire * 8.0 / self.peak
        if self.log_times is not None:
            self.log_times.append(now)
            self.log_bytes.append(pkt.wire)
        self.out(pkt)

    def _schedule_service(self, now):
        shortfall = self.queue[0].wire - self.tokens
        ready = now + (shortfall * 8.0 / self.tgr if shortfall > 0 else 0.0)
        self._service = self.sim.schedule(max(ready, self.next_release), self._serve)

    def _serve(self, _=None):
        now = self.sim.now
        self.refill(now)
        head = self.queue[0]
        if self.tokens + _EPS_BYTES >= head.wire and now + 1e-12 >= self.next_release:
            self.queue.popleft()
            self.queued_bytes -= head.wire
            self._release(head, now)
            if self.queue:
                self._schedule_service(now)
            else:
                self._service = None
        else:
            self._schedule_service(now)


class PassThrough:
    """Unshaped stand-in for a TBF: forwards immediately."""

    __slots__ = ("out", "drops", "drop_bytes", "log_times", "log_bytes")

    def __init__(self, out):
        self.out = out
        self.drops = 0
        self.drop_bytes = 0
        self.log_times = None
        self.log_bytes = None

    def handle(self, pkt):
        self.out(pkt)


ROUND_ROBIN = "rr"
FIFO = "fifo"


class FeederLink:
    """Work-conserving shared link serving TBF releases.

    Round-robin cycles the per-subscriber queues packet by packet,
    skipping empty ones; FIFO keeps one shared queue in release order.
    """

    __slots__ = ("sim", "rate", "mode", "out", "busy", "queues", "_shared",
                 "_cursor", "n_subs", "bytes_by_sub", "service_log")

    def __init__(self, sim, rate_bps, mode, n_subs, out, record_order=False):
        if mode not in (ROUND_ROBIN, FIFO):
            raise ValueError(f"unknown scheduler {mode!r}")
        self.sim = sim
        self.rate = rate_bps
        self.mode = mode
        self.out = out
        self.busy = False
        self.n_subs = n_subs
        self.queues = [deque() for _ in range(n_subs)] if mode == ROUND_ROBIN else None
        self._shared = deque() if mode == FIFO else None
        self._cursor = n_subs - 1
        self.bytes_by_sub = [0] * n_subs
        self.service_log = [] if record_order else None

    def enqueue(self, pkt):
        if not self.busy:
            self._start(pkt)
        elif self.mode == ROUND_ROBIN:
            self.queues[pkt.sub].append(pkt)
        else:
            self._shared.append(pkt)

    def _start(self, pkt):
        self.busy = True
        if self.mode == ROUND_ROBIN:
            self._cursor = pkt.sub
        if self.service_log is not None:
            self.service_log.append(pkt.sub)
        self.sim.schedule_after(pkt.wire * 8.0 / self.rate, self._done, pkt)

    def _done(self, pkt):
        self.bytes_by_sub[pkt.sub] += pkt.wire
        self.out(pkt)
        nxt = self._next()
        if nxt is None:
            self.busy = False
        else:
            self._start(nxt)

    def _next(self):
        if self.mode == FIFO:
            return self._shared.popleft() if self._shared else None
        queues = self.queues
        for step in range(1, self.n_subs + 1):
            q = queues[(self._cursor + step) % self.n_subs]
            if q:
                return q.popleft()
        return None


class DistributionLink:
    """Per-subscriber drop segment: FIFO serialization plus propagation."""

    __slots__ = ("sim", "rate", "prop", "free", "on_deliver")

    def __init__(self, sim, rate_bps, prop, on_deliver=None):
        self.sim = sim
        self.rate = rate_bps
        self.prop = prop
        self.free = 0.0
        self.on_deliver = on_deliver

    def deliver(self, pkt):
        start = max(self.sim.now, self.free)
        self.free = start + pkt.wire * 8.0 / self.rate
        self.sim.schedule(self.free + self.prop, self._arrive, pkt)

    def _arrive(self, pkt):
        if self.on_deliver is not None:
            self.on_deliver(pkt)
        pkt.cb(pkt.meta)


@dataclass(frozen=True)
class NetworkRates:
    backbone: float = 100e9
    feeder: float = 100e6
    distribution: float = 100e6
    rtt: float = 0.010

    def __post_init__(self):
        for name in ("backbone", "feeder", "distribution", "rtt"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.backbone < self.feeder:
            raise ValueError("backbone must not be the bottleneck")


class SubscriberPath:
    """Transport-facing injection point for one subscriber's downstream."""

    __slots__ = ("topo", "sub", "rtt", "ack_delay")

    def __init__(self, topo, sub):
        self.topo = topo
        self.sub = sub
        self.rtt = topo.rates.rtt
        self.ack_delay = topo.rates.rtt / 2.0

    def send(self, wire, cb, meta):
        self.topo.inject(self.sub, wire, cb, meta)


class AccessNetwork:
    """Topology of one shared access segment.

    shapers: per-subscriber list of TokenBucketFilter or PassThrough
    parameters, given as (tgr, tbs, peak, cap) tuples or None for
    unshaped.  Measurement of delivered wire bytes starts at `measure_from`.
    """

    def __init__(self, sim, rates, shaper_params, scheduler=ROUND_ROBIN,
                 log_departures=False, measure_from=0.0):
        self.sim = sim
        self.rates = rates
        n = len(shaper_params)
        self.n_subs = n
        self.measure_from = measure_from
        self.delivered_wire = [0] * n
        self.feeder = FeederLink(sim, rates.feeder, scheduler, n, self._to_dist)
        prop = rates.rtt / 4.0
        self._backbone_prop = rates.rtt / 4.0
        self.dists = [DistributionLink(sim, rates.distribution, prop)
                      for _ in range(n)]
        self.shapers = []
        for params in shaper_params:
            if params is None:
                self.shapers.append(PassThrough(self.feeder.enqueue))
            else:
                tgr, tbs, peak, cap = params
                self.shapers.append(TokenBucketFilter(
                    sim, tgr, tbs, peak, cap, self.feeder.enqueue,
                    log=log_departures))

    def path(self, sub):
        return SubscriberPath(self, sub)

    def inject(self, sub, wire, cb, meta):
        pkt = Packet(cb, meta, wire, sub)
        t = self.sim.now + wire * 8.0 / self.rates.backbone + self._backbone_prop
        self.sim.schedule(t, self.shapers[sub].handle, pkt)

    def _to_dist(self, pkt):
        if self.sim.now >= self.measure_from:
            self.delivered_wire[pkt.sub] += pkt.wire
        self.dists[pkt.sub].deliver(pkt)

    @property
    def total_drops(self):
        return sum(s.drops for s in self.shapers)


def token_envelope_violations(times, sizes, rate_bps, depth_bytes):
    """Exact conformance check of a departure log against one (rate, depth)
    envelope: bytes(s, t] <= depth + rate/8 * (t - s) for every s < t.

    Equivalent to feeding the departures through a virtual policer bucket
    that starts full; each underflow is one violation.  The underflow
    tolerance covers time-arithmetic rounding (which scales with rate and
    horizon) and sits far below one packet, the quantum of any real breach.
    """
    rate = rate_bps / 8.0
    level = float(depth_bytes)
    last = 0.0
    violations = 0
    times = list(times)
    span = times[-1] if times else 0.0
    tol = max(0.5, 1e-9 * (depth_bytes + rate * span))
    for t, b in zip(times, sizes):
        level = min(depth_bytes, level + rate * (t - last))
        last = t
        level -= b
        if level < -tol:
            violations += 1
            level = 0.0
    return violations


def grid_envelope_violations(times, sizes, tgr, tbs, peak, mtu_wire,
                             max_points=600):
    """Sliding-grid conformance check over all pairs of grid instants.

    The grid subsamples the release instants (up to max_points of them);
    cumulative departed bytes between every pair must respect both the
    sustained envelope tbs + tgr/8*dt and the peak envelope
    peak/8*dt + mtu_wire.
    """
    times = np.asarray(times, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    if times.size == 0:
        return 0
    cum = np.cumsum(sizes)
    step = max(1, times.size // max_points)
    idx = np.arange(0, times.size, step)
    t = times[idx]
    c = cum[idx]
    # bytes in (s, u]: cum[u] - cum[s] with s before u
    dt = t[None, :] - t[:, None]
    db = c[None, :] - c[:, None]
    upper = np.triu(np.ones_like(dt, dtype=bool), k=1)
    slack = 1e-6 + 1e-9 * np.abs(c[None, :])
    sustained = db > tbs + tgr / 8.0 * dt + slack
    burst = db > peak / 8.0 * dt + mtu_wire + slack
    return int(((sustained | burst) & upper).sum())
