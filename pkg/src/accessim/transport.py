"""Simplified transport layer.

HTTP/FTP objects ride a closed-loop reliable transfer with Reno-style
congestion control: slow start doubles the window each round trip,
congestion avoidance adds one segment per round trip, a triple duplicate
ack halves the window, and a retransmission timeout collapses it to one
segment.  Acks travel an uncongested return path.  Video frames ride an
open-loop datagram flow that fragments each frame to the MTU and never
retransmits or throttles.

The network is reached through a path object offering ``send(wire_bytes,
deliver_cb, meta)`` downstream plus ``ack_delay`` and ``rtt`` attributes;
``deliver_cb(meta)`` fires at the receiver when the packet survives.
"""

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class TransportOptions:
    mss: int = 1460              # segment payload bytes
    header: int = 40             # per-packet header overhead on the wire
    initial_cwnd_segments: int = 2
    initial_ssthresh: float = 65536.0
    rto_min: float = 1.0
    rto_backoff_cap: float = 64.0

    def rto(self, rtt):
        return max(self.rto_min, 4.0 * rtt)


def fragment_sizes(frame_bytes, payload_mtu=1460, header=40):
    """Wire sizes of the datagrams carrying one frame.

    ceil(frame/payload_mtu) fragments, each with fixed header overhead, so
    total wire bytes = frame bytes + header * fragment count.
    """
    if frame_bytes <= 0:
        raise ValueError("frame must carry at least one byte")
    n = math.ceil(frame_bytes / payload_mtu)
    sizes = [payload_mtu + header] * (n - 1)
    sizes.append(frame_bytes - (n - 1) * payload_mtu + header)
    return sizes


class ReliableTransfer:
    """One object download over a fresh connection.

    start() spends one round trip on connection setup plus the request,
    then the server releases segments subject to the congestion window.
    ``on_complete(end_time)`` fires when the receiver has every byte.
    """

    __slots__ = (
        "sim", "path", "size", "opts", "on_complete", "counters",
        "n_segs", "una", "nxt", "cwnd", "ssthresh", "in_recovery", "recover",
        "dup", "rto", "backoff", "last_progress", "timer", "srv_done",
        "high_water",
        "rcv_next", "got", "delivered", "rcv_done", "cwnd_log", "log_cwnd",
    )

    def __init__(self, sim, path, size, on_complete, opts=TransportOptions(),
                 counters=None, log_cwnd=False):
        if size <= 0:
            raise ValueError("object size must be positive")
        self.sim = sim
        self.path = path
        self.size = int(size)
        self.opts = opts
        self.on_complete = on_complete
        self.counters = counters if counters is not None else {}
        self.n_segs = math.ceil(self.size / opts.mss)
        self.una = 0
        self.nxt = 0
        self.cwnd = float(opts.initial_cwnd_segments * opts.mss)
        self.ssthresh = float(opts.initial_ssthresh)
        self.in_recovery = False
        self.recover = 0
        self.dup = 0
        self.high_water = 0
        self.rto = opts.rto(path.rtt)
        self.backoff = 1.0
        self.last_progress = 0.0
        self.timer = None
        self.srv_done = False
        self.rcv_next = 0
        self.got = set()
        self.delivered = 0
        self.rcv_done = False
        self.log_cwnd = log_cwnd
        self.cwnd_log = [] if log_cwnd else None

    # -- server side ---------------------------------------------------

    def start(self, at):
        self.sim.schedule(at + self.path.rtt, self._established)

    def _established(self, _=None):
        self.last_progress = self.sim.now
        self.timer = self.sim.schedule_after(self.rto, self._timer_event)
        self._pump()

    def _offset(self, seg):
        return min(seg * self.opts.mss, self.size)

    def _payload(self, seg):
        return self._offset(seg + 1) - self._offset(seg)

    def _flight(self):
        return self._offset(self.nxt) - self._offset(self.una)

    def _send(self, seg):
        if seg < self.high_water:
            self.counters["retransmissions"] = self.counters.get("retransmissions", 0) + 1
        else:
            self.high_water = seg + 1
        wire = self._payload(seg) + self.opts.header
        self.path.send(wire, self._on_segment, seg)

    def _pump(self):
        while self.nxt < self.n_segs:
            if self._flight() + self._payload(self.nxt) > self.cwnd + 1e-9:
                break
            self._send(self.nxt)
            self.nxt += 1
        if self.log_cwnd:
            self.cwnd_log.append((self.sim.now, self.cwnd, self.ssthresh))

    def _on_ack(self, ackno):
        if self.srv_done:
            return
        opts = self.opts
        if ackno > self.una:
            acked = self._offset(ackno) - self._offset(self.una)
            self.una = ackno
            self.last_progress = self.sim.now
            self.backoff = 1.0
            self.dup = 0
            if self.in_recovery:
                if ackno >= self.recover:
                    self.in_recovery = False
                    self.cwnd = self.ssthresh
                else:
                    self._send(self.una)
            elif self.cwnd < self.ssthresh:
                self.cwnd += acked
            else:
                self.cwnd += opts.mss * acked / self.cwnd
            if self.una >= self.n_segs:
                self.srv_done = True
                if self.timer is not None:
                    self.sim.cancel(self.timer)
                return
            self._pump()
        else:
            self.dup += 1
            if self.in_recovery:
                self.cwnd += opts.mss
                self._pump()
            elif self.dup == 3:
                self.ssthresh = max(self._flight() / 2.0, 2.0 * opts.mss)
                self.cwnd = self.ssthresh + 3.0 * opts.mss
                self.in_recovery = True
                self.recover = self.nxt
                self._send(self.una)
                self._pump()

    def _timer_event(self, _=None):
        if self.srv_done:
            return
        deadline = self.last_progress + self.rto * self.backoff
        if self.sim.now >= deadline - 1e-12:
            self.ssthresh = max(self._flight() / 2.0, 2.0 * self.opts.mss)
            self.cwnd = float(self.opts.mss)
            self.in_recovery = False
            self.dup = 0
            self.nxt = self.una            # resend everything outstanding
            self.backoff = min(self.backoff * 2.0, self.opts.rto_backoff_cap)
            self.last_progress = self.sim.now
            self.counters["timeouts"] = self.counters.get("timeouts", 0) + 1
            self._pump()
            deadline = self.last_progress + self.rto * self.backoff
        self.timer = self.sim.schedule(deadline, self._timer_event)

    # -- receiver side ---------------------------------------------------

    def _on_segment(self, seg):
        if seg not in self.got:
            self.got.add(seg)
            while self.rcv_next in self.got:
                self.got.discard(self.rcv_next)
                self.delivered += self._payload(self.rcv_next)
                self.rcv_next += 1
        self.sim.schedule(self.sim.now + self.path.ack_delay, self._ack_event,
                          self.rcv_next)
        if not self.rcv_done and self.delivered >= self.size:
            self.rcv_done = True
            self.on_complete(self.sim.now)

    def _ack_event(self, ackno):
        self._on_ack(ackno)


class DatagramVideoFlow:
    """Open-loop video sender/receiver pair.

    The streamer's frames are fragmented and injected strictly on the
    frame period regardless of network state.  A frame counts as received
    only when every fragment has arrived; ``arrivals`` then maps emission
    index to that completion time.
    """

    __slots__ = ("sim", "path", "streamer", "payload_mtu", "header",
                 "arrivals", "_pending", "_stop")

    def __init__(self, sim, path, streamer, payload_mtu=1460, header=40):
        self.sim = sim
        self.path = path
        self.streamer = streamer
        self.payload_mtu = payload_mtu
        self.header = header
        self.arrivals = {}
        self._pending = {}
        self._stop = math.inf

    def start(self, at, stop=math.inf):
        self.streamer.start_time = at
        self._stop = stop
        self.sim.schedule(at, self._emit)

    def _emit(self, _=None):
        size, idx, _when = self.streamer.next_emission()
        frags = fragment_sizes(size, self.payload_mtu, self.header)
        self._pending[idx] = len(frags)
        for wire in frags:
            self.path.send(wire, self._on_fragment, idx)
        nxt = self.streamer.emission_time(idx + 1)
        if nxt < self._stop:
            self.sim.schedule(nxt, self._emit)

    def _on_fragment(self, idx):
        left = self._pending.get(idx)
        if left is None:
            return
        if left == 1:
            del self._pending[idx]
            self.arrivals[idx] = self.sim.now
        else:
            self._pending[idx] = left - 1
