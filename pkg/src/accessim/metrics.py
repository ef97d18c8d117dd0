"""Session-layer performance measures.

HTTP/FTP quality is measured per packet call (page or file): call delay,
average page throughput (mean size over mean delay), and mean page transfer
rate (mean of per-call size/delay ratios).  Video quality is the decodable
frame rate after a startup de-jitter buffer converts excess frame delay
into loss and GoP reference dependencies are resolved.
"""

import math
from dataclasses import dataclass

import numpy as np

from .video import FRAME_B, FRAME_I


class NoSamplesError(Exception):
    """A statistic was requested over an empty record set."""


@dataclass(frozen=True)
class PacketCallRecord:
    subscriber: int
    user: int
    service: str          # "http" | "ftp"
    start: float
    end: float
    bytes: int

    @property
    def delay(self):
        return self.end - self.start


def filter_warmup(records, warmup):
    """Drop every record whose call started before the warmup boundary."""
    return [r for r in records if r.start >= warmup]


def mean_packet_call_delay(records):
    if not records:
        raise NoSamplesError("no packet calls to average")
    return sum(r.delay for r in records) / len(records)


def average_page_throughput(records):
    """bits/s: mean call size over mean call delay."""
    if not records:
        raise NoSamplesError("no packet calls to average")
    mean_bytes = sum(r.bytes for r in records) / len(records)
    mean_delay = mean_packet_call_delay(records)
    return mean_bytes * 8.0 / mean_delay


def mean_page_transfer_rate(records):
    """bits/s: mean of per-call size/delay ratios."""
    if not records:
        raise NoSamplesError("no packet calls to average")
    return sum(r.bytes * 8.0 / r.delay for r in records) / len(records)


@dataclass(frozen=True)
class FrameArrival:
    index: int            # re-based decoding number (emission index)
    time: float
    frame_type: int = FRAME_I
    complete: bool = True


@dataclass(frozen=True)
class DejitterParams:
    frame_period: float
    startup_delay: float = 5.0
    anchor_index: int = 0
    anchor_time: float = 0.0


def dejitter_filter(arrivals, params):
    """Startup-buffer delay-to-loss conversion.

    Playout anchors on the startup I frame (params.anchor_*).  A complete
    frame j at or after the anchor is kept iff
    t_j <= t_anchor + frame_period * (j - anchor) + startup_delay;
    arrivals exactly on the deadline are kept.  Frames numbered before the
    anchor are never playable and are dropped.
    """
    i, t_i = params.anchor_index, params.anchor_time
    kept = []
    for frame in arrivals:
        if not frame.complete or frame.index < i:
            continue
        deadline = t_i + params.frame_period * (frame.index - i) + params.startup_delay
        if frame.time <= deadline:
            kept.append(frame)
    return kept


def reference_indices(types):
    """Nearest reference (I/P) frame before and after each position.

    Returns (prev_ref, next_ref) arrays with -1 / n where no reference
    exists on that side.
    """
    types = np.asarray(types, dtype=np.uint8)
    n = len(types)
    pos = np.arange(n)
    is_ref = types != FRAME_B
    prev_incl = np.maximum.accumulate(np.where(is_ref, pos, -1))
    next_incl = np.minimum.accumulate(np.where(is_ref, pos, n)[::-1])[::-1]
    # a reference frame is its own nearest reference; shift to exclude self
    prev_ref = np.where(is_ref, np.concatenate(([-1], prev_incl[:-1])), prev_incl)
    next_ref = np.where(is_ref, np.concatenate((next_incl[1:], [n])), next_incl)
    return prev_ref, next_ref


def decodable_mask(types, kept):
    """Which frames decode: kept, with every reference frame decodable.

    I frames stand alone; P frames chain to the previous reference in
    their GoP; B frames need both the nearest preceding and following
    reference.  Frames before the first I frame never decode.
    """
    types = np.asarray(types, dtype=np.uint8)
    kept = np.asarray(kept, dtype=bool)
    n = len(types)
    decoded = np.zeros(n, dtype=bool)
    if n == 0:
        return decoded

    is_ref = types != FRAME_B
    ref_pos = np.flatnonzero(is_ref)
    if ref_pos.size:
        kept_ref = kept[ref_pos]
        is_i = types[ref_pos] == FRAME_I
        group = np.cumsum(is_i)                 # 0 = before any I frame
        miss = np.cumsum(~kept_ref)
        starts = np.flatnonzero(is_i)
        anchored = group >= 1
        if starts.size:
            start_of = starts[group[anchored] - 1]
            miss_before = np.where(start_of > 0, miss[start_of - 1], 0)
            ok = np.zeros(ref_pos.size, dtype=bool)
            ok[anchored] = (miss[anchored] - miss_before) == 0
            decoded[ref_pos] = ok

    b_pos = np.flatnonzero(~is_ref)
    if b_pos.size:
        prev_ref, next_ref = reference_indices(types)
        prev_ok = np.zeros(n, dtype=bool)
        has_prev = prev_ref[b_pos] >= 0
        prev_ok[b_pos[has_prev]] = decoded[prev_ref[b_pos[has_prev]]]
        # a B frame binds only to references that were actually sent: with
        # no following reference in the sequence (stream end) the forward
        # dependency is vacuous, but with no preceding one it cannot decode
        next_ok = np.ones(n, dtype=bool)
        has_next = next_ref[b_pos] < n
        next_ok[b_pos[has_next]] = decoded[next_ref[b_pos[has_next]]]
        decoded[b_pos] = kept[b_pos] & prev_ok[b_pos] & next_ok[b_pos]
    return decoded


def decodable_frame_rate(types, kept, start_index=0):
    """Decoded share of frames sent from start_index onward."""
    decoded = decodable_mask(types, kept)
    sent = len(decoded) - start_index
    if sent <= 0:
        raise NoSamplesError("no frames sent in the measured window")
    return float(decoded[start_index:].sum()) / sent


@dataclass
class VideoFlowStats:
    frames_sent: int
    frames_complete: int
    frames_discarded: int
    frames_decoded: int
    dfr: float


def video_flow_stats(types, start_time, frame_period, arrivals, warmup,
                     startup_delay=5.0):
    """Per-flow DFR accounting over the post-warmup window.

    types: frame type of every emission (index = re-based decode number);
    arrivals: {emission index: arrival time of the final fragment} for
    frames that arrived complete.  Playback anchors on the first complete
    I frame emitted after warmup; frames from that anchor on count as sent.
    Without an anchor the flow scores DFR 0 over the whole window.
    """
    types = np.asarray(types, dtype=np.uint8)
    n = len(types)
    first = max(0, math.ceil((warmup - start_time) / frame_period - 1e-9))
    if first >= n:
        return VideoFlowStats(0, 0, 0, 0, float("nan"))

    anchor = -1
    for idx in range(first, n):
        if types[idx] == FRAME_I and idx in arrivals:
            anchor = idx
            break
    if anchor < 0:
        sent = n - first
        return VideoFlowStats(sent, 0, 0, 0, 0.0)

    params = DejitterParams(frame_period, startup_delay, anchor,
                            arrivals[anchor])
    window = [FrameArrival(j, arrivals[j]) for j in sorted(arrivals)
              if j >= anchor]
    kept_frames = dejitter_filter(window, params)
    kept = np.zeros(n, dtype=bool)
    kept[[f.index for f in kept_frames]] = True
    decoded = decodable_mask(types, kept)

    sent = n - anchor
    complete = len(window)
    discarded = complete - len(kept_frames)
    n_decoded = int(decoded[anchor:].sum())
    return VideoFlowStats(sent, complete, discarded, n_decoded,
                          n_decoded / sent)


# Metric columns in report order, with the direction that counts as better.
METRIC_DIRECTIONS = {
    "http_delay_s": "lower",
    "http_page_throughput_bps": "higher",
    "http_transfer_rate_bps": "higher",
    "ftp_delay_s": "lower",
    "ftp_page_throughput_bps": "higher",
    "ftp_transfer_rate_bps": "higher",
    "video_dfr": "higher",
}

METRIC_COLUMNS = list(METRIC_DIRECTIONS)


def replication_metrics(records, video_stats):
    """Per-replication metric vector: user-level means averaged over users.

    records: post-warmup PacketCallRecords for the measured users;
    video_stats: list of VideoFlowStats, one per measured video flow.
    Metrics with no contributing user come out as NaN.
    """
    out = {}
    for service, prefix in (("http", "http"), ("ftp", "ftp")):
        by_user = {}
        for rec in records:
            if rec.service == service:
                by_user.setdefault((rec.subscriber, rec.user), []).append(rec)
        delays, throughputs, rates = [], [], []
        for recs in by_user.values():
            delays.append(mean_packet_call_delay(recs))
            throughputs.append(average_page_throughput(recs))
            rates.append(mean_page_transfer_rate(recs))
        out[f"{prefix}_delay_s"] = float(np.mean(delays)) if delays else float("nan")
        out[f"{prefix}_page_throughput_bps"] = (
            float(np.mean(throughputs)) if throughputs else float("nan"))
        out[f"{prefix}_transfer_rate_bps"] = (
            float(np.mean(rates)) if rates else float("nan"))
    dfrs = [s.dfr for s in video_stats if s.frames_sent > 0 and not math.isnan(s.dfr)]
    out["video_dfr"] = float(np.mean(dfrs)) if dfrs else float("nan")
    return out
