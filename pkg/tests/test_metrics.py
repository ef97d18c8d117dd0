import numpy as np
import pytest

from accessim.metrics import (DejitterParams, FrameArrival, NoSamplesError,
                              PacketCallRecord, average_page_throughput,
                              decodable_frame_rate, decodable_mask,
                              dejitter_filter, filter_warmup,
                              mean_packet_call_delay, mean_page_transfer_rate,
                              reference_indices, replication_metrics,
                              video_flow_stats)
from accessim.video import FRAME_B, FRAME_I, FRAME_P, gop_pattern

I, P, B = FRAME_I, FRAME_P, FRAME_B


def _rec(start, end, nbytes, service="http", sub=0, user=0):
    return PacketCallRecord(sub, user, service, start, end, nbytes)


class TestPacketCallStats:
    def test_mean_delay(self):
        assert mean_packet_call_delay([_rec(0, 1, 10), _rec(5, 8, 10)]) == 2.0

    def test_single_call(self):
        assert mean_packet_call_delay([_rec(2, 4.5, 1)]) == 2.5

    def test_empty_is_explicit(self):
        for fn in (mean_packet_call_delay, average_page_throughput,
                   mean_page_transfer_rate):
            with pytest.raises(NoSamplesError):
                fn([])

    def test_page_throughput_single(self):
        assert average_page_throughput([_rec(0, 1, 10**6)]) == 8e6

    def test_page_throughput_ratio_of_means(self):
        recs = [_rec(0, 1, 10**6), _rec(2, 5, 3 * 10**6)]
        assert average_page_throughput(recs) == 8e6

    def test_throughput_vs_transfer_rate_differ(self):
        recs = [_rec(0, 1, 10**6), _rec(2, 6, 10**6)]
        assert average_page_throughput(recs) == pytest.approx(3.2e6)
        assert mean_page_transfer_rate(recs) == pytest.approx(5e6)

    def test_transfer_rate_equals_throughput_for_single_call(self):
        recs = [_rec(0, 2, 5 * 10**5)]
        assert mean_page_transfer_rate(recs) == average_page_throughput(recs)

    def test_oracle_recomputation(self):
        rng = np.random.default_rng(77)
        starts = rng.uniform(0, 1000, 10_000)
        delays = rng.lognormal(0, 1, 10_000)
        sizes = rng.integers(1, 10**6, 10_000)
        recs = [_rec(s, s + d, int(b))
                for s, d, b in zip(starts, delays, sizes)]
        assert mean_packet_call_delay(recs) == pytest.approx(delays.mean())
        assert average_page_throughput(recs) == pytest.approx(
            sizes.mean() * 8 / delays.mean())
        assert mean_page_transfer_rate(recs) == pytest.approx(
            (sizes * 8 / delays).mean())

    def test_warmup_filter(self):
        recs = [_rec(10, 20, 1), _rec(299.9, 310, 1), _rec(300.0, 301, 1)]
        kept = filter_warmup(recs, 300.0)
        assert [r.start for r in kept] == [300.0]


class TestDejitter:
    PARAMS = DejitterParams(frame_period=1 / 30, startup_delay=5.0,
                            anchor_index=0, anchor_time=10.0)

    def _deadline(self, j):
        p = self.PARAMS
        return p.anchor_time + p.frame_period * (j - p.anchor_index) + p.startup_delay

    def test_boundary_arrival_kept(self):
        arr = [FrameArrival(0, 10.0), FrameArrival(6, self._deadline(6))]
        kept = dejitter_filter(arr, self.PARAMS)
        assert [f.index for f in kept] == [0, 6]

    def test_single_late_frame_discarded(self):
        arrivals = [FrameArrival(j, 10.0 + j * (1 / 30)) for j in range(50)]
        arrivals[20] = FrameArrival(20, self._deadline(20) + 1e-6)
        kept = dejitter_filter(arrivals, self.PARAMS)
        assert len(kept) == 49
        assert 20 not in [f.index for f in kept]

    def test_incomplete_frames_never_kept(self):
        arr = [FrameArrival(0, 10.0), FrameArrival(1, 10.0, complete=False)]
        assert [f.index for f in dejitter_filter(arr, self.PARAMS)] == [0]

    def test_frames_before_anchor_dropped(self):
        params = DejitterParams(1 / 30, 5.0, anchor_index=5, anchor_time=10.0)
        arr = [FrameArrival(3, 10.01), FrameArrival(5, 10.0), FrameArrival(6, 10.02)]
        assert [f.index for f in dejitter_filter(arr, params)] == [5, 6]

    def test_larger_startup_delay_keeps_superset(self):
        rng = np.random.default_rng(5)
        arrivals = [FrameArrival(j, 10.0 + j / 30 + float(rng.exponential(2.0)))
                    for j in range(400)]
        small = DejitterParams(1 / 30, 2.0, 0, 10.0)
        large = DejitterParams(1 / 30, 6.0, 0, 10.0)
        kept_small = {f.index for f in dejitter_filter(arrivals, small)}
        kept_large = {f.index for f in dejitter_filter(arrivals, large)}
        assert kept_small <= kept_large


# -- independent brute-force decodability oracle -----------------------

def oracle_decodable(types, kept):
    """Dependency closure by direct recursive evaluation."""
    n = len(types)

    def refs(j):
        out = []
        if types[j] == I:
            return out
        prev = None
        for k in range(j - 1, -1, -1):
            if types[k] != B:
                prev = k
                break
        out.append(prev)
        if types[j] == B:
            for k in range(j + 1, n):
                if types[k] != B:
                    out.append(k)
                    break
            # stream ended without a following reference: vacuous
        return out

    memo = {}

    def dec(j):
        if j in memo:
            return memo[j]
        memo[j] = False
        if kept[j]:
            memo[j] = all(r is not None and dec(r) for r in refs(j))
        return memo[j]

    return np.array([dec(j) for j in range(n)], dtype=bool)


class TestDecodability:
    def test_reference_indices(self):
        types = np.array([I, B, B, P, B, B, P], dtype=np.uint8)
        prev_ref, next_ref = reference_indices(types)
        assert list(prev_ref) == [-1, 0, 0, 0, 3, 3, 3]
        assert list(next_ref) == [3, 3, 3, 6, 6, 6, 7]

    def test_all_kept_decodes_everything_after_first_i(self):
        types = np.concatenate([gop_pattern(12, 2)] * 4)
        kept = np.ones(len(types), dtype=bool)
        assert decodable_mask(types, kept).all()

    def test_lost_i_kills_whole_gop(self):
        # two GoPs of 12; the second GoP's I frame is lost
        types = np.concatenate([gop_pattern(12, 2)] * 3)
        kept = np.ones(len(types), dtype=bool)
        kept[12] = False
        decoded = decodable_mask(types, kept)
        # enumeration oracle over that GoP
        want = oracle_decodable(list(types), kept)
        assert np.array_equal(decoded, want)
        assert not decoded[12:24].any()
        # the preceding GoP's trailing B frames reference the lost I too
        assert not decoded[10] and not decoded[11]
        assert decoded[:10].all() and decoded[24:34].all()

    def test_lost_trailing_b_costs_exactly_one(self):
        types = np.concatenate([gop_pattern(12, 2)] * 2)
        kept = np.ones(len(types), dtype=bool)
        kept[11] = False          # trailing B of first GoP
        decoded = decodable_mask(types, kept)
        assert decoded.sum() == len(types) - 1
        assert not decoded[11]

    def test_matches_oracle_on_random_patterns(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            n = int(rng.integers(5, 80))
            types = rng.choice([I, P, B], size=n, p=[0.15, 0.35, 0.5])
            kept = rng.random(n) > 0.25
            got = decodable_mask(types, kept)
            want = oracle_decodable(list(types), list(kept))
            assert np.array_equal(got, want)

    def test_adding_a_frame_never_hurts(self):
        rng = np.random.default_rng(11)
        types = np.concatenate([gop_pattern(16, 3)] * 3)
        kept = rng.random(len(types)) > 0.4
        base = decodable_mask(types, kept)
        missing = np.flatnonzero(~kept)
        for j in missing[:10]:
            more = kept.copy()
            more[j] = True
            grown = decodable_mask(types, more)
            assert (grown | ~base).all()   # base decodable stays decodable

    def test_dfr_bounds_and_perfect_case(self):
        types = np.concatenate([gop_pattern(12, 2)] * 4)
        kept = np.ones(len(types), dtype=bool)
        assert decodable_frame_rate(types, kept) == 1.0
        kept[13] = False
        dfr = decodable_frame_rate(types, kept)
        assert 0.0 <= dfr < 1.0


class TestVideoFlowStats:
    def test_no_i_frame_means_zero_dfr(self):
        types = [P, B, P, B]
        stats = video_flow_stats(types, 0.0, 1 / 30, {0: 0.0, 1: 0.04},
                                 warmup=0.0)
        assert stats.dfr == 0.0
        assert stats.frames_sent == 4

    def test_clean_flow_scores_one(self):
        types = list(gop_pattern(12, 2)) * 5
        arrivals = {j: j / 30 + 0.005 for j in range(len(types))}
        stats = video_flow_stats(types, 0.0, 1 / 30, arrivals, warmup=0.0)
        assert stats.dfr == 1.0
        assert stats.frames_discarded == 0

    def test_warmup_selects_later_anchor(self):
        types = list(gop_pattern(12, 2)) * 5
        arrivals = {j: j / 30 + 0.005 for j in range(len(types))}
        stats = video_flow_stats(types, 0.0, 1 / 30, arrivals, warmup=0.5)
        # first post-warmup emission is index 15; next I frame is index 24
        assert stats.frames_sent == len(types) - 24
        assert stats.dfr == 1.0


class TestReplicationMetrics:
    def test_user_level_averaging(self):
        recs = [_rec(0, 1, 8 * 10**5, "http", sub=0, user=0),
                _rec(0, 2, 8 * 10**5, "http", sub=0, user=1),
                _rec(10, 12, 8 * 10**5, "http", sub=0, user=1)]
        out = replication_metrics(recs, [])
        assert out["http_delay_s"] == pytest.approx((1 + 2) / 2)
        assert np.isnan(out["ftp_delay_s"])
        assert np.isnan(out["video_dfr"])
