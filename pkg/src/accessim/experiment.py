"""Replication orchestration, CSV emission, and comparison workflows."""

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .accessnet import AccessNetwork
from .config import ConfigError, with_subscribers, with_users
from .engine import Simulator, derive_stream
from .metrics import (METRIC_COLUMNS, METRIC_DIRECTIONS, PacketCallRecord,
                      replication_metrics, video_flow_stats)
from .noninferiority import (SampleSet, ToleranceSpec, find_max_N_eqv,
                             find_max_n_eqv, iut_combine, test_noninferior,
                             tolerance_from_reference)
from .traffic import FtpSession, HttpSession
from .transport import DatagramVideoFlow, ReliableTransfer
from .video import VideoStreamer, bundled_trace, load_trace

JOBS_ENV = "ACCESSIM_JOBS"

CSV_SCHEMA_VERSION = 1

COUNTER_COLUMNS = ["tbf_drops", "retransmissions", "timeouts",
                   "frames_sent", "frames_lost", "frames_discarded"]

SUMMARY_COLUMNS = (["config_id", "replication", "tgr_bps", "tbs_bytes",
                    "peak_bps", "scheduler", "subscribers",
                    "users_per_subscriber"] + METRIC_COLUMNS + COUNTER_COLUMNS)

CALL_COLUMNS = ["config_id", "replication", "group", "subscriber", "user",
                "service", "start_s", "end_s", "bytes"]

VIDEO_COLUMNS = ["config_id", "replication", "group", "subscriber", "user",
                 "flow", "frames_sent", "frames_complete", "frames_discarded",
                 "frames_decoded", "dfr"]


@dataclass
class RunResult:
    config_id: str
    replication: int
    metrics: dict
    counters: dict
    calls: list            # (group_name, measured, PacketCallRecord)
    video_rows: list       # (group_name, measured, sub, user, flow, VideoFlowStats)
    departure_logs: list   # (sub, times, sizes, TbfParams) when logging is on


def _trace_for(name):
    if name in ("cif", "hd"):
        return bundled_trace(name)
    return load_trace(name)


def run_replication(config, rep):
    """One seeded, self-contained simulation run."""
    sim = Simulator()
    seed = config.master_seed

    sub_group = []
    for gi, g in enumerate(config.groups):
        sub_group.extend([gi] * g.subscribers)
    shaper_params = []
    for gi in sub_group:
        tbf = config.group_tbf(config.groups[gi])
        shaper_params.append(
            None if tbf is None
            else (tbf.tgr, tbf.tbs, tbf.peak_rate, tbf.queue_capacity))

    net = AccessNetwork(sim, config.rates, shaper_params,
                        scheduler=config.scheduler,
                        log_departures=config.log_departures,
                        measure_from=config.warmup)

    counters = {}
    records = []
    video_flows = []
    traces = {g.trace: _trace_for(g.trace) for g in config.groups}

    opts = config.transport

    def make_fetcher(path):
        def fetch(size, request_bytes, on_done):
            nbytes = max(1, round(size))
            xfer = ReliableTransfer(sim, path, nbytes,
                                    on_complete=lambda _t: on_done(nbytes),
                                    opts=opts, counters=counters)
            xfer.start(sim.now)
        return fetch

    def make_recorder(gi, sub, user, service):
        group = config.groups[gi]

        def on_call(start, end, nbytes):
            records.append((group.name, group.measured,
                            PacketCallRecord(sub, user, service, start, end,
                                             nbytes)))
        return on_call

    for sub, gi in enumerate(sub_group):
        g = config.groups[gi]
        path = net.path(sub)
        fetch = make_fetcher(path)
        for user in range(g.users):
            for f in range(g.http_flows):
                rng = derive_stream(seed, rep, f"http.s{sub}.u{user}.f{f}")
                sess = HttpSession(sim, rng, fetch,
                                   make_recorder(gi, sub, user, "http"))
                sess.start(float(rng.uniform(0.0, 5.0)))
            for f in range(g.ftp_flows):
                rng = derive_stream(seed, rep, f"ftp.s{sub}.u{user}.f{f}")
                sess = FtpSession(sim, rng, fetch,
                                  make_recorder(gi, sub, user, "ftp"))
                sess.start(float(rng.uniform(0.0, 5.0)))
            for f in range(g.video_flows):
                rng = derive_stream(seed, rep, f"video.s{sub}.u{user}.f{f}")
                streamer = VideoStreamer(trace=traces[g.trace], rng=rng)
                flow = DatagramVideoFlow(sim, path, streamer,
                                         payload_mtu=opts.mss,
                                         header=opts.header)
                flow.start(0.0, stop=config.duration)
                video_flows.append((g.name, g.measured, sub, user, f,
                                    streamer, flow))

    sim.run_until(config.duration)

    calls = [(gname, measured, rec) for gname, measured, rec in records
             if rec.start >= config.warmup]
    video_rows = []
    for gname, measured, sub, user, f, streamer, flow in video_flows:
        stats = video_flow_stats(streamer.emitted_types,
                                 streamer.start_time,
                                 streamer.trace.frame_period,
                                 flow.arrivals, config.warmup,
                                 startup_delay=config.startup_delay)
        video_rows.append((gname, measured, sub, user, f, stats))

    measured_records = [rec for _, measured, rec in calls if measured]
    measured_video = [row[5] for row in video_rows if row[1]]
    metrics = replication_metrics(measured_records, measured_video)

    window = config.duration - config.warmup
    measured_wire = sum(net.delivered_wire[sub] for sub, gi in enumerate(sub_group)
                        if config.groups[gi].measured)
    run_counters = {
        "tbf_drops": net.total_drops,
        "retransmissions": counters.get("retransmissions", 0),
        "timeouts": counters.get("timeouts", 0),
        "frames_sent": sum(s.frames_sent for s in measured_video),
        "frames_lost": sum(s.frames_sent - s.frames_complete
                           for s in measured_video),
        "frames_discarded": sum(s.frames_discarded for s in measured_video),
        "wire_bps_measured": measured_wire * 8.0 / window,
    }

    departure_logs = []
    if config.log_departures:
        for sub, shaper in enumerate(net.shapers):
            if shaper.log_times is not None:
                tbf = config.group_tbf(config.groups[sub_group[sub]])
                departure_logs.append(
                    (sub, list(shaper.log_times), list(shaper.log_bytes), tbf))

    return RunResult(config.config_id, rep, metrics, run_counters, calls,
                     video_rows, departure_logs)


def _replication_task(args):
    config, rep = args
    return run_replication(config, rep)


def default_jobs():
    env = os.environ.get(JOBS_ENV)
    if env:
        return max(1, int(env))
    return min(os.cpu_count() or 1, 4)


def run_experiment(config, out_dir=None, jobs=None):
    """All replications of one configuration, joined in replication order."""
    config.validate()
    for g in config.groups:
        _trace_for(g.trace)      # fail before simulating if a trace is missing
    jobs = jobs or default_jobs()
    reps = list(range(config.replications))
    if jobs > 1 and len(reps) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_replication_task,
                                    [(config, r) for r in reps]))
    else:
        results = [run_replication(config, r) for r in reps]
    results.sort(key=lambda r: r.replication)
    if out_dir is not None:
        write_csv_outputs(results, config, out_dir)
    return results


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def summary_row(result, config):
    tbf = config.group_tbf(config.groups[0])
    row = {
        "config_id": result.config_id,
        "replication": result.replication,
        "tgr_bps": tbf.tgr if tbf else 0.0,
        "tbs_bytes": tbf.tbs if tbf else 0.0,
        "peak_bps": tbf.peak_rate if tbf else 0.0,
        "scheduler": config.scheduler,
        "subscribers": config.total_subscribers,
        "users_per_subscriber": config.users_per_subscriber,
    }
    row.update(result.metrics)
    row.update(result.counters)
    return row


def write_csv_outputs(results, config, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "schema_version.txt"), "w") as fh:
        fh.write(f"accessim-csv {CSV_SCHEMA_VERSION}\n")
    with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for res in results:
            row = summary_row(res, config)
            w.writerow([_fmt(row[c]) for c in SUMMARY_COLUMNS])
    with open(os.path.join(out_dir, "calls.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CALL_COLUMNS)
        for res in results:
            for gname, _measured, rec in res.calls:
                w.writerow([res.config_id, res.replication, gname,
                            rec.subscriber, rec.user, rec.service,
                            _fmt(rec.start), _fmt(rec.end), rec.bytes])
    with open(os.path.join(out_dir, "video.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(VIDEO_COLUMNS)
        for res in results:
            for gname, _measured, sub, user, f, st in res.video_rows:
                w.writerow([res.config_id, res.replication, gname, sub, user,
                            f, st.frames_sent, st.frames_complete,
                            st.frames_discarded, st.frames_decoded,
                            _fmt(st.dfr)])


class Runner:
    """Executes configurations, reusing results keyed by the full config hash."""

    def __init__(self, jobs=None):
        self.jobs = jobs
        self._cache = {}

    def run(self, config):
        key = config.hash()
        if key not in self._cache:
            self._cache[key] = run_experiment(config, jobs=self.jobs)
        return self._cache[key]


def sample_sets(results, skip_nan_metrics=True):
    """Per-metric SampleSets across a configuration's replications."""
    out = {}
    for metric in METRIC_COLUMNS:
        values = [res.metrics[metric] for res in results]
        if any(math.isnan(v) for v in values):
            if skip_nan_metrics and all(math.isnan(v) for v in values):
                continue
            raise ValueError(f"metric {metric} has NaN values in some replications")
        out[metric] = SampleSet(metric, tuple(values),
                                METRIC_DIRECTIONS[metric])
    return out


@dataclass
class ComparisonReport:
    candidate_id: str
    reference_id: str
    outcome: object
    spec: ToleranceSpec


def run_comparison(candidate, reference, spec=ToleranceSpec(), runner=None,
                   out_dir=None):
    """Multivariate non-inferiority comparison of two configurations."""
    if candidate.users_per_subscriber != reference.users_per_subscriber:
        raise ConfigError("candidate and reference must share users per subscriber")
    if candidate.rates != reference.rates:
        raise ConfigError("candidate and reference must share network rates")
    runner = runner or Runner()
    cand_sets = sample_sets(runner.run(candidate))
    ref_sets = sample_sets(runner.run(reference))
    if set(cand_sets) != set(ref_sets):
        raise ConfigError(
            f"metric sets differ: {sorted(cand_sets)} vs {sorted(ref_sets)}")
    verdicts = []
    for metric in METRIC_COLUMNS:
        if metric not in cand_sets:
            continue
        delta = tolerance_from_reference(ref_sets[metric], spec)
        verdicts.append(test_noninferior(cand_sets[metric], ref_sets[metric],
                                         delta, spec.alpha))
    report = ComparisonReport(candidate.config_id, reference.config_id,
                              iut_combine(verdicts), spec)
    if out_dir is not None:
        write_comparison(report, out_dir)
    return report


def format_comparison(report):
    lines = [
        f"candidate: {report.candidate_id}",
        f"reference: {report.reference_id}",
        f"tolerance: {report.spec.fraction:.0%} of reference mean, "
        f"alpha={report.spec.alpha}",
        "",
        f"{'metric':<26} {'direction':<9} {'delta':>12} {'limit':>12} verdict",
    ]
    for v in report.outcome.verdicts:
        lines.append(f"{v.metric:<26} {v.direction:<9} {v.delta:>12.5g} "
                     f"{v.limit:>12.5g} {'pass' if v.passed else 'FAIL'}")
    lines.append("")
    lines.append(f"overall: {'non-inferior' if report.outcome.passed else 'NOT non-inferior'}")
    return "\n".join(lines)


def write_comparison(report, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "verdicts.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["candidate", "reference", "metric", "direction", "delta",
                    "difference", "limit", "passed"])
        for v in report.outcome.verdicts:
            w.writerow([report.candidate_id, report.reference_id, v.metric,
                        v.direction, _fmt(v.delta), _fmt(v.difference),
                        _fmt(v.limit), v.passed])
        w.writerow([report.candidate_id, report.reference_id, "overall", "",
                    "", "", "", report.outcome.passed])
    with open(os.path.join(out_dir, "report.txt"), "w") as fh:
        fh.write(format_comparison(report) + "\n")


def scan_users(shaped, unshaped, n_max, spec=ToleranceSpec(), runner=None):
    """max(n_eqv): scan users per subscriber, shaped vs unshaped at equal n."""
    runner = runner or Runner()

    def point(n):
        report = run_comparison(with_users(shaped, n), with_users(unshaped, n),
                                spec, runner)
        return report.outcome

    return find_max_n_eqv(point, n_max, spec)


def scan_subscribers(shaped, unshaped, n, N_max, spec=ToleranceSpec(),
                     runner=None):
    """max(N_eqv): scan subscriber count against the unshaped single-
    subscriber reference at the same users per subscriber."""
    runner = runner or Runner()
    shaped_n = with_users(shaped, n)
    reference = with_users(unshaped, n)

    def point(N):
        report = run_comparison(with_subscribers(shaped_n, N), reference,
                                spec, runner)
        return report.outcome

    return find_max_N_eqv(point, N_max, spec)


def write_scan(result, n, out_dir, config_id):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "scan_points.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["config_id", result.variable, "passed"])
        for point in result.points:
            w.writerow([config_id, point.value, point.outcome.passed])
    with open(os.path.join(out_dir, "max_eqv.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["config_id", "n", "max_N_eqv", "total_users"])
        if result.variable == "subscribers":
            w.writerow([config_id, n, result.max_equivalent,
                        n * result.max_equivalent])
