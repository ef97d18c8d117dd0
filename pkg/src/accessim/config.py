"""Experiment configuration: file format, validation, and named presets.

Config files are INI-style sections of key=value pairs.  Rates are bits/s
and sizes bytes; values accept k/M/G decimal suffixes (1 MB = 1e6 bytes).

    [run]
    duration = 1800          ; seconds of simulated time
    warmup = 300             ; records before this are discarded
    replications = 10
    master_seed = 1

    [network]
    backbone_rate = 100G
    feeder_rate = 100M
    distribution_rate = 100M
    rtt = 0.010
    scheduler = rr           ; rr | fifo

    [tbf]                    ; omit the whole section for an unshaped run
    tgr = 2M
    tbs = 100M
    peak_rate = 100M         ; optional, defaults to the access line rate
    queue_capacity = 4M      ; bytes, optional

    [transport]              ; optional; conventional defaults otherwise
    mss = 1460               ; segment payload bytes
    header_bytes = 40        ; per-packet wire overhead
    initial_cwnd_segments = 2
    initial_ssthresh = 64k   ; bytes
    rto_min = 1.0            ; seconds

    [group:main]             ; one or more subscriber groups
    subscribers = 1
    users = 1
    http_flows = 1
    ftp_flows = 1
    video_flows = 1
    trace = cif              ; bundled trace id or a trace file path
    measured = true          ; include this group in the metric vector
    ; per-group shaping overrides: shaped, tgr, tbs, peak_rate, queue_capacity
"""

import configparser
import hashlib
import json
import os
import re
from dataclasses import dataclass, replace

from .accessnet import NetworkRates
from .transport import TransportOptions

DEFAULT_QUEUE_CAPACITY = 4e6


class ConfigError(Exception):
    pass


def parse_quantity(text):
    """Float with optional decimal k/M/G suffix."""
    text = str(text).strip()
    scale = 1.0
    if text and text[-1] in "kMG":
        scale = {"k": 1e3, "M": 1e6, "G": 1e9}[text[-1]]
        text = text[:-1]
    try:
        return float(text) * scale
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


@dataclass(frozen=True)
class TbfParams:
    tgr: float
    tbs: float
    peak_rate: float
    queue_capacity: float = DEFAULT_QUEUE_CAPACITY

    def validate(self, where):
        for name in ("tgr", "tbs", "peak_rate", "queue_capacity"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{where}: {name} must be positive")


@dataclass(frozen=True)
class GroupConfig:
    name: str
    subscribers: int
    users: int
    http_flows: int = 1
    ftp_flows: int = 1
    video_flows: int = 1
    trace: str = "cif"
    measured: bool = True
    shaped: bool = True
    tbf: object = None        # TbfParams or None to inherit the global block

    def validate(self):
        if self.subscribers < 0:
            raise ConfigError(f"group {self.name}: subscribers must be >= 0")
        if self.subscribers and self.users < 1:
            raise ConfigError(f"group {self.name}: users must be >= 1")
        for name in ("http_flows", "ftp_flows", "video_flows"):
            if getattr(self, name) < 0:
                raise ConfigError(f"group {self.name}: {name} must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    config_id: str
    rates: NetworkRates = NetworkRates()
    scheduler: str = "rr"
    tbf: object = None        # global TbfParams, None = unshaped default
    groups: tuple = ()
    duration: float = 10800.0      # full-scale run length
    warmup: float = 1200.0
    replications: int = 10
    master_seed: int = 1
    startup_delay: float = 5.0     # video de-jitter buffer, seconds
    log_departures: bool = False
    transport: TransportOptions = TransportOptions()

    def validate(self):
        if self.duration <= self.warmup:
            raise ConfigError("duration must exceed warmup")
        if self.replications < 2:
            raise ConfigError("need at least 2 replications")
        if self.scheduler not in ("rr", "fifo"):
            raise ConfigError(f"unknown scheduler {self.scheduler!r}")
        if not self.groups:
            raise ConfigError("at least one subscriber group is required")
        total = sum(g.subscribers for g in self.groups)
        if total < 1:
            raise ConfigError("population is empty")
        for g in self.groups:
            g.validate()
            if g.shaped and self.tbf is None and g.tbf is None:
                raise ConfigError(
                    f"group {g.name}: shaped but no tbf parameters given")
        if self.tbf is not None:
            self.tbf.validate("tbf")
        for g in self.groups:
            if g.tbf is not None:
                g.tbf.validate(f"group {g.name}")
        return self

    def group_tbf(self, group):
        """Effective shaper parameters for a group (None = unshaped)."""
        if not group.shaped:
            return None
        return group.tbf if group.tbf is not None else self.tbf

    @property
    def users_per_subscriber(self):
        return self.groups[0].users

    @property
    def total_subscribers(self):
        return sum(g.subscribers for g in self.groups)

    def canonical(self):
        def enc(obj):
            if isinstance(obj, (TbfParams, GroupConfig, NetworkRates,
                                TransportOptions)):
                return {k: enc(v) for k, v in vars(obj).items()}
            if isinstance(obj, tuple):
                return [enc(v) for v in obj]
            return obj
        data = {k: enc(v) for k, v in vars(self).items()}
        return json.dumps(data, sort_keys=True)

    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


_RUN_KEYS = {"duration", "warmup", "replications", "master_seed",
             "startup_delay", "log_departures"}
_NETWORK_KEYS = {"backbone_rate", "feeder_rate", "distribution_rate", "rtt",
                 "scheduler"}
_TBF_KEYS = {"tgr", "tbs", "peak_rate", "queue_capacity"}
_TRANSPORT_KEYS = {"mss", "header_bytes", "initial_cwnd_segments",
                   "initial_ssthresh", "rto_min"}
_GROUP_KEYS = {"subscribers", "users", "http_flows", "ftp_flows",
               "video_flows", "trace", "measured", "shaped"} | _TBF_KEYS


def _check_keys(section, keys, allowed):
    unknown = set(keys) - allowed
    if unknown:
        raise ConfigError(f"[{section}]: unknown keys {sorted(unknown)}")


def _parse_bool(text, where):
    val = str(text).strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{where}: expected a boolean, got {text!r}")


def _tbf_from(section_name, items, default_peak):
    if "tgr" not in items or "tbs" not in items:
        raise ConfigError(f"[{section_name}]: tgr and tbs are required")
    return TbfParams(
        tgr=parse_quantity(items["tgr"]),
        tbs=parse_quantity(items["tbs"]),
        peak_rate=parse_quantity(items.get("peak_rate", default_peak)),
        queue_capacity=parse_quantity(
            items.get("queue_capacity", DEFAULT_QUEUE_CAPACITY)),
    )


def parse_config(path, config_id=None):
    """Load and validate an experiment configuration file."""
    cp = configparser.ConfigParser(interpolation=None)
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    known = {"run", "network", "tbf", "transport"}
    for section in cp.sections():
        if section not in known and not section.startswith("group:"):
            raise ConfigError(f"unknown section [{section}]")

    run = dict(cp.items("run")) if cp.has_section("run") else {}
    _check_keys("run", run, _RUN_KEYS)
    net = dict(cp.items("network")) if cp.has_section("network") else {}
    _check_keys("network", net, _NETWORK_KEYS)

    rates = NetworkRates(
        backbone=parse_quantity(net.get("backbone_rate", 100e9)),
        feeder=parse_quantity(net.get("feeder_rate", 100e6)),
        distribution=parse_quantity(net.get("distribution_rate", 100e6)),
        rtt=parse_quantity(net.get("rtt", 0.010)),
    )
    scheduler = net.get("scheduler", "rr").strip().lower()

    tbf = None
    if cp.has_section("tbf"):
        items = dict(cp.items("tbf"))
        _check_keys("tbf", items, _TBF_KEYS)
        tbf = _tbf_from("tbf", items, rates.distribution)

    transport = TransportOptions()
    if cp.has_section("transport"):
        items = dict(cp.items("transport"))
        _check_keys("transport", items, _TRANSPORT_KEYS)
        transport = TransportOptions(
            mss=int(parse_quantity(items.get("mss", 1460))),
            header=int(parse_quantity(items.get("header_bytes", 40))),
            initial_cwnd_segments=int(parse_quantity(
                items.get("initial_cwnd_segments", 2))),
            initial_ssthresh=parse_quantity(
                items.get("initial_ssthresh", 65536)),
            rto_min=parse_quantity(items.get("rto_min", 1.0)),
        )

    groups = []
    for section in cp.sections():
        if not section.startswith("group:"):
            continue
        items = dict(cp.items(section))
        _check_keys(section, items, _GROUP_KEYS)
        gtbf = None
        if "tgr" in items or "tbs" in items:
            gtbf = _tbf_from(section, items, rates.distribution)
        groups.append(GroupConfig(
            name=section.split(":", 1)[1],
            subscribers=int(parse_quantity(items.get("subscribers", 1))),
            users=int(parse_quantity(items.get("users", 1))),
            http_flows=int(parse_quantity(items.get("http_flows", 1))),
            ftp_flows=int(parse_quantity(items.get("ftp_flows", 1))),
            video_flows=int(parse_quantity(items.get("video_flows", 1))),
            trace=items.get("trace", "cif").strip(),
            measured=_parse_bool(items.get("measured", "true"), section),
            shaped=_parse_bool(items.get("shaped", str(tbf is not None)), section),
            tbf=gtbf,
        ))
    if not groups:
        raise ConfigError("no [group:*] section found")

    cfg = ExperimentConfig(
        config_id=config_id or os.path.splitext(os.path.basename(str(path)))[0],
        rates=rates,
        scheduler=scheduler,
        tbf=tbf,
        groups=tuple(groups),
        duration=parse_quantity(run.get("duration", 10800)),
        warmup=parse_quantity(run.get("warmup", 1200)),
        replications=int(parse_quantity(run.get("replications", 10))),
        master_seed=int(parse_quantity(run.get("master_seed", 1))),
        startup_delay=parse_quantity(run.get("startup_delay", 5.0)),
        log_departures=_parse_bool(run.get("log_departures", "false"), "run"),
        transport=transport,
    )
    return cfg.validate()


# -- preset matrix -----------------------------------------------------

_TGR_100M = [2e6, 10e6, 20e6]
_TBS_100M = [1e6, 10e6, 100e6]
_TGR_1G = [30e6, 60e6, 90e6]
_TBS_1G = [10e6, 100e6, 1e9]


def _single_group(users=1, trace="cif", **kw):
    return (GroupConfig(name="main", subscribers=1, users=users, trace=trace, **kw),)


def _preset_matrix():
    presets = {}
    rates_100m = NetworkRates(feeder=100e6, distribution=100e6)
    rates_1g = NetworkRates(feeder=1e9, distribution=1e9)
    presets["U1"] = ExperimentConfig(
        config_id="U1", rates=rates_100m, tbf=None,
        groups=_single_group(shaped=False))
    presets["U2"] = ExperimentConfig(
        config_id="U2", rates=rates_1g, tbf=None,
        groups=_single_group(trace="hd", shaped=False))
    for block, (rates, tgrs, tbss, trace) in {
            1: (rates_100m, _TGR_100M, _TBS_100M, "cif"),
            2: (rates_1g, _TGR_1G, _TBS_1G, "hd")}.items():
        for i, tgr in enumerate(tgrs):
            for j, tbs in enumerate(tbss):
                name = f"S{block}_{3 * i + j + 1}"
                presets[name] = ExperimentConfig(
                    config_id=name, rates=rates,
                    tbf=TbfParams(tgr=tgr, tbs=tbs,
                                  peak_rate=rates.distribution),
                    groups=_single_group(trace=trace))
    # Two-group scenario: a conformant population sharing the feeder with
    # subscribers whose offered load persistently exceeds the token rate.
    nc_tbf = TbfParams(tgr=10e6, tbs=1e9, peak_rate=100e6)
    presets["NC"] = ExperimentConfig(
        config_id="NC", rates=rates_100m, tbf=nc_tbf,
        groups=(
            GroupConfig(name="conformant", subscribers=10, users=3,
                        measured=True),
            GroupConfig(name="nonconformant", subscribers=1, users=5,
                        ftp_flows=6, measured=False),
        ))
    return presets


_PRESETS = _preset_matrix()


def _normalize_preset_name(name):
    key = name.strip().replace("{", "").replace("}", "").replace(",", "_")
    key = re.sub(r"_+", "_", key).upper()
    return re.sub(r"^([A-Z]+)_", r"\1", key)


def preset_names():
    return sorted(_PRESETS)


# run-length profiles: experiments at full scale take hours of simulated
# time; the desk profile keeps the same structure at desktop runtimes
PROFILES = {
    "full": {"duration": 10800.0, "warmup": 1200.0},
    "desk": {"duration": 1800.0, "warmup": 300.0},
}


def load_preset(name, profile="desk", **overrides):
    """Fetch a preset by name; "S_{1,3}" style aliases are accepted."""
    key = _normalize_preset_name(name)
    if key not in _PRESETS:
        raise ConfigError(f"unknown preset {name!r}; known: {preset_names()}")
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; known: {sorted(PROFILES)}")
    cfg = replace(_PRESETS[key], **PROFILES[profile])
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg.validate()


def with_users(cfg, users):
    """Same configuration with every group's users-per-subscriber replaced."""
    groups = tuple(replace(g, users=users) for g in cfg.groups)
    return replace(cfg, groups=groups,
                   config_id=f"{cfg.config_id}_n{users}").validate()


def with_subscribers(cfg, subscribers):
    """Same configuration with the first group's subscriber count replaced."""
    first = replace(cfg.groups[0], subscribers=subscribers)
    return replace(cfg, groups=(first,) + cfg.groups[1:],
                   config_id=f"{cfg.config_id}_N{subscribers}").validate()
