import pytest

from accessim.config import (ConfigError, load_preset, parse_config,
                             parse_quantity, preset_names, with_subscribers,
                             with_users)

GOOD = """
[run]
duration = 600
warmup = 100
replications = 3
master_seed = 7

[network]
feeder_rate = 100M
distribution_rate = 100M
rtt = 0.01
scheduler = rr

[tbf]
tgr = 2M
tbs = 10M

[group:main]
subscribers = 2
users = 3
trace = cif
"""


class TestQuantities:
    @pytest.mark.parametrize("text,value", [
        ("100", 100.0), ("2M", 2e6), ("1.5G", 1.5e9), ("700k", 7e5),
        ("0.01", 0.01), ("2e6", 2e6),
    ])
    def test_suffixes(self, text, value):
        assert parse_quantity(text) == value

    def test_garbage_rejected(self):
        with pytest.raises(ConfigError):
            parse_quantity("fast")


class TestParseConfig:
    def test_good_file(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(GOOD)
        cfg = parse_config(path)
        assert cfg.config_id == "exp"
        assert cfg.duration == 600 and cfg.warmup == 100
        assert cfg.tbf.tgr == 2e6 and cfg.tbf.tbs == 10e6
        assert cfg.tbf.peak_rate == 100e6       # defaults to the line rate
        assert cfg.groups[0].subscribers == 2
        assert cfg.groups[0].users == 3
        assert cfg.groups[0].shaped

    def test_unknown_key_rejected_with_path(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text(GOOD.replace("tgr = 2M", "tgr = 2M\nturbo = yes"))
        with pytest.raises(ConfigError, match=r"\[tbf\].*turbo"):
            parse_config(path)

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "bad2.cfg"
        path.write_text(GOOD + "\n[extras]\nx = 1\n")
        with pytest.raises(ConfigError, match="extras"):
            parse_config(path)

    def test_duration_must_exceed_warmup(self, tmp_path):
        path = tmp_path / "bad3.cfg"
        path.write_text(GOOD.replace("duration = 600", "duration = 100"))
        with pytest.raises(ConfigError, match="warmup"):
            parse_config(path)

    def test_replications_minimum(self, tmp_path):
        path = tmp_path / "bad4.cfg"
        path.write_text(GOOD.replace("replications = 3", "replications = 1"))
        with pytest.raises(ConfigError, match="replications"):
            parse_config(path)

    def test_unshaped_without_tbf_section(self, tmp_path):
        path = tmp_path / "unshaped.cfg"
        path.write_text("\n".join(
            line for line in GOOD.splitlines()
            if not line.startswith(("tgr", "tbs", "[tbf]"))))
        cfg = parse_config(path)
        assert cfg.tbf is None
        assert not cfg.groups[0].shaped


class TestPresets:
    def test_matrix_complete(self):
        names = preset_names()
        assert "U1" in names and "U2" in names and "NC" in names
        assert sum(n.startswith("S1_") for n in names) == 9
        assert sum(n.startswith("S2_") for n in names) == 9

    def test_s1_6_values(self):
        cfg = load_preset("S1_6")
        assert cfg.tbf.tgr == 10e6
        assert cfg.tbf.tbs == 100e6
        assert cfg.rates.feeder == 100e6
        assert cfg.rates.distribution == 100e6

    def test_s1_3_values(self):
        cfg = load_preset("S1_3")
        assert cfg.tbf.tgr == 2e6 and cfg.tbf.tbs == 100e6

    def test_s2_3_values(self):
        cfg = load_preset("S2_3")
        assert cfg.tbf.tgr == 30e6 and cfg.tbf.tbs == 1e9
        assert cfg.rates.feeder == 1e9

    def test_u2_unshaped_gigabit(self):
        cfg = load_preset("U2")
        assert cfg.tbf is None
        assert cfg.rates.distribution == 1e9
        assert not cfg.groups[0].shaped

    def test_paper_style_aliases(self):
        assert load_preset("S_{1,6}").config_id == "S1_6"
        assert load_preset("U_1").config_id == "U1"
        assert load_preset("s2_9").config_id == "S2_9"

    def test_fixed_parameters(self):
        for name in preset_names():
            cfg = load_preset(name)
            assert cfg.rates.backbone == 100e9
            assert cfg.rates.rtt == 0.010

    def test_nonconformant_groups(self):
        cfg = load_preset("NC")
        g1, g2 = cfg.groups
        assert g1.subscribers == 10 and g1.users == 3 and g1.measured
        assert g2.users == 5 and not g2.measured
        assert g2.ftp_flows > 1
        assert cfg.tbf.tgr == 10e6

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            load_preset("S9_9")


class TestHashing:
    def test_hash_covers_every_field(self):
        from dataclasses import replace
        base = load_preset("S1_3")
        variants = [
            replace(base, duration=901.0),
            replace(base, warmup=299.0),
            replace(base, master_seed=2),
            replace(base, replications=9),
            replace(base, scheduler="fifo"),
            replace(base, startup_delay=4.0),
            with_users(base, 2),
            with_subscribers(base, 3),
            load_preset("S1_4"),
        ]
        hashes = {base.hash()} | {v.hash() for v in variants}
        assert len(hashes) == len(variants) + 1


class TestProfiles:
    def test_desk_profile_default(self):
        cfg = load_preset("S1_3")
        assert cfg.duration == 1800.0 and cfg.warmup == 300.0
        assert cfg.replications == 10

    def test_full_profile(self):
        cfg = load_preset("S1_3", profile="full")
        assert cfg.duration == 10800.0 and cfg.warmup == 1200.0

    def test_unknown_profile(self):
        with pytest.raises(ConfigError, match="profile"):
            load_preset("S1_3", profile="weekend")

    def test_file_defaults_are_full_scale(self, tmp_path):
        path = tmp_path / "bare.cfg"
        path.write_text("[group:main]\nsubscribers = 1\nusers = 1\n")
        cfg = parse_config(path)
        assert cfg.duration == 10800.0 and cfg.warmup == 1200.0
        assert cfg.tbf is None


class TestTransportSection:
    def test_defaults(self, tmp_path):
        path = tmp_path / "plain.cfg"
        path.write_text(GOOD)
        cfg = parse_config(path)
        assert cfg.transport.mss == 1460
        assert cfg.transport.initial_ssthresh == 65536.0

    def test_overrides(self, tmp_path):
        path = tmp_path / "tuned.cfg"
        path.write_text(GOOD + "\n[transport]\nmss = 1000\nrto_min = 0.5\n"
                        "initial_ssthresh = 32k\n")
        cfg = parse_config(path)
        assert cfg.transport.mss == 1000
        assert cfg.transport.rto_min == 0.5
        assert cfg.transport.initial_ssthresh == 32000.0

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text(GOOD + "\n[transport]\nnagle = on\n")
        with pytest.raises(ConfigError, match=r"\[transport\]"):
            parse_config(path)
