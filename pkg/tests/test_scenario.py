import csv
import json
import math

import pytest

from qtelesim import cli
from qtelesim.config import ScenarioConfig
from qtelesim.scenario import EVENTS_FILE, SUMMARY_FILE, TRAJECTORY_FILE, log_digest, run_scenario, simulate


def cfg(**kw):
    return ScenarioConfig(**kw)


def read_events(path):
    return [json.loads(line) for line in (path / EVENTS_FILE).read_text().splitlines()]


@pytest.mark.parametrize("mode", ["entangle", "teleport", "qkd", "full"])
def test_outputs_written(tmp_path, mode):
    report = run_scenario(cfg(mode=mode, seed=3, trials=40), output_dir=tmp_path)
    events = read_events(tmp_path)
    keys = [(e["t_ns"], e["seq"]) for e in events]
    assert keys == sorted(keys) and len(set(keys)) == len(keys)
    assert all(set(e) == {"t_ns", "seq", "kind", "payload"} for e in events)
    assert report.log_digest == log_digest((tmp_path / EVENTS_FILE).read_bytes())
    rows = list(csv.DictReader((tmp_path / SUMMARY_FILE).open()))
    assert rows[-1]["trial"] == "aggregate"
    header = (tmp_path / TRAJECTORY_FILE).read_text().splitlines()[0]
    assert header == "t_s,robot,x_m,y_m,heading_rad"


def test_teleport_report(tmp_path):
    report = run_scenario(cfg(mode="teleport", seed=1, trials=100), output_dir=tmp_path)
    assert report.mean_fidelity == pytest.approx(1.0, abs=1e-12)
    assert sum(report.bell_outcome_counts.values()) == 100
    d = report.to_dict()
    assert "qber" not in d and "coincidence_count" not in d
    rows = list(csv.DictReader((tmp_path / SUMMARY_FILE).open()))
    assert len(rows) == 101


def test_lost_messages_counted_not_fatal(tmp_path):
    report = run_scenario(cfg(mode="teleport", seed=1, trials=200,
                              channel=__import__("qtelesim").ChannelConfig(loss_probability=0.5)),
                          output_dir=tmp_path)
    assert 0 < report.messages_lost < 200
    assert report.min_fidelity < 1 - 1e-6


def test_qkd_with_eve():
    report, *_ = simulate(cfg(mode="qkd", seed=5, trials=20_000, eve_enabled=True))
    assert report.qber == pytest.approx(0.25, abs=0.02) and report.eve_detected


def test_jobs_do_not_change_log():
    for mode in ("teleport", "entangle"):
        c = cfg(mode=mode, seed=9, trials=12)
        a, *_ = simulate(c, jobs=1)
        b, *_ = simulate(c, jobs=4)
        assert a.log_digest == b.log_digest


def test_seed_changes_digest():
    a, *_ = simulate(cfg(mode="qkd", seed=1, trials=50))
    b, *_ = simulate(cfg(mode="qkd", seed=2, trials=50))
    assert a.log_digest != b.log_digest


def test_full_decrypts_alice_commands():
    report, log, _, robots = simulate(cfg(mode="full", seed=4, trials=400, command_bits="00011011"))
    events = log.records()
    dec = [e for e in events if e["kind"] == "commands_decrypted"]
    assert dec and dec[0]["payload"]["bits"] == "00011011"
    bob = robots[1]
    assert len(bob.trajectory) > 1
    assert [e["payload"]["opcode"] for e in events if e["kind"] == "robot_command"] == ["00", "01", "10", "11"]


def test_full_trigger_never_fires():
    c = cfg(mode="full", seed=4, trials=100,
            trigger=__import__("qtelesim.autonomy", fromlist=["TriggerConfig"]).TriggerConfig(10**6, 1.0))
    report, log, _, robots = simulate(c)
    assert report.trigger_time_ns is None and report.to_dict()["trigger_time_ns"] is None
    events = log.records()
    end = max(e["t_ns"] for e in events if e["kind"] in ("detection", "coincidence", "pair_emitted"))
    late = [e for e in events if e["kind"].startswith(("message", "qkd", "qber")) or e["t_ns"] > end
            and e["kind"] != "trigger_not_fired"]
    assert late == []
    assert len(robots[1].trajectory) == 1


def test_full_aborts_under_attack():
    report, log, _, robots = simulate(cfg(mode="full", seed=4, trials=2000, eve_enabled=True))
    assert report.eve_detected
    kinds = {e["kind"] for e in log.records()}
    assert "full_aborted" in kinds and "robot_command" not in kinds


def test_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    from qtelesim.errors import IoError
    with pytest.raises(IoError):
        run_scenario(cfg(mode="qkd", trials=5), output_dir=blocker / "sub")


class TestCli:
    def test_runs(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("QTELESIM_OUT", raising=False)
        conf = tmp_path / "c.yaml"
        conf.write_text("seed: 3\ntrials: 5\n")
        assert cli.main(["teleport", "--config", str(conf), "--out", str(tmp_path / "o")]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["mode"] == "teleport" and out["trials"] == 5
        assert (tmp_path / "o" / EVENTS_FILE).exists()

    def test_overrides(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("QTELESIM_OUT", str(tmp_path / "env"))
        assert cli.main(["qkd", "--seed", "8", "--trials", "300", "--eve", "--out", str(tmp_path / "x")]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["output_dir"] == str(tmp_path / "env")
        assert not (tmp_path / "x").exists()

    def test_validation_exit_code(self, tmp_path, capsys):
        conf = tmp_path / "bad.yaml"
        conf.write_text("window_ns: -1\n")
        assert cli.main(["teleport", "--config", str(conf), "--out", str(tmp_path)]) == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "validation_error"

    def test_parse_exit_code(self, tmp_path, capsys):
        conf = tmp_path / "bad.yaml"
        conf.write_text("seed: [1,\n")
        assert cli.main(["teleport", "--config", str(conf)]) == 2
        assert json.loads(capsys.readouterr().err)["error"] == "parse_error"

    def test_missing_config_file(self, tmp_path, capsys):
        assert cli.main(["teleport", "--config", str(tmp_path / "nope.yaml")]) == 3
        assert json.loads(capsys.readouterr().err)["error"] == "io_error"

    def test_bad_mode(self):
        with pytest.raises(SystemExit) as info:
            cli.main(["warp"])
        assert info.value.code != 0
