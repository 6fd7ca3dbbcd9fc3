import csv
import json
import subprocess
import sys

import pytest

from aseplab.cli import main, manifest_argv

COMMANDS = ["simulate", "profile", "oracle-tv", "kpz", "hitting", "overtake",
            "stationary-sample", "acceptance", "replay"]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_simulate_tasep_two_sites(tmp_path, capsys):
    out = tmp_path / "run"
    rc = main(["simulate", "--init", "10@a=1", "--p", "1", "--horizon", "10", "--seed", "7",
               "--out", str(out)])
    assert rc == 0
    rows = read_csv(f"{out}.events.csv")
    swaps = [r for r in rows[1:] if r[-1] == "1" or "swap" in r[-1]]
    assert len(swaps) == 1
    man = json.loads((tmp_path / "run.manifest.json").read_text())
    assert man["command"] == "simulate" and man["seed"] == 7
    assert man["summary"]["swaps"] == 1
    assert "1 swaps" in capsys.readouterr().out


def test_simulate_is_deterministic(tmp_path):
    args = ["simulate", "--init", "E|1101|F@0", "--p", "0.75", "--horizon", "20", "--seed", "3"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    for suffix in (".events.csv", ".observers.csv"):
        assert (tmp_path / f"a{suffix}").read_bytes() == (tmp_path / f"b{suffix}").read_bytes()


def test_simulate_heights(tmp_path):
    rc = main(["simulate", "--init", "flat", "--N", "64", "--horizon", "5",
               "--observers", "heights", "--out", str(tmp_path / "h")])
    assert rc == 0
    names = [r[1] for r in read_csv(tmp_path / "h.observers.csv")[1:]]
    assert any(n.startswith("h(") for n in names)


def test_replay_reproduces(tmp_path):
    main(["simulate", "--init", "110100@a=1", "--p", "0.7", "--horizon", "15", "--seed", "11",
          "--out", str(tmp_path / "a")])
    assert main(["replay", str(tmp_path / "a.manifest.json"), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a.events.csv").read_bytes() == (tmp_path / "b.events.csv").read_bytes()


def test_replay_keeps_negative_grids(tmp_path):
    man = {"command": "profile", "parameters": {"c_grid": "-4,0,4", "exact": None, "sides": False}}
    argv = manifest_argv(man, "x")
    assert "--c-grid=-4,0,4" in argv and "--sides" not in argv


def test_acceptance_command(tmp_path):
    assert main(["acceptance", "--criterion", "1", "--out", str(tmp_path / "a")]) == 0
    rows = read_csv(tmp_path / "a.csv")
    assert rows[1][:3] == ["1", "oracle cross-validation", "1"]
    man = json.loads((tmp_path / "a.manifest.json").read_text())
    assert manifest_argv(man, "b")[:2] == ["acceptance", "--criterion=1"]


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep\ninit = 1100@a=1\np = 0.75\nhorizon = 3\nseed = 2\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--config", str(cfg), "--seed", "5", "--out", str(tmp_path / "b")]) == 0
    ma = json.loads((tmp_path / "a.manifest.json").read_text())
    mb = json.loads((tmp_path / "b.manifest.json").read_text())
    assert ma["seed"] == 2 and mb["seed"] == 5


def test_oracle_tv_command(tmp_path):
    rc = main(["oracle-tv", "--b", "6", "--k", "3", "--p", "0.75", "--init", "111000@a=1",
               "--t-grid", "0,1,2,4,8", "--check-expm", "--out", str(tmp_path / "o")])
    assert rc == 0
    rows = [[float(v) for v in r] for r in read_csv(tmp_path / "o.csv")[1:]]
    tv = [r[1] for r in rows]
    assert all(a >= b for a, b in zip(tv, tv[1:]))
    assert all(abs(r[1] - r[2]) < 1e-8 for r in rows)
    from aseplab.config import SegmentConfig
    from aseplab.stationary import stationary_prob
    assert tv[0] == pytest.approx(1 - stationary_prob(SegmentConfig.parse("111000"), 0.75))


def test_profile_toy_exact(tmp_path):
    rc = main(["profile", "--family", "flat", "--N", "6", "--exact", "--trials", "200",
               "--c-grid", "-2,0,2", "--out", str(tmp_path / "p")])
    assert rc == 0
    rows = read_csv(tmp_path / "p.csv")
    assert rows[0][:3] == ["family", "N", "p"]
    assert all(r[rows[0].index("exact")] != "" for r in rows[1:])


def test_hitting_and_overtake_and_sampling(tmp_path):
    assert main(["hitting", "--init", "0101@a=1", "--trials", "20", "--horizon", "200",
                 "--out", str(tmp_path / "h")]) == 0
    man = json.loads((tmp_path / "h.manifest.json").read_text())
    assert man["summary"]["violations"] == 0
    assert main(["overtake", "--family", "thm61", "--N", "16", "--trials", "5", "--horizon", "10",
                 "--out", str(tmp_path / "m")]) == 0
    assert main(["stationary-sample", "--b", "6", "--k", "3", "--count", "10",
                 "--out", str(tmp_path / "s")]) == 0
    assert len(read_csv(tmp_path / "s.csv")) == 11


def test_kpz_command(tmp_path):
    assert main(["kpz", "--class", "step", "--N", "16", "--trials", "20",
                 "--out", str(tmp_path / "k")]) == 0
    assert len(read_csv(tmp_path / "k.csv")) == 21


@pytest.mark.parametrize("cmd", COMMANDS)
def test_help_exits_zero(cmd):
    with pytest.raises(SystemExit) as exc:
        main([cmd, "--help"])
    assert exc.value.code == 0


def test_unknown_flag_and_family():
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--init", "10", "--bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["profile", "--family", "zigzag", "--N", "6"])
    assert exc.value.code == 2


def test_exit_codes(tmp_path, monkeypatch):
    assert main(["simulate", "--init", "1x0", "--out", str(tmp_path / "a")]) == 2
    assert main(["simulate", "--init", "step", "--p", "1", "--horizon", "200", "--margin", "0",
                 "--out", str(tmp_path / "b")]) == 3
    monkeypatch.setenv("ASEPLAB_TABLE_DIR", str(tmp_path / "nowhere"))
    from aseplab import experiments
    experiments._TABLES.clear()
    assert main(["kpz", "--class", "step", "--N", "16", "--trials", "5",
                 "--out", str(tmp_path / "c")]) == 4


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "aseplab.cli", "--version"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("aseplab")
