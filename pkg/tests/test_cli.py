import json
import subprocess
import sys

import numpy as np
import pytest

from jcpackets.cli import main
from jcpackets.config import parse_config
from jcpackets.errors import ConfigError
from jcpackets.model import DriveProtocol

FIG2 = """
[system]
g = 1
delta = 0.1

[drive]
f0 = 5

[run]
initial = ground
t_end = 6
sample_stride = 0.5
nmax = 60

[analysis]
wigner_times = 3
wigner_points = 11
wigner_half_width = 4
packet_times = 6
spectrum = yes
lds_measure = yes
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(*argv):
    return main([str(a) for a in argv])


def test_simulate_outputs(tmp_path):
    cfg = write(tmp_path, FIG2)
    assert run("simulate", "--config", cfg, "--out", tmp_path / "a") == 0
    out = tmp_path / "a"
    names = {p.name for p in out.iterdir()}
    assert names == {"observables.csv", "pn.csv", "protocol.txt", "lds_measure.csv",
                     "wigner_t3.csv", "packets.jsonl", "spectrum.csv", "run.json"}
    obs = np.genfromtxt(out / "observables.csv", delimiter=",", names=True)
    assert obs.size == 12
    assert np.allclose(obs["norm"], 1.0, atol=1e-10)
    assert json.loads((out / "run.json").read_text())["n_max"] == 60
    assert DriveProtocol.from_text((out / "protocol.txt").read_text()) == DriveProtocol.constant(5.0)


def test_simulate_byte_identical(tmp_path):
    cfg = write(tmp_path, FIG2)
    run("simulate", "--config", cfg, "--out", tmp_path / "a")
    run("simulate", "--config", cfg, "--out", tmp_path / "b")
    for p in (tmp_path / "a").iterdir():
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_zero_duration_headers_only(tmp_path):
    cfg = write(tmp_path, "[drive]\nf0 = 5\n[run]\nt_end = 0\nnmax = 10\n[analysis]\nspectrum = yes\n")
    assert run("simulate", "--config", cfg, "--out", tmp_path) == 0
    for name in ("observables.csv", "pn.csv", "spectrum.csv"):
        assert (tmp_path / name).read_text().count("\n") == 1


def test_flags_override_config(tmp_path):
    cfg = write(tmp_path, FIG2)
    assert run("simulate", "--config", cfg, "--out", tmp_path, "--nmax", 50, "--t-end", 7,
               "--seed-state", "lds_minus", "--delta", 0.2) == 0
    meta = json.loads((tmp_path / "run.json").read_text())
    assert (meta["n_max"], meta["t_end"], meta["initial"], meta["delta"]) == (50, 7.0, "lds_minus", 0.2)


def test_exit_code_config(tmp_path, capsys):
    cfg = write(tmp_path, "[system]\ng = 1\ncolour = red\n")
    assert run("simulate", "--config", cfg, "--out", tmp_path) == 2
    rec = json.loads(capsys.readouterr().err.strip())
    assert rec["error"] == "ConfigError" and "colour" in rec["message"]


def test_exit_code_numerical(tmp_path, capsys):
    cfg = write(tmp_path, "[drive]\nf0 = 5\n[system]\ndelta = 0.1\n[run]\nt_end = 20\nnmax = 8\n")
    assert run("simulate", "--config", cfg, "--out", tmp_path) == 3
    rec = json.loads(capsys.readouterr().err.strip())
    assert rec["error"] == "UnderTruncationError" and rec["time"] > 0


def test_exit_code_synthesis(tmp_path, capsys):
    cfg = write(tmp_path, "[system]\ndelta = 0.1\n[synth]\nstrategy = class-D-return\n"
                          "n_packets = 4\nf_levels = 5 15 5 15\nguard_radius = 100\n")
    assert run("protocol", "synth", "--config", cfg, "--out", tmp_path) == 4
    assert json.loads(capsys.readouterr().err.strip())["error"] == "GuardBand"


def test_protocol_synth_and_roundtrip(tmp_path):
    assert run("protocol", "synth", "--delta", 0.1, "--strategy", "class-D-return",
               "--n-packets", 4, "--f-levels", "5,15,5,15", "--out", tmp_path) == 0
    prot = DriveProtocol.from_text((tmp_path / "protocol.txt").read_text())
    assert np.allclose([t for t, _ in prot.steps[1:]], [10.5, 49.4, 58.2], atol=0.5)
    cfg = write(tmp_path, "[system]\ndelta = 0.1\n[drive]\nprotocol_file = protocol.txt\n")
    assert parse_config((tmp_path / "run.ini").read_text(), tmp_path).protocol == prot


def test_protocol_validate_reduced(tmp_path, capsys):
    cfg = write(tmp_path, "[system]\ndelta = 0.1\n[drive]\nf0 = 5\nsteps = 11 15\n[run]\nt_end = 40\n")
    assert run("protocol", "validate", "--config", cfg, "--times", "5 40") == 0
    lines = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert [x["time"] for x in lines] == [5.0, 40.0]
    assert lines[0]["count"] == 2 and lines[1]["count"] >= 3


def test_reduced_trajectory(tmp_path):
    assert run("reduced", "--delta", 0, "--f", 5, "--branch", 1, "--t-end", 10,
               "--out", tmp_path) == 0
    data = np.genfromtxt(tmp_path / "trajectory.csv", delimiter=",", names=True)
    z = data["re_z"] + 1j * data["im_z"]
    assert np.ptp(np.abs(z - 5.0)) < 1e-8


def test_reduced_tree(tmp_path):
    cfg = write(tmp_path, "[system]\ndelta = 0.1\n[drive]\nf0 = 5\nsteps = 11 15\n[run]\nt_end = 20\n")
    assert run("reduced", "--config", cfg, "--out", tmp_path) == 0
    recs = [json.loads(x) for x in (tmp_path / "tree.jsonl").read_text().splitlines()]
    leaves = [r for r in recs if r["leaf"]]
    assert sum(r["weight"] for r in leaves) == pytest.approx(1.0)


def test_classify(tmp_path, capsys):
    assert run("classify", "--f", 5, "--delta", 0.2) == 0
    assert capsys.readouterr().out.strip() == "C"
    assert run("classify", "--grid", tmp_path / "g.csv", "--f-range", "1:20:5",
               "--delta-range", "0.01:0.5:4") == 0
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "f,delta,class,d_ab,d_bc,d_cd" and len(lines) == 21
    assert run("classify", "--f", 5) == 2
    assert run("classify", "--grid", tmp_path / "g.csv", "--f-range", "1:2") == 2


def test_spectrum_command(tmp_path, capsys):
    t = np.arange(2000) * 0.5
    np.savetxt(tmp_path / "obs.csv", np.column_stack([t, 3 + np.cos(0.1 * t)]), delimiter=",",
               header="t,mean_n", comments="")
    assert run("spectrum", tmp_path / "obs.csv", "--out", tmp_path, "--expected", "0.1") == 0
    rep = json.loads(capsys.readouterr().out)
    assert abs(rep["peaks"][0]["offset_bins"]) <= 1
    assert (tmp_path / "obs_spectrum.csv").exists()
    assert run("spectrum", tmp_path / "obs.csv", "--column", "nope") == 2


def test_config_rejects_bad_values():
    with pytest.raises(ConfigError):
        parse_config("[extra]\nx = 1\n")
    with pytest.raises(ConfigError):
        parse_config("[run]\nt_end = soon\n")
    with pytest.raises(ConfigError):
        parse_config("[drive]\nf0 = 5\nsteps = 1 2 3\n")
    with pytest.raises(ConfigError):
        parse_config("[run]\nt_end = 5\n[analysis]\nwigner_times = 9\n").validate()


def test_entry_point_module():
    res = subprocess.run([sys.executable, "-m", "jcpackets.cli", "classify", "--f", "15",
                          "--delta", "0.1"], capture_output=True, text=True, check=True)
    assert res.stdout.strip() == "D"
