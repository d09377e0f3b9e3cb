import math
import re
import subprocess
import sys

import pytest

from spintransistor import cli
from spintransistor.errors import NumericalError


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def numbers(line):
    return [float(v) for v in line.split(":", 1)[1].split()]


def test_empty_argv_is_usage(capsys):
    code, out, err = run(capsys)
    assert code == 2
    assert err.startswith("usage: spintransistor")
    assert run(capsys)[2] == err


def test_unknown_command_and_option(capsys):
    assert run(capsys, "fly")[0] == 2
    assert run(capsys, "spectrum", "--colour", "red")[0] == 2


def test_version(capsys):
    assert run(capsys, "--version")[0] == 0


def test_spectrum_n3_auto_field(capsys, tmp_path):
    code, out, _ = run(capsys, "spectrum", "--n", "3", "--j1", "1", "--delta", "-1", "--h", "auto",
                       "--out", str(tmp_path))
    assert code == 0
    assert "fields = (0.0, 0.5, 0.0)" in out
    lines = out.splitlines()
    w = numbers(next(l for l in lines if l.startswith("eigenvalues")))
    gaps = numbers(next(l for l in lines if l.startswith("gaps")))
    assert len(w) == 3
    assert gaps == pytest.approx([math.sqrt(2)] * 2, rel=1e-8)  # printed to 10 digits
    text = (tmp_path / "spectrum.csv").read_text()
    assert "# h = auto" in text and "# seed = 0" in text and "# units:" in text


def test_spectrum_n4_triplets(capsys, tmp_path):
    args = ["spectrum", "--n", "4", "--j1", "1", "--j2", "17.484", "--delta", "-1", "--out", str(tmp_path)]
    _, out, _ = run(capsys, *args, "--h", "h_plus")
    assert "(lowest three)" in out
    # at h_minus the equidistant triplet is the highest one
    _, out, _ = run(capsys, *args, "--h", "h_minus")
    assert "(highest three)" in out


def test_transfer_preset(capsys, tmp_path):
    code, out, _ = run(capsys, "transfer", "--preset", "fig1c", "--t", "pi_over_j1", "--out", str(tmp_path))
    assert code == 0
    fid = float(re.search(r"= ([0-9.]+)$", out.strip()).group(1))
    assert fid >= 0.99
    assert fid == pytest.approx(0.996358715686239, abs=1e-10)


def test_trace_and_blockade(capsys, tmp_path):
    assert run(capsys, "trace", "--preset", "fig1c", "--gate", "closed", "--samples", "50",
               "--out", str(tmp_path))[0] == 0
    rows = [l for l in (tmp_path / "trace_closed.csv").read_text().splitlines() if not l.startswith("#")]
    assert rows[0] == "t,p_in,p_out,p_gate" and len(rows) == 51
    code, out, _ = run(capsys, "blockade", "--preset", "fig1c", "--h", "h_minus", "--out", str(tmp_path))
    assert code == 0 and "G+" in out
    code, out, _ = run(capsys, "blockade", "--preset", "fig1c", "--h", "h_minus",
                       "--superposition", "yes", "--out", str(tmp_path))
    assert code == 0 and "transferred" in out


def test_noise_zero_sigma_exact(capsys, tmp_path):
    code, out, _ = run(capsys, "noise", "--param", "h", "--sigma", "0.0", "--n", "100", "--out", str(tmp_path))
    assert code == 0
    assert "+- 0.00e+00" in out and "ok 100" in out
    text = (tmp_path / "noise_h.csv").read_text()
    assert "# seed = 0" in text and "# t_out = " in text


def test_map_fig2(capsys, tmp_path):
    code, out, _ = run(capsys, "map", "--trap", "fig2.cfg", "--out", str(tmp_path))
    assert code == 0
    ratio, err = map(float, re.search(r"J2/J1 = ([0-9.]+) \+- ([0-9.e-]+)", out).groups())
    assert ratio == pytest.approx(17.484, rel=0.05)
    assert 0 < err < 0.1
    change = float(re.search(r"change ([0-9.]+)%", out).group(1))
    assert change < 1.0
    assert (tmp_path / "factors.csv").exists() and (tmp_path / "orbitals.csv").exists()


def test_sweep_runs(capsys, tmp_path):
    code, out, _ = run(capsys, "sweep", "--preset", "fig2", "--param", "U", "--values", "200",
                       "--quad-points", "120", "--out", str(tmp_path))
    assert code == 0 and "J2/J1" in out
    assert run(capsys, "sweep", "--preset", "fig2", "--out", str(tmp_path))[0] == 2


def test_validation_exit_code(capsys, tmp_path):
    code, _, err = run(capsys, "spectrum", "--n", "1", "--out", str(tmp_path))
    assert code == 4 and "invalid parameters" in err
    assert run(capsys, "map", "--preset", "fig2", "--x0", "0.6", "--out", str(tmp_path))[0] == 4
    assert run(capsys, "noise", "--param", "J", "--out", str(tmp_path))[0] == 4


def test_numerical_exit_code(capsys, tmp_path, monkeypatch):
    def boom(chain, t):
        raise NumericalError("forced")
    monkeypatch.setattr(cli, "transfer_fidelity", boom)
    code, _, err = run(capsys, "transfer", "--preset", "fig1c", "--out", str(tmp_path))
    assert code == 3 and "numerical failure" in err


def test_config_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("j2 = 3  # overrides the preset\ndelta = 0.5\n")
    args = cli.build_parser().parse_args(["transfer", "--preset", "fig1c", "--config", str(cfg), "--delta", "0"])
    resolved = cli.resolve_config(args)
    assert resolved["n"] == 4 and resolved["j2"] == 3.0 and resolved["delta"] == 0.0


def test_bad_config_files(capsys, tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("warp = 9\n")
    assert run(capsys, "transfer", "--config", str(bad), "--out", str(tmp_path))[0] == 2
    bad.write_text("j2 = lots\n")
    assert run(capsys, "transfer", "--config", str(bad), "--out", str(tmp_path))[0] == 2
    assert run(capsys, "transfer", "--config", str(tmp_path / "missing.cfg"))[0] == 2
    assert run(capsys, "transfer", "--preset", "fig9")[0] == 2
    assert run(capsys, "transfer", "--preset", "fig1c", "--t", "soon")[0] == 2


def test_parse_time():
    assert cli.parse_time("pi_over_j1", 2.0) == pytest.approx(math.pi / 2)
    assert cli.parse_time("2pi_over_j1", 1.0) == pytest.approx(2 * math.pi)
    assert cli.parse_time("0.5*pi/J1", 1.0) == pytest.approx(math.pi / 2)
    assert cli.parse_time("64/5", 1.0) == 12.8


def test_outputs_stay_in_out_dir(capsys, tmp_path, monkeypatch):
    work = tmp_path / "work"
    work.mkdir()
    monkeypatch.chdir(work)
    out = work / "nested" / "out"
    for argv in (
        ["spectrum", "--n", "3", "--h", "auto"],
        ["transfer", "--preset", "fig1c"],
        ["trace", "--preset", "fig1c", "--samples", "5"],
        ["blockade", "--preset", "fig1c", "--h", "h_minus"],
        ["noise", "--param", "h", "--sigma", "0", "0.01", "--n", "4"],
    ):
        assert run(capsys, *argv, "--out", str(out))[0] == 0
    written = {p.relative_to(work) for p in work.rglob("*") if p.is_file()}
    assert written and all(p.parts[:2] == ("nested", "out") for p in written)


def test_deterministic_outputs(capsys, tmp_path):
    texts = []
    for k in range(2):
        out = tmp_path / str(k)
        assert run(capsys, "noise", "--param", "h", "--sigma", "0.005", "--n", "6", "--seed", "3",
                   "--out", str(out))[0] == 0
        texts.append((out / "noise_h.csv").read_text())
    assert texts[0] == texts[1]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "spintransistor"], capture_output=True, text=True)
    assert proc.returncode == 2 and "usage" in proc.stderr
