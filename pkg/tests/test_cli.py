import io
import os
import subprocess
import sys

import pytest

from majperc.cli import EXIT_BUDGET, EXIT_INVALID, EXIT_IO, SpecError, build_spec, main, parse_spec


def _run(args, tmp_path, env_threads=None):
    out = tmp_path / "out.csv"
    env = dict(os.environ)
    if env_threads is not None:
        env["MAJPERC_THREADS"] = str(env_threads)
    proc = subprocess.run([sys.executable, "-m", "majperc", *args, "--out", str(out)], env=env,
                          capture_output=True, text=True)
    return proc, out


def test_oracle_fkg_pass_report(tmp_path, capsys):
    out = tmp_path / "fkg.csv"
    assert main(["oracle", "--grid", "3x3", "--t", "0.5", "--p", "0.6", "--check", "fkg", "--out", str(out)]) == 0
    text = out.read_text()
    assert "# overall=PASS pairs=20" in text
    rows = [l for l in text.splitlines() if not l.startswith("#")]
    assert rows[0].startswith("event_a,event_b") and len(rows) == 21
    assert all(r.endswith("PASS") for r in rows[1:])


def test_certify_all_open(tmp_path):
    out = tmp_path / "cert.txt"
    assert main(["certify", "--p", "1", "--t", "0.5", "--n", "32", "--out", str(out)]) == 0
    text = out.read_text()
    assert "# replicas=4000" in text
    assert "failures = 0" in text and "status = CERTIFIED" in text


def test_header_echoes_spec_and_floats_are_full_precision(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--p", "0.6", "--n", "4", "--t", "0.2", "--replicas", "20", "--seed", "3",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert "# command=sweep" in lines and "# seed=3" in lines and "# p=0.6" in lines
    header = [l for l in lines if not l.startswith("#")][0]
    assert header == "p,t,n,lambda,event,replicas,successes,p_hat,ci_lo,ci_hi,master_seed"
    row = [l for l in lines if not l.startswith("#")][1].split(",")
    assert row[0] == "0.59999999999999998"


def test_pc_curve_columns(tmp_path):
    out = tmp_path / "pc.csv"
    assert main(["pc-curve", "--t", "0", "--n", "4", "--tol", "0.05", "--max-per-point", "256",
                 "--out", str(out)]) == 0
    body = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert body[0] == "t,n,lambda,p_star,ci_lo,ci_hi,replicas_used,master_seed"
    assert len(body) == 2


def test_spec_file_round_trip(tmp_path):
    spec = tmp_path / "exp.spec"
    out = tmp_path / "a.csv"
    spec.write_text(f"# comment line\ncommand = sweep\np = 0.55,0.65  # trailing comment\nn = 4\nt = 0.3\n"
                    f"replicas = 30\nseed = 9\nout = {out}\n")
    assert main(["run", str(spec)]) == 0
    out2 = tmp_path / "b.csv"
    assert main(["sweep", "--p", "0.55,0.65", "--n", "4", "--t", "0.3", "--replicas", "30", "--seed", "9",
                 "--out", str(out2)]) == 0
    assert out.read_bytes() == out2.read_bytes()


def test_spec_parse_errors():
    with pytest.raises(SpecError, match="line 2"):
        parse_spec(io.StringIO("command=sweep\nbogus=1\n"))
    with pytest.raises(SpecError, match="p"):
        parse_spec(io.StringIO("command=oracle\np=1.5\n"))
    with pytest.raises(SpecError, match="line 2"):
        parse_spec(io.StringIO("command=sweep\nno equals sign\n"))
    with pytest.raises(SpecError, match="command"):
        parse_spec(io.StringIO(""))
    with pytest.raises(SpecError, match="duplicate"):
        parse_spec(io.StringIO("command=sweep\nn=3\nn=4\n"))
    with pytest.raises(SpecError, match="unknown command"):
        parse_spec(io.StringIO("command=fly\n"))


def test_cross_field_validation():
    with pytest.raises(SpecError):
        build_spec("couple", {"kind": "monotone", "p": "0.7", "p2": "0.5"})
    with pytest.raises(SpecError):
        build_spec("sweep", {"event": "circuit", "m": "4", "n": "4"})
    assert build_spec("oracle", {}).params["policy"] == "free_finite"
    assert build_spec("sweep", {}).params["policy"] == "frozen_zero"


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.spec"
    bad.write_text("command=sweep\np=1.5\n")
    assert main(["run", str(bad)]) == EXIT_INVALID
    assert "p" in capsys.readouterr().err
    empty = tmp_path / "empty.spec"
    empty.write_text("# nothing here\n")
    assert main(["run", str(empty)]) == EXIT_INVALID
    assert main(["run", str(tmp_path / "missing.spec")]) == EXIT_IO
    assert main(["oracle", "--grid", "2x2", "--out", str(tmp_path / "no" / "dir" / "x.csv")]) == EXIT_IO
    assert main(["pc-curve", "--t", "0", "--n", "8", "--budget", "50", "--out", str(tmp_path / "p.csv")]) \
        == EXIT_BUDGET
    assert not (tmp_path / "p.csv").exists()
    with pytest.raises(SystemExit) as info:
        main(["sweep", "--nonsense"])
    assert info.value.code == 2


@pytest.mark.parametrize("args", [
    ["evolve", "--n", "6", "--t", "1", "--seed", "2"],
    ["fixation", "--n", "6", "--replicas", "3"],
    ["couple", "--kind", "monotone", "--p", "0.4", "--p2", "0.6", "--n", "8", "--replicas", "4"],
    ["couple", "--n", "8", "--replicas", "4", "--strict", "true"],
    ["enhance", "--n", "16", "--replicas", "3"],
    ["cov", "--p", "0.55", "--t", "0.5", "--dist", "1,3", "--replicas", "100"],
    ["certify", "--p", "0.9", "--t", "0", "--n", "4", "--replicas", "100"],
    ["renorm", "--p", "0.7", "--t", "0", "--L0", "2", "--k-max", "1", "--replicas", "50"],
    ["oracle", "--grid", "2x2", "--check", "law"],
    ["oracle", "--grid", "2x3", "--check", "marginals", "--policy", "periodic"],
])
def test_commands_are_deterministic_across_threads(args, tmp_path):
    p1, out1 = _run(args, tmp_path, env_threads=1)
    assert p1.returncode == 0, p1.stderr
    first = out1.read_bytes()
    p2, out2 = _run(args, tmp_path, env_threads=4)
    assert p2.returncode == 0, p2.stderr
    assert out2.read_bytes() == first
    assert first.startswith(b"# majperc")


def test_svg_output(tmp_path):
    svg = tmp_path / "plot.svg"
    assert main(["sweep", "--p", "0.4,0.6", "--n", "4", "--replicas", "20", "--svg", str(svg),
                 "--out", str(tmp_path / "s.csv")]) == 0
    assert svg.read_text().startswith("<svg")


def test_no_command_prints_help(capsys):
    assert main([]) == EXIT_INVALID
