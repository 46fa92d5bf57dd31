import json
import os

from greencancel.cli import BAD_ARGS, FAILED, OK, OUT_ENV, run


def read(path):
    with open(path) as f:
        return f.read()


def manifest(d):
    return json.loads(read(os.path.join(d, "manifest.json")))


def test_bad_arguments(tmp_path):
    assert run([]) == BAD_ARGS
    assert run(["generate"]) == BAD_ARGS
    assert run(["generate", "--case", "x"]) == BAD_ARGS
    assert run(["--out", str(tmp_path), "solve", "--system", str(tmp_path / "nope.txt")]) == BAD_ARGS


def test_verify_m_and_idempotence(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["--out", str(a), "verify", "--case", "m"]) == OK
    assert "110 x 138" in capsys.readouterr().out
    assert run(["--out", str(b), "verify", "--case", "m"]) == OK
    ma, mb = manifest(a), manifest(b)
    assert ma == mb
    for name, digest in ma["files"].items():
        assert read(a / name) == read(b / name)
    rep = json.loads(read(a / "report_m.json"))
    assert (rep["rows"], rep["cols"], rep["rank"]) == (110, 138, 98)
    assert rep["verified"]


def test_generate_then_solve(tmp_path):
    gen, sol = tmp_path / "gen", tmp_path / "sol"
    assert run(["--out", str(gen), "generate", "--case", "m"]) == OK
    assert set(manifest(gen)["files"]) == {"system_m.txt", "provenance_m.json", "generate_m.json"}
    assert run(["--out", str(sol), "solve", "--system", str(gen / "system_m.txt"),
                "--strategy", "first"]) == OK
    info = json.loads(read(sol / "solve_report.json"))
    assert info["rank"] == 98 and info["verified"]


def test_cross_validation_paths(tmp_path):
    own = tmp_path / "own"
    assert run(["--out", str(own), "verify", "--case", "m"]) == OK
    pub = tmp_path / "pub"
    pub.mkdir()
    (pub / "system.txt").write_text(read(own / "system_m.txt"))
    (pub / "solution.txt").write_text(read(own / "solution_m.txt"))
    out = tmp_path / "cross"
    assert run(["--out", str(out), "verify", "--case", "m", "--cross", str(pub)]) == OK
    assert json.loads(read(out / "cross_m.json"))["verified"]
    lines = read(pub / "solution.txt").splitlines()
    c, v = lines[0].split()
    lines[0] = f"{c} {v}1"
    (pub / "solution.txt").write_text("\n".join(lines) + "\n")
    assert run(["--out", str(out), "verify", "--case", "m", "--cross", str(pub)]) == FAILED
    assert run(["--out", str(out), "verify", "--case", "m", "--cross",
                str(tmp_path / "missing")]) == BAD_ARGS


def test_spotcheck(tmp_path, capsys):
    assert run(["--out", str(tmp_path), "spotcheck", "appendixB"]) == OK
    text = capsys.readouterr().out
    assert "-5/2" in text and "MISMATCH" not in text
    assert run(["--out", str(tmp_path), "spotcheck", "all"]) == OK


def test_tw_grid_and_env_out(tmp_path, monkeypatch):
    grid = tmp_path / "grid.json"
    grid.write_text("[-3.0, -1.0, 0.5]")
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    assert run(["tw", "--grid", str(grid)]) == OK
    rows = read(tmp_path / "env" / "tw1.csv").splitlines()
    assert rows[0] == "r,F1" and len(rows) == 4
    grid.write_text("-12 0")
    assert run(["tw", "--grid", str(grid)]) == BAD_ARGS


def test_simulate_small_config(tmp_path):
    cfg = {"settings": [{"N": 40, "p": 0.3, "M": 100, "r0": -4, "seed": 1}],
           "sandwich": {"N": 60, "q_exponent": 0.4, "samples": 3, "seed": 2}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert run(["--out", str(out1), "simulate", "--config", str(path)]) == OK
    assert run(["--out", str(out2), "--jobs", "2", "simulate", "--config", str(path)]) == OK
    assert manifest(out1)["files"] == manifest(out2)["files"]
    head = read(out1 / "convergence.csv").splitlines()[0]
    assert head.startswith("N,p,q,M,seed,r0,ks,ks_stderr")
    cfg["settings"][0]["M"] = 10
    path.write_text(json.dumps(cfg))
    assert run(["--out", str(out1), "simulate", "--config", str(path)]) == BAD_ARGS
    path.write_text("{bad json")
    assert run(["--out", str(out1), "simulate", "--config", str(path)]) == BAD_ARGS
