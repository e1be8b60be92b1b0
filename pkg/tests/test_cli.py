"""Command-line interface: round trips, determinism and exit codes."""

import json
import subprocess
import sys

import pytest

from conftest import haar_unitary
from twboson.cli import main
from twboson.io import encode_complex


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def circuit(tmp_path, capsys):
    path = tmp_path / "c.json"
    code, _, _ = run(["gen-circuit", "--dim", 1, "--modes", 4, "--sources", 2, "--depth", 3,
                      "--seed", 7, "--out", path], capsys)
    assert code == 0
    return path


def test_gen_circuit_deterministic(tmp_path, capsys):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        assert run(["gen-circuit", "--dim", 1, "--modes", 8, "--sources", 2, "--depth", 3,
                    "--seed", 7, "--out", p], capsys)[0] == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    data = json.loads(paths[0].read_text())
    assert set(data) == {"spec", "gates"}
    assert {"round", "step", "i", "j", "theta", "phi0", "phi1", "phi2"} <= set(data["gates"][0])


def test_sample_engines_identical(circuit, tmp_path, capsys):
    files = []
    for engine in ("treedp", "oracle"):
        out = tmp_path / f"{engine}.jsonl"
        code, stdout, _ = run(["sample", "--circuit", circuit, "--kind", "gbs", "--engine", engine,
                               "--n", 30, "--seed", 3, "--m-max", 4, "--out", out], capsys)
        assert code == 0
        report = json.loads(stdout)
        assert report["n"] == 30 and "overload_rate" in report
        files.append(out.read_bytes())
    assert files[0] == files[1]


def test_exact_dist_and_tvd(circuit, tmp_path, capsys):
    dist = tmp_path / "d.json"
    assert run(["exact-dist", "--circuit", circuit, "--kind", "spbs", "--out", dist], capsys)[0] == 0
    pmf = json.loads(dist.read_text())
    total = sum(p for _, p in pmf["pmf"])
    assert total == pytest.approx(1, abs=1e-9)
    samples = tmp_path / "s.jsonl"
    assert run(["sample", "--circuit", circuit, "--kind", "spbs", "--n", 2000, "--seed", 1,
                "--out", samples], capsys)[0] == 0
    code, out, _ = run(["tvd", "--samples", samples, "--dist", dist], capsys)
    assert code == 0 and 0 <= float(out) < 0.06


def test_sample_to_stdout(circuit, capsys):
    code, out, err = run(["sample", "--circuit", circuit, "--kind", "spbs", "--n", 5], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 5 and json.loads(lines[0])["flag"] == "ok"
    assert json.loads(err)["kind"] == "spbs"


def test_approx_sampling_report(tmp_path, capsys):
    path = tmp_path / "c.json"
    run(["gen-circuit", "--dim", 1, "--modes", 8, "--sources", 2, "--depth", 2, "--seed", 2,
         "--out", path], capsys)
    out = tmp_path / "s.jsonl"
    code, stdout, _ = run(["sample", "--circuit", path, "--kind", "spbs", "--n", 200,
                           "--approx-kappa", 0.5, "--out", out], capsys)
    assert code == 0
    report = json.loads(stdout)
    assert {"dU_norm", "dW_norm", "tvd_bound", "out_rate"} <= set(report)
    assert 0 < report["out_rate"] < 1


def test_treewidth(tmp_path, capsys):
    path = tmp_path / "c.json"
    run(["gen-circuit", "--dim", 2, "--modes", 144, "--sources", 16, "--depth", 1,
         "--metric", "l1", "--out", path], capsys)
    code, out, _ = run(["treewidth", "--circuit", path, "--worst-band", "--kind", "symmetric"],
                       capsys)
    assert code == 0
    data = json.loads(out)
    assert data["width"] == data["decomposition"]["width"]
    outcome = tmp_path / "o.json"
    m = [0] * 144
    for s in (13, 16, 49):
        m[s] = 1
    outcome.write_text(json.dumps(m))
    code, out, _ = run(["treewidth", "--circuit", path, "--outcome", outcome, "--kind", "bipartite"],
                       capsys)
    assert code == 0 and json.loads(out)["width"] >= 1


def test_likelihood(circuit, tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for f, seed in ((a, 1), (b, 2)):
        run(["sample", "--circuit", circuit, "--kind", "spbs", "--n", 50, "--seed", seed, "--out", f],
            capsys)
    running = tmp_path / "run.txt"
    code, out, _ = run(["likelihood", "--samples-a", a, "--samples-b", b, "--model", circuit,
                        "--kind", "spbs", "--running", running], capsys)
    assert code == 0
    rep = json.loads(out)
    code, out, _ = run(["likelihood", "--samples-a", b, "--samples-b", a, "--model", circuit,
                        "--kind", "spbs"], capsys)
    assert json.loads(out)["ratio"] == -rep["ratio"]
    assert len(running.read_text().splitlines()) == 50
    code, out, _ = run(["likelihood", "--samples-a", a, "--samples-b", b, "--model", circuit,
                        "--kind", "spbs", "--marginal-modes", "0,2"], capsys)
    assert code == 0 and json.loads(out)["marginal_modes"] == [0, 2]


def test_bench(capsys):
    code, out, _ = run(["bench", "--family", "banded", "--sizes", "8:12:2"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].split() == ["family", "n", "width", "seconds"]
    assert len([ln for ln in lines if ln.startswith("banded")]) == 3


def test_plain_matrix_circuit(tmp_path, capsys):
    path = tmp_path / "u.json"
    path.write_text(json.dumps({"U": encode_complex(haar_unitary(3, 1)), "sources": [0, 1]}))
    code, out, _ = run(["exact-dist", "--circuit", path, "--kind", "gbs", "--m-max", 2], capsys)
    assert code == 0 and "pmf" in json.loads(out)


class TestExitCodes:
    def test_usage(self, capsys):
        code, _, err = run(["sample", "--bogus"], capsys)
        assert code == 2 and json.loads(err)["error"] == "usage"

    def test_parse(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code, _, err = run(["exact-dist", "--circuit", bad, "--kind", "spbs"], capsys)
        assert code == 3 and json.loads(err)["error"] == "parse"

    def test_missing_file(self, tmp_path, capsys):
        code, _, _ = run(["exact-dist", "--circuit", tmp_path / "none.json", "--kind", "spbs"], capsys)
        assert code == 3

    def test_cap(self, tmp_path, capsys):
        path = tmp_path / "c.json"
        run(["gen-circuit", "--dim", 1, "--modes", 16, "--sources", 4, "--depth", 1, "--out", path],
            capsys)
        code, _, err = run(["exact-dist", "--circuit", path, "--kind", "spbs"], capsys)
        assert code == 4 and json.loads(err)["error"] == "cap"

    def test_numerical(self, tmp_path, capsys):
        path = tmp_path / "u.json"
        path.write_text(json.dumps({"U": [[[1, 0], [1, 0]], [[1, 0], [-1, 0]]], "sources": [0, 1]}))
        a = tmp_path / "a.jsonl"
        a.write_text('{"m": [2, 0], "flag": "ok"}\n')
        code, _, err = run(["likelihood", "--samples-a", a, "--samples-b", a, "--model", path,
                            "--kind", "spbs"], capsys)
        assert code == 0
        b = tmp_path / "b.jsonl"
        b.write_text('{"m": [1, 1], "flag": "ok"}\n')
        code, _, err = run(["likelihood", "--samples-a", a, "--samples-b", b, "--model", path,
                            "--kind", "spbs"], capsys)
        assert code == 5 and json.loads(err)["error"] == "numerical"


def test_module_entry_point(tmp_path):
    out = tmp_path / "c.json"
    proc = subprocess.run([sys.executable, "-m", "twboson", "gen-circuit", "--dim", "1", "--modes",
                           "4", "--sources", "2", "--depth", "1", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and out.exists()
    proc = subprocess.run([sys.executable, "-m", "twboson", "nope"], capture_output=True, text=True)
    assert proc.returncode == 2
