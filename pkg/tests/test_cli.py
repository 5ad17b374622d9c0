import json

import numpy as np
import pytest

from qtdnn.cli import main
from qtdnn.tunnelling import read_curve_csv

FAST = ["--runs", "3", "--epochs", "40", "--lr", "0.01"]


def test_barrier_curve_single_point(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert main(["barrier-curve", "--s", "0.5", "--points", "1", "--emin", "1", "--emax", "1", "--out", str(out)]) == 0
    rows = read_curve_csv(out)
    assert len(rows) == 1
    assert rows[0][0] == 1.0 and rows[0][1] == pytest.approx(0.941176, abs=1e-6)
    assert (tmp_path / "c.csv.manifest.json").exists()


def test_barrier_curve_dense(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["barrier-curve", "--s", "0.5", "--points", "400", "--emax", "5", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "E_over_V0,T"
    rows = [tuple(map(float, line.split(","))) for line in lines[1:]]
    assert all(len(r) == 2 for r in rows) and len(rows) == 400
    assert all(a[0] < b[0] for a, b in zip(rows, rows[1:]))


@pytest.mark.parametrize(
    "args",
    [
        ["barrier-curve", "--points", "0", "--out", "x.csv"],
        ["barrier-curve", "--s", "-1", "--out", "x.csv"],
        ["barrier-curve", "--emin", "3", "--emax", "1", "--out", "x.csv"],
        ["perceive", "--runs", "0", "--out-dir", "o"],
        ["perceive", "--activation", "tanh", "--out-dir", "o"],
        ["perceive", "--seed", "1", "--entropy-file", "e.bin", "--out-dir", "o"],
        ["perceive"],
        ["no-such-command"],
    ],
)
def test_usage_errors_exit_2(tmp_path, monkeypatch, args):
    monkeypatch.chdir(tmp_path)
    assert main(args) == 2


def test_unwritable_output_exits_1(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["barrier-curve", "--out", str(blocker / "c.csv")]) == 1


def test_perceive_twice_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["perceive", "--seed", "1", *FAST, "--out-dir", str(a)]) == 0
    assert main(["perceive", "--seed", "1", *FAST, "--out-dir", str(b)]) == 0
    assert (a / "series.csv").read_bytes() == (b / "series.csv").read_bytes()
    lines = (a / "series.csv").read_text().splitlines()
    assert len(lines) == 4
    for line in lines[1:]:
        _, p0, p1, pc = line.split(",")
        assert 0 <= float(p1) <= 1 and pc in ("0", "1")


def test_perceive_manifest(tmp_path):
    assert main(["perceive", "--seed", "4", *FAST, "--out-dir", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "perceive"
    assert manifest["entropy"] == {"provider": "seeded", "seed": 4}
    assert set(manifest["outputs"]) == {"series.csv"}
    assert "timestamp" not in json.dumps(manifest)


def test_rubin_sizes_input_layer(tmp_path):
    path = tmp_path / "e.bin"
    n_weights = 400 * 20 + 20 * 20 * 2 + 20 * 2
    path.write_bytes(np.zeros(n_weights, dtype="<u2").tobytes())
    args = ["perceive", "--illusion", "rubin", "--entropy-file", str(path), "--runs", "1", "--epochs", "2",
            "--out-dir", str(tmp_path / "o")]
    assert main(args) == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["entropy"]["block_size"] == n_weights
    # one word short of a second run
    assert main([*args[:-4], "--runs", "2", "--out-dir", str(tmp_path / "p")]) == 3


def test_entropy_exhaustion_exit_3(tmp_path, capsys):
    path = tmp_path / "e.bin"
    path.write_bytes(b"\x00" * 8)
    assert main(["perceive", "--entropy-file", str(path), *FAST, "--out-dir", str(tmp_path / "o")]) == 3
    assert "run 0" in capsys.readouterr().err


def test_divergence_exit_4(tmp_path):
    args = ["perceive", "--activation", "relu", "--lr", "1e300", "--epochs", "5", "--runs", "1",
            "--seed", "0", "--out-dir", str(tmp_path)]
    assert main(args) == 4


def test_compare_outputs(tmp_path, capsys):
    assert main(["compare", "--seed", "2", *FAST, "--out-dir", str(tmp_path)]) == 0
    for name in ("qt.csv", "relu.csv", "sigmoid.csv", "dtw_matrix.csv", "manifest.json"):
        assert (tmp_path / name).exists()
    rows = [line.split(",") for line in (tmp_path / "dtw_matrix.csv").read_text().splitlines()]
    assert rows[0] == ["activation", "qt", "relu", "sigmoid"]
    assert [float(rows[i][i]) for i in (1, 2, 3)] == [0.0, 0.0, 0.0]
    assert "DTW(qt, sigmoid)" in capsys.readouterr().out


@pytest.mark.parametrize("name,size", [("necker", 10), ("rubin", 20)])
def test_stimuli_command(tmp_path, name, size):
    assert main(["stimuli", "--set", name, "--out-dir", str(tmp_path)]) == 0
    pgms = sorted(tmp_path.glob("*.pgm"))
    assert len(pgms) == 3
    for p in pgms:
        assert p.read_text().splitlines()[2] == f"{size} {size}"


def test_stimuli_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["stimuli", "--set", "necker", "--out-dir", str(blocker / "sub")]) == 1


def test_qrng_fetch_grows_cache(qrng_server, tmp_path):
    cache = tmp_path / "c.bin"
    assert main(["qrng-fetch", "--url", qrng_server.url, "--count", "100", "--cache", str(cache)]) == 0
    assert cache.stat().st_size == 200
    assert main(["qrng-fetch", "--url", qrng_server.url, "--count", "100", "--cache", str(cache)]) == 0
    assert cache.stat().st_size == 400


def test_qrng_fetch_server_down(dead_url, tmp_path, capsys):
    cache = tmp_path / "c.bin"
    base = ["qrng-fetch", "--url", dead_url, "--count", "10", "--cache", str(cache), "--timeout", "1", "--retries", "0"]
    assert main(base) == 5
    cache.write_bytes(b"\x01\x00" * 4)
    assert main(base) == 0
    assert "using cache" in capsys.readouterr().out


def test_qrng_fetch_malformed(qrng_server, tmp_path, capsys):
    qrng_server.mode = "garbage"
    assert main(["qrng-fetch", "--url", qrng_server.url, "--count", "5", "--cache", str(tmp_path / "c.bin")]) == 5
    assert "not JSON" in capsys.readouterr().err


def test_perceive_with_qrng_cache(qrng_server, tmp_path):
    cache = tmp_path / "c.bin"
    args = ["perceive", "--qrng-cache", str(cache), "--qrng-url", qrng_server.url, *FAST,
            "--out-dir", str(tmp_path / "o")]
    assert main(args) == 0
    assert cache.stat().st_size == 2 * 3 * (100 * 20 + 20 * 20 * 2 + 20 * 2)
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["entropy"]["provider"] == "qrng"


@pytest.mark.parametrize("command", [
    ["barrier-curve", "--s", "2", "--points", "50", "--out", "{d}/curve.csv"],
    ["perceive", "--seed", "3", *FAST, "--out-dir", "{d}"],
    ["compare", "--seed", "3", *FAST, "--out-dir", "{d}"],
    ["stimuli", "--set", "rubin", "--format", "csv", "--out-dir", "{d}"],
], ids=lambda c: c[0])
def test_rerun_reproduces_outputs(tmp_path, command):
    first = tmp_path / "first"
    first.mkdir()
    assert main([a.replace("{d}", str(first)) for a in command]) == 0
    manifest = next(first.glob("*manifest.json"))
    second = tmp_path / "second"
    assert main(["rerun", str(manifest), "--out-dir", str(second)]) == 0
    for out in json.loads(manifest.read_text())["outputs"]:
        assert (first / out).read_bytes() == (second / out).read_bytes()


def test_rerun_detects_tampering(tmp_path, capsys):
    assert main(["barrier-curve", "--points", "5", "--out", str(tmp_path / "c.csv")]) == 0
    manifest = tmp_path / "c.csv.manifest.json"
    data = json.loads(manifest.read_text())
    data["outputs"]["c.csv"] = "0" * 64
    manifest.write_text(json.dumps(data))
    assert main(["rerun", str(manifest)]) == 1
    assert "differ" in capsys.readouterr().err


def test_config_file_with_override(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text(f"# experiment\nseed = 5\nruns = 2\nepochs = 30\nout_dir = {tmp_path / 'a'}\n")
    assert main(["perceive", "--config", str(conf)]) == 0
    assert len((tmp_path / "a" / "series.csv").read_text().splitlines()) == 3
    assert main(["perceive", "--config", str(conf), "--runs", "3", "--out-dir", str(tmp_path / "b")]) == 0
    assert len((tmp_path / "b" / "series.csv").read_text().splitlines()) == 4
    conf.write_text("colour = blue\n")
    assert main(["perceive", "--config", str(conf), "--out-dir", str(tmp_path / "c")]) == 2


def test_version(capsys):
    with pytest.raises(SystemExit):
        import qtdnn.cli as cli
        cli.build_parser().parse_args(["--version"])
    assert "qtdnn" in capsys.readouterr().out
