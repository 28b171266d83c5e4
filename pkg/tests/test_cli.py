import csv
import hashlib
import json

import numpy as np
import pytest

from lance import read_tensor, verify, write_tensor
from lance.cli import main
from lance.winograd import WinogradBasis, basis_f2x2_3x3


@pytest.fixture
def tensors(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((1, 6, 6, 2)).astype(np.float32)
    delta = np.zeros((2, 3, 3, 2), np.float32)
    delta[0, 1, 1, 0] = delta[1, 1, 1, 1] = 1
    write_tensor(x, tmp_path / "x.lten")
    write_tensor(delta, tmp_path / "delta.lten")
    write_tensor(rng.standard_normal((3, 3, 3, 2)).astype(np.float32), tmp_path / "w.lten")
    return tmp_path, x


def test_verify_passes(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert all(line.startswith("PASS") for line in lines[:-1])
    assert lines[-1] == f"{len(verify.CHECKS)}/{len(verify.CHECKS)} checks passed"


def test_verify_report_names_formulas():
    results = verify.run_checks()
    formulas = " ".join(r.formula for r in results)
    for term in ("Bt d^ B", "Q(x)", "Q'", "At[(G g Gt) . (Bt d B)]A", "(m+r-1)^2"):
        assert term in formulas


def test_corrupted_basis_fails_golden_check():
    good = basis_f2x2_3x3()
    bt = good.bt_mat.copy()
    bt[1, 2] = -1
    bad = WinogradBasis(good.m, good.r, good.g_mat, bt, good.at_mat)
    results = {r.name: r for r in verify.run_checks(bad)}
    assert not results["input transform golden vector"].passed
    assert not results["minimal filtering identity"].passed
    assert results["quantizer contract"].passed


def test_verify_exit_code_on_failure(monkeypatch, capsys):
    failing = verify.Check("always fails", "none", lambda basis: (False, "forced"))
    monkeypatch.setattr(verify, "CHECKS", verify.CHECKS + [failing])
    assert main(["verify"]) == 1
    assert "FAIL  always fails" in capsys.readouterr().out


def test_run_delta_filter_copies_input(tensors, capsys):
    tmp, x = tensors
    out = tmp / "y.lten"
    code = main(["run", "--input", str(tmp / "x.lten"), "--filters", str(tmp / "delta.lten"),
                 "--engine", "direct", "--pad", "1", "--out", str(out)])
    assert code == 0
    y = read_tensor(out)
    assert y.tobytes() == x.tobytes()
    assert (out.read_bytes()[39:]) == (tmp / "x.lten").read_bytes()[39:]
    assert "1x6x6x2" in capsys.readouterr().out


def test_run_lance_prints_checksum(tensors, capsys):
    tmp, _ = tensors
    out = tmp / "y.lten"
    code = main(["run", "--input", str(tmp / "x.lten"), "--filters", str(tmp / "w.lten"),
                 "--engine", "lance-faithful", "--bits-w", "8", "--bits-i", "8", "--out", str(out)])
    assert code == 0
    y = read_tensor(out)
    assert y.shape == (1, 4, 4, 3)
    assert hashlib.sha256(y.tobytes()).hexdigest() in capsys.readouterr().out


def test_run_gemm_defaults_to_position(tensors):
    tmp, _ = tensors
    args = ["run", "--input", str(tmp / "x.lten"), "--filters", str(tmp / "w.lten"),
            "--engine", "lance-gemm", "--out", str(tmp / "g.lten")]
    assert main(args) == 0
    assert main(args + ["--granularity", "tile"]) == 2


def test_run_missing_file(tmp_path, capsys):
    code = main(["run", "--input", str(tmp_path / "nope"), "--filters", str(tmp_path / "nope"),
                 "--out", str(tmp_path / "y")])
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_run_bad_format(tensors):
    tmp, _ = tensors
    (tmp / "bad.lten").write_bytes(b"XXXX" + bytes(40))
    assert main(["run", "--input", str(tmp / "bad.lten"), "--filters", str(tmp / "w.lten"),
                 "--out", str(tmp / "y")]) == 2


def test_run_channel_mismatch(tensors):
    tmp, _ = tensors
    write_tensor(np.ones((1, 3, 3, 5), np.float32), tmp / "w5.lten")
    assert main(["run", "--input", str(tmp / "x.lten"), "--filters", str(tmp / "w5.lten"),
                 "--out", str(tmp / "y")]) == 2


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--engine", "fft"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def _bench(tmp_path, layers, name="report", extra=()):
    cfg = tmp_path / f"{name}.json.in"
    cfg.write_text(json.dumps(layers))
    code = main(["bench", "--config", str(cfg), "--out", str(tmp_path / name), *extra])
    return code, tmp_path / f"{name}.csv", tmp_path / f"{name}.json"


def test_bench_one_small_layer(tmp_path):
    code, csv_path, json_path = _bench(tmp_path, [{"name": "small", "c": 2, "h": 6, "k": 2}])
    assert code == 0
    rows = list(csv.DictReader(csv_path.open()))
    assert [r["engine"] for r in rows] == ["direct", "winograd", "lance-faithful", "lance-gemm"]
    assert [float(r["ratio_vs_direct"]) for r in rows] == [1.0, 2.25, 2.25, 2.25]
    assert all(int(r["wall_ns"]) > 0 and r["threads"] == "1" for r in rows)
    report = json.loads(json_path.read_text())
    assert len(report["rows"]) == 4 and report["threads"] == 1


def test_bench_empty_config(tmp_path):
    code, csv_path, json_path = _bench(tmp_path, [])
    assert code == 0
    assert csv_path.read_text().count("\n") == 1  # header only
    assert json.loads(json_path.read_text())["rows"] == []


def test_bench_odd_output_sets_waste(tmp_path):
    code, csv_path, _ = _bench(tmp_path, {"layers": [{"c": 1, "h": 7, "k": 1, "pad": 0}]})
    assert code == 0
    rows = list(csv.DictReader(csv_path.open()))
    assert [r["waste"] for r in rows] == ["False", "True", "True", "True"]


@pytest.mark.parametrize(
    "layers",
    [
        [{"c": 1, "h": 7}],
        [{"c": 1, "h": 7, "k": 1, "bits_w": 12}],
        [{"c": 1, "h": 7, "k": 1, "stride": 2}],
        [{"c": 1, "h": 7, "k": 1, "seed": -1}],
        {"layer": []},
    ],
)
def test_bench_invalid_config(tmp_path, layers):
    code, _, _ = _bench(tmp_path, layers)
    assert code == 2


def test_bench_respects_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("LANCE_THREADS", "2")
    code, _, json_path = _bench(tmp_path, [{"c": 1, "h": 6, "k": 1}])
    assert code == 0
    assert json.loads(json_path.read_text())["threads"] == 2
    monkeypatch.setenv("LANCE_THREADS", "zero")
    assert main(["verify"]) == 2
