from __future__ import annotations

import json

import pytest

from sqckit.cli import main

QD = '{"kind": "quad_dip"}'


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_certify_exit_codes(capsys, tmp_path):
    rep = tmp_path / "r.json"
    code, out, _ = run(capsys, "certify", "--fixture", "ex_6_1", "--domain", "interval:-5:5", "--sigma", "2",
                       "--no-timestamp")
    assert code == 0 and json.loads(out)["disclaimer"]
    code, _, _ = run(capsys, "certify", "--fixture", "ex_6_1", "--domain", "interval:-5:5", "--sigma", "4",
                     "--report", str(rep), "--format", "table")
    assert code == 1
    w = json.loads(rep.read_text())["result"]["falsify"]["witness"]
    assert w["triple"]["x"] == [-5.0] and w["triple"]["y"] == [5.0] and w["triple"]["lambda"] == 0.5


def test_inline_expr(capsys):
    code, out, _ = run(capsys, "estimate", "--expr", QD, "--domain", "interval:-10:10", "--oracle",
                       "--format", "table")
    assert code == 0 and out.startswith("sigma_hat=2.0")


def test_usage_errors(capsys):
    assert run(capsys, "certify", "--fixture", "ex_6_1", "--domain", "box:0:-1", "--sigma", "1")[0] == 2
    assert run(capsys, "certify", "--domain", "interval:0:1", "--sigma", "1")[0] == 2
    assert run(capsys, "certify", "--fixture", "ex_6_1")[0] == 2
    assert run(capsys, "estimate", "--expr", '{"kind": "nope"}', "--domain", "interval:0:1")[0] == 2
    assert run(capsys, "prox", "--expr", QD, "--v", "0")[0] == 2


@pytest.mark.parametrize("args", [
    ("certify", "--fixture", "norm_ball_r1", "--sigma", "0.5", "--budget", "20000"),
    ("estimate", "--fixture", "ex_6_1", "--budget", "20000"),
])
def test_reports_byte_identical_across_threads(capsys, tmp_path, args):
    blobs = []
    for t in ("1", "4"):
        path = tmp_path / f"{t}.json"
        run(capsys, *args, "--threads", t, "--no-timestamp", "--report", str(path))
        blobs.append(path.read_bytes())
    assert blobs[0] == blobs[1]


def test_timestamp_present_by_default(capsys):
    _, out, _ = run(capsys, "modulus", "--p", "2", "--eps", "0.5,1")
    rep = json.loads(out)
    assert "timestamp" in rep and rep["kernel_backend"] in ("cython", "python")


def test_modulus_assumption(capsys):
    assert run(capsys, "modulus", "--p", "2", "--sigma", "1")[0] == 0
    assert run(capsys, "modulus", "--p", "4", "--sigma", "1")[0] == 1
    code, out, _ = run(capsys, "modulus", "--p", "2", "--eps", "1", "--format", "csv")
    assert out.splitlines()[0] == "eps,delta,source"
    assert out.splitlines()[1].startswith("1.0,0.1339745962155613")


def test_gauge(capsys, tmp_path):
    body = tmp_path / "b.json"
    body.write_text(json.dumps({"kind": "box", "lo": [-1, -1], "hi": [1, 1]}))
    assert run(capsys, "gauge", "--body", str(body), "--sigma", "0.5")[0] == 1


def test_prox_and_growth(capsys):
    code, out, _ = run(capsys, "prox", "--fixture", "ex_6_1", "--v", "3", "--format", "table")
    assert code == 0 and abs(float(out.strip()[1:-1]) - 1.0) < 1e-6
    assert run(capsys, "growth", "--fixture", "ex_6_1", "--xbar", "0", "--sigma", "2", "--samples", "2000")[0] == 0
    code, out, _ = run(capsys, "growth", "--fixture", "ex_6_1", "--xbar", "0", "--sigma", "8",
                       "--samples", "2000", "--format", "csv")
    assert code == 1 and out.splitlines()[0] == "y,f_y,bound" and len(out.splitlines()) > 1


def test_coercive(capsys):
    code, out, _ = run(capsys, "coercive", "--fixture", "ex_6_2", "--order", "1", "--radii", "10,100",
                       "--format", "table")
    assert code == 0 and "verdict: negative" in out


def test_corpus_list(capsys):
    code, out, _ = run(capsys, "corpus", "list", "--format", "table")
    assert code == 0 and len(out.splitlines()) == 20
