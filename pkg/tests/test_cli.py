import json

import numpy as np
import pytest

from precistab import cli
from precistab.exceptions import ParseError


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def write(tmp_path):
    def _write(name, text):
        p = tmp_path / name
        p.write_bytes(text.encode())
        return p

    return _write


def test_read_csv_comments_and_crlf(write):
    p = write("a.csv", "# header\r\n1,2\r\n\r\n3,4\r\n")
    assert np.array_equal(cli.read_csv(p), [[1.0, 2.0], [3.0, 4.0]])


def test_read_csv_errors(write):
    with pytest.raises(ParseError) as exc:
        cli.read_csv(write("r.csv", "1,2\n3\n"))
    assert exc.value.line == 2
    with pytest.raises(ParseError) as exc:
        cli.read_csv(write("m.csv", "# c\n1,2\n3,abc\n"))
    assert (exc.value.line, exc.value.column) == (3, 2)


def test_estimate(capsys, write):
    code, out, err = run(capsys, "estimate", write("a.csv", "1,0\n-1,0\n"))
    assert code == 0 and err == ""
    doc = json.loads(out)
    assert doc["precistab_schema"] == 1
    assert doc["covariance"] == {"n": 2, "data": [1.0, 0.0, 0.0, 0.0]}
    assert doc["eigenvalues"] == [1.0, 0.0]
    assert doc["spectral_gap"] == 1.0


def test_estimate_single_row(capsys, write):
    code, out, _ = run(capsys, "estimate", write("a.csv", "3,4,5\n"))
    assert code == 0
    assert json.loads(out)["covariance"]["data"] == [0.0] * 9


def test_estimate_errors(capsys, write):
    code, out, err = run(capsys, "estimate", write("bad.csv", "1,0\n1,x\n"))
    assert code == 3 and out == ""
    assert "line 2, column 2" in err
    code, _, err = run(capsys, "estimate", write("empty.csv", "# nothing\n"))
    assert code == 3


def test_json_roundtrip_is_byte_identical(capsys, write, rng):
    X = rng.standard_normal((7, 3)) / 3
    text = "\n".join(",".join(repr(float(v)) for v in row) for row in X)
    _, out, _ = run(capsys, "estimate", write("x.csv", text))
    doc = json.loads(out)
    assert cli.dumps(doc) == out
    C = cli.matrix_from_json(doc["covariance"])
    assert cli.matrix_json(C) == doc["covariance"]


def test_csv_format(capsys, write):
    code, out, _ = run(capsys, "estimate", write("a.csv", "1,0\n-1,0\n"), "--format", "csv")
    assert code == 0 and out == "1.0,0.0\n0.0,0.0\n"


def test_precision_closed_form(capsys, write, tmp_path):
    target = tmp_path / "out.json"
    data = write("d.csv", "1,0\n-1,0\n0,2\n0,-2\n")
    code, out, _ = run(capsys, "precision", data, "--lambda", 0.5, "--out", target)
    assert code == 0 and out == ""
    doc = json.loads(target.read_text())
    # covariance diag(0.5, 2) -> 1/(d + lam)
    assert np.allclose(doc["precision"]["data"], [1.0, 0.0, 0.0, 0.4], atol=1e-9)
    assert doc["edges"] == [] and doc["kkt_residual"] <= 1e-7


def test_precision_smoothed_and_rejects_zero_lambda(capsys, write):
    data = write("d.csv", "1,0.5\n-1,0\n0,2\n0.3,-2\n")
    code, out, _ = run(capsys, "precision", data, "--lambda", 0.5, "--eps", 1e-6)
    doc = json.loads(out)
    assert code == 0 and "smoothed" in doc and doc["smoothed"]["gap_fro"] < 1e-3
    code, out, err = run(capsys, "precision", data, "--lambda", 0)
    assert code == 3 and out == "" and "lam > 0" in err


def test_wasserstein(capsys, write):
    a, b = write("a.csv", "0\n1\n"), write("b.csv", "0\n3\n")
    code, out, _ = run(capsys, "wasserstein", a, b, "--kind", "scalar")
    assert code == 0 and json.loads(out)["w1"] == 1.0
    code, out, _ = run(capsys, "wasserstein", a, a, "--kind", "scalar")
    assert json.loads(out)["w1"] == 0.0
    code, out, _ = run(capsys, "wasserstein", a, b, "--order", 2)
    doc = json.loads(out)
    assert doc["lower"] <= doc["upper"]
    code, _, err = run(capsys, "wasserstein", a, write("c.csv", "1\n2\n3\n"))
    assert code == 3 and err


def test_wasserstein_matrix_atoms(capsys, write):
    a = write("a.csv", "1,0,0,1\n2,0,0,2\n")
    b = write("b.csv", "1,0,0,1\n1,0,0,1\n")
    code, out, _ = run(capsys, "wasserstein", a, b, "--kind", "matrix")
    assert code == 0 and json.loads(out)["w1"] == pytest.approx(np.sqrt(2) / 2)
    code, _, _ = run(capsys, "wasserstein", write("c.csv", "1,2,0,1\n1,0,0,1\n"), b, "--kind", "matrix")
    assert code == 3


def test_portfolio(capsys, write):
    sigma = write("s.csv", "1,0\n0,1\n")
    code, out, _ = run(capsys, "portfolio", "--mu", "0.1,0.2", "--sigma", sigma, "--z", 0.15)
    doc = json.loads(out)
    assert code == 0 and doc["value"] == pytest.approx(0.25, abs=1e-12)
    assert doc["dual_bound"]["holds"]
    code, out, err = run(capsys, "portfolio", "--mu", "0.1,0.2", "--sigma", sigma, "--z", 0.5)
    assert code == 3 and "[0.1, 0.2]" in err
    code, out, _ = run(capsys, "portfolio", "--mu", "0.3", "--sigma", write("one.csv", "2\n"), "--z", 0.3)
    doc = json.loads(out)
    assert doc["w"] == [pytest.approx(1.0)] and doc["value"] == pytest.approx(1.0)


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["precision", "x.csv"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["estimate", "x.csv", "--seed", "-1"])
    assert exc.value.code == 2


def test_experiment(capsys, write, tmp_path):
    cfg = {
        "n": 3,
        "N": 20,
        "M": 10,
        "seed": 4,
        "statistic": {"kind": "eigenvalues"},
        "family": {"kind": "gaussian", "parameters": "random"},
        "alphas": [0.0, 1.0],
        "bootstrap": 4,
    }
    path = write("cfg.json", json.dumps(cfg))
    outs = []
    for jobs in (1, 2):
        d = tmp_path / f"rep{jobs}"
        code, out, _ = run(capsys, "experiment", path, "--out-dir", d, "--n-jobs", jobs)
        assert code == 0 and json.loads(out)["rows"] == 8
        outs.append((d / "report.csv").read_bytes())
        assert (d / "plot.svg").read_text().startswith("<svg")
        assert json.loads((d / "report.json").read_text())["precistab_schema"] == 1
    assert outs[0] == outs[1]


def test_experiment_config_error(capsys, write):
    code, _, err = run(capsys, "experiment", write("c.json", '{"n": 2, "extra": 1}'))
    assert code == 3 and "/extra" in err
    code, _, err = run(capsys, "experiment", write("c.json", "{not json"))
    assert code == 3 and "line 1" in err
