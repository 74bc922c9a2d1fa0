import csv
import json

import pytest

from otprop.cli import main
from otprop.datasets import bundled_path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def two_blobs(tmp_path):
    path = tmp_path / "blobs.csv"
    lines = ["x,y,kind"]
    for k in range(10):
        lines.append(f"{0.1 * k},{0.05 * k},left")
        lines.append(f"{8 + 0.1 * k},{8 - 0.05 * k},right")
    path.write_text("\n".join(lines) + "\n")
    return path


def test_transduce_and_induct(tmp_path, two_blobs, capsys):
    out, model, trace = tmp_path / "pred.csv", tmp_path / "model.csv", tmp_path / "trace.csv"
    code = main(["transduce", "--data", str(two_blobs), "--label-col", "kind", "--labeled-frac", "0.2",
                 "--seed", "3", "--out", str(out), "--model-out", str(model), "--trace-out", str(trace)])
    assert code == 0
    rows = read_rows(out)
    assert len(rows) == 16
    assert set(rows[0]) == {"index", "true", "predicted", "certainty", "iteration"}
    assert all(r["true"] == r["predicted"] for r in rows)
    assert "acc=1.0000" in capsys.readouterr().out
    assert trace.read_text().startswith("t,m_t,n_t")

    points = tmp_path / "new.csv"
    points.write_text("x,y\n0.2,0.1\n8.5,7.9\n")
    induced = tmp_path / "induced.csv"
    assert main(["induct", "--model", str(model), "--points", str(points), "--out", str(induced)]) == 0
    assert [r["predicted"] for r in read_rows(induced)] == ["left", "right"]


def test_induct_ignores_label_column(tmp_path, two_blobs):
    model = tmp_path / "model.csv"
    main(["transduce", "--data", str(two_blobs), "--label-col", "kind", "--out", str(tmp_path / "p.csv"),
          "--model-out", str(model)])
    induced = tmp_path / "induced.csv"
    assert main(["induct", "--model", str(model), "--points", str(two_blobs), "--label-col", "kind",
                 "--out", str(induced)]) == 0
    assert len(read_rows(induced)) == 20


def test_metrics_command(tmp_path, capsys):
    truth, pred = tmp_path / "t.csv", tmp_path / "p.csv"
    truth.write_text("label\na\na\nb\nb\n")
    pred.write_text("predicted\na\nb\nb\nb\n")
    assert main(["metrics", "--truth", str(truth), "--pred", str(pred)]) == 0
    out = capsys.readouterr().out
    assert "acc=0.750000" in out and "nmi=" in out and "ari=" in out


def test_metrics_reads_transduce_output(tmp_path, two_blobs, capsys):
    out = tmp_path / "pred.csv"
    main(["transduce", "--data", str(two_blobs), "--label-col", "kind", "--out", str(out)])
    capsys.readouterr()
    rows = read_rows(out)
    expected = sum(r["true"] == r["predicted"] for r in rows) / len(rows)
    assert main(["metrics", "--truth", str(out), "--pred", str(out)]) == 0
    assert f"acc={expected:.6f}" in capsys.readouterr().out


def test_benchmark_command(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"datasets": [{"path": str(bundled_path("iris")), "label_col": "class"}],
                               "fractions": [0.25], "seeds": [0, 1], "algorithms": ["otp", "lp"],
                               "sigma_grid": [0.5]}))
    out_dir = tmp_path / "out"
    assert main(["benchmark", "--config", str(cfg), "--out-dir", str(out_dir)]) == 0
    assert len(read_rows(out_dir / "results.csv")) == 4
    assert "aggregate" in json.loads((out_dir / "results.json").read_text())
    assert len(list((out_dir / "traces").iterdir())) == 2


def test_bad_input_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,a\n")
    assert main(["transduce", "--data", str(bad), "--label-col", "y", "--out", str(tmp_path / "o.csv")]) == 2
    assert "error:" in capsys.readouterr().err
    assert main(["transduce", "--data", str(tmp_path / "nope.csv"), "--label-col", "y",
                 "--out", str(tmp_path / "o.csv")]) == 2


def test_missing_subcommand():
    with pytest.raises(SystemExit):
        main([])
