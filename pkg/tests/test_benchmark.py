import csv
import io
import json

import numpy as np
import pytest

from otprop.benchmark import (
    BenchmarkConfig,
    emit_results,
    load_config,
    results_csv,
    run_benchmark,
    write_traces,
)
from otprop.datasets import Dataset, load_bundled


def tiny_dataset(name="tiny", n_per_class=12, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(loc=c, scale=0.5, size=(n_per_class, 2)) for c in (0.0, 4.0)])
    return Dataset(name, X, np.repeat([0, 1], n_per_class), ("a", "b"))


FAST = dict(sigma_grid=[0.5, 1.0], record_runtime=False)


def test_empty_algorithm_list():
    report = run_benchmark([tiny_dataset()], [0.25], [0, 1], [])
    assert report.cells == []
    with pytest.raises(ValueError):
        emit_results(report, "csv", "unused.csv")


def test_unknown_algorithm():
    with pytest.raises(ValueError):
        run_benchmark([tiny_dataset()], [0.25], [0], ["svm"])


@pytest.fixture(scope="module")
def iris_report():
    cfg = BenchmarkConfig(algorithms=["otp"], **FAST)
    return run_benchmark([load_bundled("iris")], [0.15, 0.25, 0.35], list(range(10)), ["otp"], cfg)


def test_iris_cell_count(iris_report):
    assert len(iris_report.cells) == 30
    assert all(c.error is None for c in iris_report.cells)
    assert len(iris_report.aggregate["summary"]) == 3


def test_aggregate_means(iris_report):
    for entry in iris_report.aggregate["summary"]:
        group = [c for c in iris_report.cells if c.fraction == entry["fraction"]]
        for m in ("acc", "nmi", "ari"):
            assert entry[f"{m}_mean"] == pytest.approx(np.mean([getattr(c, m) for c in group]), abs=1e-12)
            assert entry[f"{m}_std"] == pytest.approx(np.std([getattr(c, m) for c in group]), abs=1e-12)


def test_metric_ranges(iris_report):
    for c in iris_report.cells:
        assert 0 <= c.acc <= 1 and 0 <= c.nmi <= 1 and -1 <= c.ari <= 1


def test_single_algorithm_score_is_dataset_count(iris_report):
    for entry in iris_report.aggregate["score"]:
        assert entry["score"] == {"otp": 1.0}


def test_csv_rows(iris_report, tmp_path):
    path = emit_results(iris_report, "csv", tmp_path / "r.csv")
    rows = list(csv.reader(io.StringIO(path.read_text())))
    assert rows[0] == ["dataset", "fraction", "seed", "algorithm", "acc", "nmi", "ari", "runtime_s"]
    assert len(rows) == 31


def test_json_has_aggregate(iris_report, tmp_path):
    payload = json.loads(emit_results(iris_report, "json", tmp_path / "r.json").read_text())
    assert len(payload["cells"]) == 30
    assert {"summary", "score"} <= set(payload["aggregate"])


def test_reemission_is_byte_identical(iris_report, tmp_path):
    for fmt in ("csv", "json"):
        a = emit_results(iris_report, fmt, tmp_path / f"a.{fmt}").read_bytes()
        b = emit_results(iris_report, fmt, tmp_path / f"b.{fmt}").read_bytes()
        assert a == b


def test_bad_format_and_path(iris_report, tmp_path):
    with pytest.raises(ValueError):
        emit_results(iris_report, "xml", tmp_path / "r.xml")
    with pytest.raises(ValueError):
        emit_results(iris_report, "csv", tmp_path / "missing" / "r.csv")


def test_traces_written(iris_report, tmp_path):
    paths = write_traces(iris_report, tmp_path / "traces")
    assert len(paths) == 30
    assert paths[0].read_text().startswith("t,m_t,n_t,zeta_t,alpha_used,relaxed\n")


def test_one_cell_one_row(tmp_path):
    cfg = BenchmarkConfig(**FAST)
    report = run_benchmark([tiny_dataset()], [0.25], [0], ["otp"], cfg)
    text = emit_results(report, "csv", tmp_path / "r.csv").read_text()
    assert len(text.splitlines()) == 2


def test_lp_and_otp_together():
    cfg = BenchmarkConfig(**FAST)
    report = run_benchmark([tiny_dataset(), tiny_dataset("tiny2", seed=1)], [0.25], [0, 1], ["otp", "lp"], cfg)
    assert len(report.cells) == 8
    lp = [c for c in report.cells if c.algorithm == "lp"]
    assert all(c.sigma in (0.5, 1.0) for c in lp)
    for entry in report.aggregate["score"]:
        score = entry["score"]
        assert max(score.values()) <= 2.0 and min(score.values()) > 0


def test_infeasible_fraction_recorded_and_run_continues():
    cfg = BenchmarkConfig(**FAST)
    report = run_benchmark([tiny_dataset(n_per_class=3)], [0.1, 0.5], [0], ["otp"], cfg)
    errors = [c for c in report.cells if c.error]
    assert len(errors) == 1 and errors[0].fraction == 0.1
    assert len(report.ok_cells) == 1


def test_large_datasets_skipped_by_default():
    big = Dataset("big", np.zeros((601, 1)), np.arange(601) % 2, ("a", "b"))
    report = run_benchmark([big], [0.25], [0], ["otp"], BenchmarkConfig(**FAST))
    assert report.cells == [] and report.skipped


def test_runtime_recording(tmp_path):
    ds = tiny_dataset()
    timed = run_benchmark([ds], [0.25], [0], ["otp"], BenchmarkConfig(sigma_grid=[1.0]))
    assert timed.cells[0].runtime_s > 0


def test_load_config(tmp_path):
    (tmp_path / "pts.csv").write_text("x,y,cls\n0,0,a\n0,1,a\n5,5,b\n5,6,b\n")
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "datasets": ["iris", {"path": "pts.csv", "label_col": "cls", "name": "pts"}],
        "fractions": [0.5], "seeds": [1, 2], "algorithms": ["lp"],
        "epsilon": 0.02, "alpha": 0.1, "sigma_grid": [0.3],
        "tolerances": {"sinkhorn_tol": 1e-8, "lp_max_iter": 50},
    }))
    datasets, cfg = load_config(cfg_path)
    assert [d.name for d in datasets] == ["iris", "pts"]
    assert cfg.fractions == [0.5] and cfg.seeds == [1, 2] and cfg.algorithms == ["lp"]
    assert (cfg.epsilon, cfg.alpha, cfg.sigma_grid) == (0.02, 0.1, [0.3])
    assert cfg.sinkhorn_tol == 1e-8 and cfg.lp_max_iter == 50
    assert cfg.otp.epsilon == 0.02


def test_results_csv_uses_repr_floats(iris_report):
    first = results_csv(iris_report).splitlines()[1].split(",")
    assert float(first[4]) == iris_report.ok_cells[0].acc
