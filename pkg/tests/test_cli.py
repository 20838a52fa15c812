import csv
import json

import pytest

from dsmil.cli import main
from dsmil.data import generate_concept_dataset, save_dataset
from dsmil.dissimilarity import read_matrix_csv

SMALL = ["--n-pos", "10", "--n-neg", "10", "--bag-size", "4", "--folds", "3", "--seed", "1"]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestEvaluate:
    def test_outputs(self, tmp_path):
        assert main(["evaluate", *SMALL, "--pipeline", "DRS", "--L", "5", "--out", str(tmp_path)]) == 0
        rows = _rows(tmp_path / "results.csv")
        assert [r["fold"] for r in rows] == ["0", "1", "2"]
        (summary,) = json.loads((tmp_path / "summary.json").read_text())
        assert summary["pipeline"] == "DRS" and summary["config"]["L"] == 5 and summary["k"] == 3

    def test_emit_matrix(self, tmp_path):
        main(["evaluate", *SMALL, "--pipeline", "DBS", "--emit-matrix", "--out", str(tmp_path)])
        train = read_matrix_csv(tmp_path / "matrix_fold0_train.csv")
        test = read_matrix_csv(tmp_path / "matrix_fold0_test.csv")
        assert train.shape[1] == test.shape[1] == train.shape[0] * 4
        assert train.shape[0] + test.shape[0] == 20

    def test_from_file(self, tmp_path):
        ds = generate_concept_dataset(n_pos=8, n_neg=8, bag_size=3, seed=2)
        path = tmp_path / "d.csv"
        save_dataset(ds, path)
        main(["evaluate", "--data", str(path), "--pipeline", "Dbag", "--folds", "2", "--out", str(tmp_path / "o")])
        assert len(_rows(tmp_path / "o" / "results.csv")) == 2

    def test_config_file_and_flag_precedence(self, tmp_path):
        ini = tmp_path / "exp.ini"
        ini.write_text("[experiment]\npipeline = Dinst\nL = 7\nn_pos = 10\nn_neg = 10\nbag_size = 3\nfolds = 4\n")
        main(["evaluate", "--config", str(ini), "--folds", "2", "--out", str(tmp_path)])
        (summary,) = json.loads((tmp_path / "summary.json").read_text())
        assert summary["pipeline"] == "Dinst" and summary["k"] == 2

    @pytest.mark.parametrize(
        "args",
        [
            ["--pipeline", "Dfoo"],
            ["--scheme", "BS", "--pipeline", "DRS"],
            ["--data", "missing.csv"],
            ["--data", "x.csv", "--n-pos", "3"],
            ["--combiner", "median"],
            ["--folds", "1"],
        ],
    )
    def test_usage_errors(self, tmp_path, capsys, args):
        with pytest.raises(SystemExit) as exc:
            main(["evaluate", *args, "--out", str(tmp_path)])
        assert exc.value.code == 2
        assert "error" in capsys.readouterr().err

    def test_scheme_selects_pipeline(self, tmp_path):
        main(["evaluate", *SMALL, "--scheme", "BS", "--out", str(tmp_path)])
        (summary,) = json.loads((tmp_path / "summary.json").read_text())
        assert summary["pipeline"] == "DBS"


class TestSweep:
    def test_grid_and_prefix(self, tmp_path):
        main(["sweep", *SMALL, "--L-grid", "2,4", "--s-grid", "3,6", "--out", str(tmp_path)])
        rows = _rows(tmp_path / "sweep.csv")
        assert len(rows) == 2 * 2 * 3
        members = _rows(tmp_path / "sweep_members.csv")
        for r in rows:
            expected = [m["hash"] for m in members if m["s"] == r["s"] and m["fold"] == r["fold"]][int(r["L"]) - 1]
            assert r["last_member_hash"] == expected


class TestLearningCurve:
    def test_rows(self, tmp_path):
        main(["learning-curve", *SMALL, "--sizes", "4,10", "--pipelines", "Dbag,DRS", "--repeats", "2",
              "--L", "3", "--out", str(tmp_path)])
        rows = _rows(tmp_path / "learning_curve.csv")
        assert [(r["pipeline"], r["size"]) for r in rows] == [("Dbag", "4"), ("Dbag", "10"), ("DRS", "4"), ("DRS", "10")]


class TestAnalyze:
    def test_bs_artifacts(self, tmp_path):
        main(["analyze", *SMALL, "--pipeline", "DBS", "--out", str(tmp_path)])
        for name in ("ensemble.json", "weight_ranking.csv", "unselected_columns.csv", "per_subspace_auc.csv",
                     "disagreement.csv", "mds.csv", "bag_size_correlation.json"):
            assert (tmp_path / name).exists(), name
        ranking = _rows(tmp_path / "weight_ranking.csv")
        weights = [float(r["mean_abs_weight"]) for r in ranking]
        assert weights == sorted(weights, reverse=True)

    def test_single_classifier_only_ranking(self, tmp_path):
        main(["analyze", *SMALL, "--pipeline", "Dinst", "--out", str(tmp_path)])
        assert (tmp_path / "weight_ranking.csv").exists()
        assert not (tmp_path / "mds.csv").exists()


class TestGenerate:
    def test_default_name(self, tmp_path):
        main(["generate", "--n-pos", "3", "--n-neg", "2", "--bag-size", "2", "--seed", "4", "--out", str(tmp_path)])
        lines = (tmp_path / "concept_seed4.csv").read_text().splitlines()
        assert len(lines) == 1 + 5 * 2

    def test_rerun_identical(self, tmp_path):
        for name in ("a.csv", "b.csv"):
            main(["generate", "--seed", "9", "--n-pos", "4", "--n-neg", "4", "--file", str(tmp_path / name)])
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_bag_size_correlation_with_equal_sizes(tmp_path):
    main(["analyze", *SMALL, "--pipeline", "DBS", "--out", str(tmp_path)])
    obj = json.loads((tmp_path / "bag_size_correlation.json").read_text())
    assert obj["pearson"] is None and "constant" in obj["undefined"]


def test_bag_size_correlation_with_varied_sizes(tmp_path):
    from dsmil.data import bags_from_arrays
    import numpy as np

    rng = np.random.default_rng(0)
    arrays = [rng.normal(size=(int(rng.integers(1, 6)), 2)) + (2 if i < 10 else 0) for i in range(20)]
    path = tmp_path / "v.csv"
    save_dataset(bags_from_arrays(arrays, [1] * 10 + [-1] * 10), path)
    assert main(["analyze", "--data", str(path), "--pipeline", "DBS", "--folds", "3", "--out", str(tmp_path)]) == 0
    obj = json.loads((tmp_path / "bag_size_correlation.json").read_text())
    assert -1 <= obj["pearson"] <= 1 and obj["n_subspaces"] > 3
