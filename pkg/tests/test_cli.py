import csv
import shutil
from pathlib import Path

from sqlgrad.cli import main

FIXTURES = Path(__file__).parent.parent / "fixtures"


def run(*argv) -> int:
    return main([str(a) for a in argv])


def fixture_args(model: str, out_dir: Path):
    root = FIXTURES / model
    return ["--sql", root / "model.sql", "--config", root / "config.cfg",
            "--data-dir", root, "--out-dir", out_dir]


def read_csv(path: Path):
    with path.open(newline="", encoding="utf-8") as handle:
        return list(csv.reader(handle))


class TestTrain:
    def test_logreg_fixture_artifacts(self, tmp_path, capsys):
        code = run("train", *fixture_args("logreg", tmp_path))
        assert code == 0
        weights = read_csv(tmp_path / "weights.csv")
        assert weights[0] == ["table", "featureName", "value"]
        assert len(weights) - 1 == 3          # one row per feature
        trace = read_csv(tmp_path / "loss_trace.csv")
        assert trace[0] == ["iteration", "objective"]
        losses = [float(row[1]) for row in trace[1:]]
        assert len(losses) == 500
        assert losses[-1] < losses[0]
        assert (tmp_path / "import_weights.sql").exists()
        assert (tmp_path / "features_matrix.csv").exists()
        assert (tmp_path / "targets_matrix.csv").exists()

    def test_missing_targets_csv(self, tmp_path):
        data = tmp_path / "data"
        shutil.copytree(FIXTURES / "logreg", data)
        (data / "targets.csv").unlink()
        out = tmp_path / "out"
        code = run("train", "--sql", data / "model.sql", "--config",
                   data / "config.cfg", "--data-dir", data, "--out-dir", out)
        assert code == 2                      # MissingInput
        assert not out.exists() or not list(out.iterdir())

    def test_hyperparameter_overrides(self, tmp_path):
        code = run("train", *fixture_args("logreg", tmp_path),
                   "--iterations", 7, "--learning-rate", 0.01)
        assert code == 0
        trace = read_csv(tmp_path / "loss_trace.csv")
        assert len(trace) - 1 == 7

    def test_error_line_is_machine_parsable(self, tmp_path, capsys):
        code = run("train", "--sql", tmp_path / "nope.sql", "--config",
                   tmp_path / "nope.cfg", "--data-dir", tmp_path,
                   "--out-dir", tmp_path / "out")
        assert code == 2
        err = capsys.readouterr().err.strip().splitlines()[-1]
        assert err.startswith("error code=MissingInput ")
        assert "message=" in err


class TestTranslate:
    def test_four_output_files(self, tmp_path):
        code = run("translate", *fixture_args("logreg", tmp_path))
        assert code == 0
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == ["export_features.sql", "export_targets.sql",
                         "import_weights.sql", "model_train.py"]

    def test_model_section_matches_trained_program(self, tmp_path):
        """translate + train agree on assignment names and order."""
        from sqlgrad import pipeline

        code = run("translate", *fixture_args("logreg", tmp_path))
        assert code == 0
        script_text = (tmp_path / "model_train.py").read_text()
        bundle = pipeline.prepare(FIXTURES / "logreg" / "model.sql",
                                  FIXTURES / "logreg" / "config.cfg",
                                  FIXTURES / "logreg")
        for assignment in bundle.program.assignments:
            assert f"\n{assignment.name} = tf." in script_text
        positions = [script_text.index(f"\n{a.name} = tf.")
                     for a in bundle.program.assignments]
        assert positions == sorted(positions)


class TestExportQueries:
    def test_two_sql_files(self, tmp_path):
        code = run("export-queries", *fixture_args("sales", tmp_path))
        assert code == 0
        assert sorted(p.name for p in tmp_path.iterdir()) == [
            "export_features.sql", "export_targets.sql"]


class TestImportWeights:
    def test_regenerates_sql_from_csv(self, tmp_path):
        train_dir = tmp_path / "trained"
        assert run("train", *fixture_args("logreg", train_dir)) == 0
        out = tmp_path / "imported"
        root = FIXTURES / "logreg"
        code = run("import-weights", "--sql", root / "model.sql", "--config",
                   root / "config.cfg", "--data-dir", train_dir, "--out-dir", out)
        assert code == 0
        regenerated = (out / "import_weights.sql").read_text()
        original = (train_dir / "import_weights.sql").read_text()
        assert regenerated == original


class TestCheckGrad:
    def test_passes_on_fixture(self, tmp_path, capsys):
        root = FIXTURES / "logreg"
        code = run("check-grad", "--sql", root / "model.sql", "--config",
                   root / "config.cfg", "--data-dir", root)
        assert code == 0
        out = capsys.readouterr().out
        assert "max finite-difference error" in out


class TestSalesEndToEnd:
    def test_multi_table_train(self, tmp_path):
        code = run("train", *fixture_args("sales", tmp_path))
        assert code == 0
        weights = read_csv(tmp_path / "weights.csv")
        assert [row[0] for row in weights[1:]] == [
            "familyFeat", "familyFeat", "cityFeat", "cityFeat"]
        trace = read_csv(tmp_path / "loss_trace.csv")
        assert float(trace[-1][1]) < 1e-3     # the fixture is exactly fittable
