import json

import numpy as np
import pytest

from lrcdf import CpdModel
from lrcdf.cli import main
from lrcdf.empirical import read_csv, write_csv

from helpers import moons, uniform_model


def write_dataset(path, header, rows):
    write_csv(path, header, rows)


@pytest.fixture(scope="module")
def moons_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("moons")
    rng = np.random.default_rng(0)
    pts = moons(rng, 1200)
    data_path = root / "moons.csv"
    schema_path = root / "moons.schema.json"
    write_dataset(data_path, ["x", "y"], pts)
    schema_path.write_text(json.dumps({"kinds": {"x": "continuous", "y": "continuous"}}))
    return str(data_path), str(schema_path), root


@pytest.fixture(scope="module")
def moons_model(moons_files):
    data, schema, root = moons_files
    out = str(root / "moons.model.json")
    report = str(root / "moons.report.json")
    code = main(
        [
            "train", "--data", data, "--schema", schema, "--out", out,
            "--report", report, "--rank-set", "4,8", "--level-set", "12",
            "--seed", "7",
        ]
    )
    assert code == 0
    return out, report


class TestTrain:
    def test_model_file_satisfies_invariants_on_load(self, moons_model):
        out, _ = moons_model
        model = CpdModel.load(out)  # constructor enforces every invariant
        assert model.ndim == 2
        assert model.meta.names == ("x", "y")
        assert model.meta.shift is not None

    def test_report_has_one_row_per_candidate(self, moons_model):
        _, report_path = moons_model
        report = json.loads(open(report_path).read())
        assert len(report["candidates"]) == 2
        pairs = {(c["rank"], c["levels"]) for c in report["candidates"]}
        assert pairs == {(4, 12), (8, 12)}
        assert report["best"] in report["candidates"]

    def test_unreadable_input_exits_2(self, tmp_path):
        code = main(
            ["train", "--data", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "m.json")]
        )
        assert code == 2

    def test_degenerate_column_exits_2(self, tmp_path):
        path = tmp_path / "flat.csv"
        write_dataset(path, ["a", "b"], [[1.0, 2.0]] * 30)
        code = main(
            ["train", "--data", str(path), "--out", str(tmp_path / "m.json"),
             "--rank-set", "2", "--level-set", "4"]
        )
        assert code == 2

    def test_copula_mode_trains_and_stores_transforms(self, moons_files, tmp_path):
        data, schema, _ = moons_files
        out = str(tmp_path / "cop.model.json")
        code = main(
            ["train", "--data", data, "--schema", schema, "--out", out,
             "--mode", "copula", "--rank-set", "4", "--level-set", "10", "--seed", "1"]
        )
        assert code == 0
        model = CpdModel.load(out)
        assert model.copula is not None
        assert model.meta.shift is None
        # transformed grids live inside the unit cube
        for cuts in model.grid.cutoffs:
            assert cuts[0] > 0.0 and cuts[-1] < 1.0

    def test_selects_true_rank_most_often(self, tmp_path):
        # two well-separated product components: the validation MSE should
        # prefer rank 2 over both the under- and the over-parameterized fits
        wins = {1: 0, 2: 0, 4: 0}
        for seed in range(10):
            rng = np.random.default_rng(100 + seed)
            m = 1500
            comp = rng.random(m) < 0.5
            pts = np.column_stack(
                [
                    np.where(comp, rng.normal(-2, 0.5, m), rng.normal(2, 0.5, m)),
                    np.where(comp, rng.normal(2, 0.5, m), rng.normal(-2, 0.5, m)),
                ]
            )
            data = tmp_path / f"mix{seed}.csv"
            write_dataset(data, ["a", "b"], pts)
            out = tmp_path / f"mix{seed}.model.json"
            report = tmp_path / f"mix{seed}.report.json"
            code = main(
                ["train", "--data", str(data), "--out", str(out), "--report", str(report),
                 "--rank-set", "1,2,4", "--level-set", "12", "--seed", str(seed)]
            )
            assert code == 0
            best = json.loads(open(report).read())["best"]
            wins[best["rank"]] += 1
        assert wins[2] > wins[1] and wins[2] > wins[4]


class TestEval:
    def test_uniform_model_scores_zero(self, tmp_path):
        model = uniform_model()
        model_path = tmp_path / "uniform.json"
        model.save(model_path)
        rng = np.random.default_rng(1)
        data = tmp_path / "u.csv"
        write_dataset(data, ["x0", "x1"], rng.random((200, 2)))
        out = tmp_path / "report.json"
        code = main(["eval", "--model", str(model_path), "--data", str(data), "--out", str(out)])
        assert code == 0
        report = json.loads(open(out).read())
        assert abs(report["mean_log_likelihood"]) < 1e-6
        assert len(report["marginals"]) == 2

    def test_dimension_mismatch_exits_2(self, moons_model, tmp_path):
        out, _ = moons_model
        data = tmp_path / "bad.csv"
        write_dataset(data, ["x", "y", "z"], [[0.1, 0.2, 0.3]])
        assert main(["eval", "--model", out, "--data", str(data)]) == 2


class TestSampleCommand:
    def test_count_honored_and_deterministic(self, moons_model, tmp_path):
        out, _ = moons_model
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["sample", "--model", out, "--count", "77", "--seed", "5", "--out", str(a)]) == 0
        assert main(["sample", "--model", out, "--count", "77", "--seed", "5", "--out", str(b)]) == 0
        data, names = read_csv(a)
        assert names == ["x", "y"]
        assert data.samples.shape == (77, 2)
        assert a.read_bytes() == b.read_bytes()


class TestImputeCommand:
    def test_complete_rows_pass_through(self, moons_model, tmp_path):
        out, _ = moons_model
        src = tmp_path / "inc.csv"
        src.write_text("x,y\n0.25,0.5\n,0.5\n0.25,\n")
        dst = tmp_path / "done.csv"
        assert main(["impute", "--model", out, "--data", str(src), "--out", str(dst)]) == 0
        data, names = read_csv(dst)
        assert names == ["x", "y", "x__imputed", "y__imputed"]
        assert data.samples[0, 0] == 0.25 and data.samples[0, 1] == 0.5
        np.testing.assert_array_equal(data.samples[:, 2], [0, 1, 0])
        np.testing.assert_array_equal(data.samples[:, 3], [0, 0, 1])
        assert not np.isnan(data.samples[:, :2]).any()


class TestClassifyCommand:
    def test_two_class_predictions(self, tmp_path):
        rng = np.random.default_rng(2)
        m = 1200
        label = (rng.random(m) < 0.5).astype(float)
        feature = np.where(label == 0, rng.normal(-2, 0.3, m), rng.normal(2, 0.3, m))
        train = tmp_path / "train.csv"
        schema = tmp_path / "schema.json"
        write_dataset(train, ["f", "c"], np.column_stack([feature, label]))
        schema.write_text(json.dumps({"kinds": {"c": "discrete"}}))
        model_path = tmp_path / "cls.model.json"
        assert main(
            ["train", "--data", str(train), "--schema", str(schema), "--out", str(model_path),
             "--rank-set", "2", "--level-set", "10", "--seed", "0"]
        ) == 0
        test = tmp_path / "test.csv"
        test.write_text("f,c\n-2.2,\n2.1,\n-1.8,\n")
        dst = tmp_path / "pred.csv"
        assert main(
            ["classify", "--model", str(model_path), "--data", str(test),
             "--label", "c", "--out", str(dst)]
        ) == 0
        got, names = read_csv(dst)
        assert names == ["f", "c", "c__predicted", "p_0", "p_1"]
        np.testing.assert_array_equal(got.samples[:, 2], [0.0, 1.0, 0.0])
        np.testing.assert_allclose(got.samples[:, 3] + got.samples[:, 4], 1.0, atol=1e-9)


class TestPlotdataCommand:
    def test_uniform_density_is_constant_one(self, tmp_path):
        model = uniform_model(knots=31)
        model_path = tmp_path / "uniform.json"
        model.save(model_path)
        dst = tmp_path / "plot.csv"
        assert main(
            ["plotdata", "--model", str(model_path), "--dims", "0,1",
             "--resolution", "6", "--out", str(dst)]
        ) == 0
        data, names = read_csv(dst)
        assert names == ["x0", "x1", "cdf", "density"]
        assert data.samples.shape == (36, 4)
        np.testing.assert_allclose(data.samples[:, 3], 1.0, atol=1e-9)
        np.testing.assert_allclose(
            data.samples[:, 2], data.samples[:, 0] * data.samples[:, 1], atol=1e-9
        )


class TestRoundTripDeterminism:
    def test_train_serialize_load_eval_bit_for_bit(self, moons_files, tmp_path):
        data, schema, _ = moons_files
        args = ["--rank-set", "4", "--level-set", "10", "--seed", "3"]
        out1, out2 = str(tmp_path / "m1.json"), str(tmp_path / "m2.json")
        assert main(["train", "--data", data, "--schema", schema, "--out", out1] + args) == 0
        assert main(["train", "--data", data, "--schema", schema, "--out", out2] + args) == 0
        assert open(out1, "rb").read() == open(out2, "rb").read()

        r1, r2 = str(tmp_path / "r1.json"), str(tmp_path / "r2.json")
        assert main(["eval", "--model", out1, "--data", data, "--schema", schema, "--out", r1]) == 0
        assert main(["eval", "--model", out2, "--data", data, "--schema", schema, "--out", r2]) == 0
        assert open(r1, "rb").read() == open(r2, "rb").read()
