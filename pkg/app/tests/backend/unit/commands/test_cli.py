# tests/test_cli.py
import json

import jsonschema
import numpy as np
import pandas as pd
import pytest

from app.backend.main import main
from app.backend.models.dataset import Dataset
from app.backend.services.palmrt_service import sharpness_instance
from app.backend.utils.io import write_dataset


class TestCli:
    """Test cases for the permtest command line"""

    @pytest.fixture
    def run(self, capsys):
        """Run the CLI and return (exit code, parsed stdout JSON or None)"""

        def _run(*argv: str):
            code = main(list(argv))
            out = capsys.readouterr().out
            try:
                return code, json.loads(out)
            except json.JSONDecodeError:
                return code, None

        return _run

    @pytest.fixture
    def sharpness_csv(self, tmp_path):
        """Five rows from the n=5 tie construction, response = noise"""
        x, z, _ = sharpness_instance()
        path = tmp_path / "sharp.csv"
        write_dataset(Dataset(x=x, z=z, y=np.array([0.3, -1.1, 0.7, -0.4, 1.9])), path)
        return path

    @pytest.fixture
    def design_csv(self, tmp_path):
        """n=80 Gaussian design with z1..z5, x and a null response y"""
        rng = np.random.default_rng(21)
        path = tmp_path / "design.csv"
        write_dataset(
            Dataset(x=rng.standard_normal(80), z=rng.standard_normal((80, 5)), y=rng.standard_normal(80)),
            path,
        )
        return path


class TestTestCommand(TestCli):
    """Test cases for `permtest test`"""

    def test_sharpness_smoke(self, run, sharpness_csv):
        """PALMRT at alpha 0.5 reports phi_tie"""
        code, body = run(
            "test", str(sharpness_csv), "--target-col", "x", "--response-col", "y",
            "--method", "palmrt", "--group-spec", "cyclic", "--alpha", "0.5",
        )

        assert code == 0
        assert body["phi_tie"] == pytest.approx(0.6)
        assert body["phi"] == 1.0
        assert body["reject"] is False

    def test_missing_column(self, run, sharpness_csv):
        code, body = run("test", str(sharpness_csv), "--target-col", "x", "--response-col", "nope")

        assert code == 3
        assert body["code"] == "bad-column"
        assert body["detail"]["column"] == "nope"

    def test_closure_violation(self, run, sharpness_csv, tmp_path):
        """A rotation without its powers names the failing pair"""
        # Arrange
        group = tmp_path / "group.json"
        group.write_text(json.dumps({"n": 5, "perms": [[1, 2, 3, 4, 5], [2, 3, 4, 5, 1]]}))

        # Act
        code, body = run(
            "test", str(sharpness_csv), "--target-col", "x", "--response-col", "y", "--group-spec", str(group),
        )

        # Assert
        assert code == 3
        assert body["code"] == "closure-violation"
        assert body["detail"]["pair"] == [2, 2]

    def test_group_file_wrong_size(self, run, sharpness_csv, tmp_path):
        """A valid group on 6 points against 5 data rows is a group error: exit 3"""
        group = tmp_path / "six.json"
        group.write_text(json.dumps({"n": 6, "blocks": [[1, 2, 3], [4, 5, 6]]}))

        code, body = run(
            "test", str(sharpness_csv), "--target-col", "x", "--response-col", "y", "--group-spec", str(group),
        )

        assert code == 3
        assert body["code"] == "invalid-group-file"
        assert body["detail"] == {"group_n": 6, "n": 5}

    def test_malformed_csv(self, run, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y,z1\n1,2,3\n4,,6\n")

        code, body = run("test", str(path), "--target-col", "x", "--response-col", "y")

        assert code == 3
        assert body["code"] == "bad-csv"

    def test_cpt_without_solution(self, run, tmp_path):
        """n=9, p=3, K=3 has no CPT direction: exit 2"""
        rng = np.random.default_rng(4)
        path = tmp_path / "small.csv"
        write_dataset(Dataset(x=rng.standard_normal(9), z=rng.standard_normal((9, 3)), y=rng.standard_normal(9)), path)

        code, body = run(
            "test", str(path), "--target-col", "x", "--response-col", "y",
            "--method", "cpt", "--k-plus-1", "4", "--alpha", "0.3",
        )

        assert code == 2
        assert body["code"] == "no-solution"

    def test_weighted_needs_w0(self, run, design_csv):
        code, body = run(
            "test", str(design_csv), "--target-col", "x", "--response-col", "y", "--method", "weighted-cpt",
        )

        assert code == 1
        assert body["code"] == "invalid-input"

    @pytest.mark.parametrize(
        "extra",
        [
            ("--method", "palmrt-two-sided", "--k-plus-1", "10", "--alpha", "0.2"),
            ("--method", "cpt", "--k-plus-1", "4", "--alpha", "0.3"),
            ("--method", "cpt", "--k-plus-1", "4", "--alpha", "0.3", "--eta", "power"),
            ("--method", "weighted-cpt", "--k-plus-1", "4", "--alpha", "0.3", "--w0", "0.4"),
            ("--method", "weighted-palmrt", "--k-plus-1", "10", "--alpha", "0.2", "--w0", "0.2"),
            ("--group-spec", "random-iid", "--m-samples", "400", "--alpha", "0.1"),
        ],
    )
    def test_methods(self, run, design_csv, extra):
        code, body = run("test", str(design_csv), "--target-col", "x", "--response-col", "y", *extra)

        assert code == 0
        assert isinstance(body["reject"], bool)

    def test_same_seed_same_output(self, run, design_csv):
        argv = ("test", str(design_csv), "--target-col", "x", "--response-col", "y",
                "--group-spec", "random-iid", "--m-samples", "300", "--seed", "8")

        assert run(*argv) == run(*argv)


class TestUsage(TestCli):
    """Test cases for usage errors"""

    def test_missing_subcommand(self, run):
        code, body = run()

        assert code == 1
        assert body["code"] == "usage"

    def test_missing_required_flag(self, run, design_csv):
        code, body = run("test", str(design_csv), "--target-col", "x")

        assert code == 1
        assert "--response-col" in body["message"]

    def test_invalid_spec_value(self, run, tmp_path):
        """SimulationSpec validation surfaces as invalid-input"""
        code, body = run("simulate-type1", "--n", "10", "--p", "20", "--reps", "2", "--out", str(tmp_path / "o.csv"))

        assert code == 1
        assert body["code"] == "invalid-input"


class TestSimulateCommands(TestCli):
    """Test cases for `simulate-type1` and `simulate-type2`"""

    def test_type1_csv(self, run, tmp_path):
        out = tmp_path / "t1.csv"

        code, _ = run(
            "simulate-type1", "--n", "30", "--p", "3", "--reps", "6", "--k-plus-1", "4", "--seed", "5", "--out", str(out),
        )

        frame = pd.read_csv(out)
        assert code == 0
        assert len(frame) == 3
        assert (frame["reject_rate"] <= 1.0).all()

    def test_byte_identical_across_threads(self, run, tmp_path):
        """Same seed with one and two workers writes the same bytes"""
        # Arrange
        common = ("simulate-type2", "--n", "30", "--p", "3", "--reps", "8", "--k-plus-1", "4",
                  "--b-grid", "0,1.5", "--seed", "5", "--chunk-size", "3")
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"

        # Act
        run(*common, "--threads", "1", "--out", str(first))
        run(*common, "--threads", "2", "--out", str(second))

        # Assert
        assert first.read_bytes() == second.read_bytes()

    def test_bad_grid(self, run):
        code, body = run("simulate-type2", "--b-grid", "0,abc")

        assert code == 1
        assert body["code"] == "usage"


class TestGroupCommands(TestCli):
    """Test cases for `optimize-group`, `make-group` and `leverage-density`"""

    def test_optimize_then_test(self, run, design_csv, tmp_path):
        """The emitted group file is accepted by --group-spec"""
        # Arrange
        group = tmp_path / "opt.json"

        # Act
        code, plan = run(
            "optimize-group", "--data", str(design_csv), "--target-col", "x", "--drop-col", "y",
            "--out", str(group), "--compare", "--alpha", "0.2", "--m-samples", "25", "--seed", "3",
        )
        test_code, result = run(
            "test", str(design_csv), "--target-col", "x", "--response-col", "y",
            "--group-spec", str(group), "--m-samples", "200",
        )

        # Assert
        assert code == 0
        assert (tmp_path / "opt.plan.json").exists()
        assert plan["n"] == 80
        assert all(term <= 1e-9 for term in plan["report"]["gap_terms"])
        assert test_code == 0
        assert result["sampled"] is True
        assert result["group_source"] == str(group)

    def test_x_in_span(self, run, tmp_path):
        rng = np.random.default_rng(2)
        z = rng.standard_normal((30, 2))
        frame = pd.DataFrame({"z1": z[:, 0], "z2": z[:, 1], "x": z[:, 0] - 2 * z[:, 1]})
        path = tmp_path / "span.csv"
        frame.to_csv(path, index=False, float_format="%.17g")

        code, body = run("optimize-group", "--data", str(path), "--target-col", "x", "--out", str(tmp_path / "g.json"))

        assert code == 2
        assert body["code"] == "x-in-span-z"

    def test_simulated_design(self, run, tmp_path):
        out = tmp_path / "sim.json"

        code, plan = run(
            "optimize-group", "--simulate-design", "t2", "--n", "100", "--p", "20", "--mode", "random",
            "--out", str(out), "--seed", "1",
        )

        assert code == 0
        assert plan["plan"]["mode"] == "random"
        assert json.loads(out.read_text())["n"] == 100

    def test_design_source_required(self, run, tmp_path):
        code, body = run("optimize-group", "--out", str(tmp_path / "g.json"))

        assert code == 1
        assert body["code"] == "invalid-input"

    @pytest.mark.parametrize(
        "extra, key, size",
        [
            (("--kind", "cyclic", "--n", "6"), "perms", 6),
            (("--kind", "leftshift", "--n", "12", "--k-plus-1", "3"), "perms", 3),
            (("--kind", "blocks", "--n", "5", "--blocks", "1,2;3,4"), "blocks", 3),
            (("--kind", "blocks", "--n", "4", "--blocks", "1,2;3,4", "--enumerate"), "perms", 4),
        ],
    )
    def test_make_group(self, run, tmp_path, extra, key, size):
        out = tmp_path / "g.json"

        code, _ = run("make-group", *extra, "--out", str(out))

        assert code == 0
        assert len(json.loads(out.read_text())[key]) == size

    def test_leverage_density(self, run, design_csv):
        code, body = run("leverage-density", "--data", str(design_csv), "--drop-col", "x", "--drop-col", "y", "--bins", "10")

        assert code == 0
        assert sum(body["counts"]) == 80
        assert len(body["edges"]) == 11


class TestOutputSchemas(TestCli):
    """Every JSON document and CSV row the CLI emits validates against `permtest schema`"""

    @pytest.fixture
    def schemas(self, run):
        code, body = run("schema")
        assert code == 0
        return body

    def test_schema_names(self, schemas):
        assert set(schemas) == {
            "palmrt-result", "cpt-result", "plan", "group-file",
            "simulation-report", "simulation-cell", "leverage-histogram", "error",
        }
        assert all(schema["type"] == "object" for schema in schemas.values())

    def test_schema_files(self, run, schemas, tmp_path):
        """--out-dir writes one file per schema with the printed content"""
        code, _ = run("schema", "plan", "error", "--out-dir", str(tmp_path / "schemas"))

        assert code == 0
        assert json.loads((tmp_path / "schemas" / "plan.schema.json").read_text()) == schemas["plan"]
        assert json.loads((tmp_path / "schemas" / "error.schema.json").read_text()) == schemas["error"]
        assert len(list((tmp_path / "schemas").iterdir())) == 2

    def test_unknown_schema(self, run, schemas):
        code, body = run("schema", "nope")

        assert code == 1
        jsonschema.validate(instance=body, schema=schemas["error"])

    @pytest.mark.parametrize(
        "extra, name",
        [
            (("--method", "palmrt", "--k-plus-1", "10", "--alpha", "0.2"), "palmrt-result"),
            (("--method", "palmrt-two-sided", "--group-spec", "random-iid", "--m-samples", "100"), "palmrt-result"),
            (("--method", "weighted-palmrt", "--k-plus-1", "10", "--alpha", "0.2", "--w0", "0.2"), "palmrt-result"),
            (("--method", "cpt", "--k-plus-1", "4", "--alpha", "0.3"), "cpt-result"),
            (("--method", "weighted-cpt", "--k-plus-1", "4", "--alpha", "0.3", "--w0", "0.4"), "cpt-result"),
        ],
    )
    def test_test_output(self, run, schemas, design_csv, extra, name):
        code, body = run("test", str(design_csv), "--target-col", "x", "--response-col", "y", *extra)

        assert code == 0
        jsonschema.validate(instance=body, schema=schemas[name])

    @pytest.mark.parametrize(
        "argv",
        [
            ("test", "{csv}", "--target-col", "x", "--response-col", "nope"),
            ("test", "{csv}", "--target-col", "x", "--response-col", "y", "--method", "weighted-cpt"),
            ("optimize-group", "--out", "{tmp}/g.json"),
            ("simulate-type2", "--b-grid", "0,abc"),
        ],
    )
    def test_error_output(self, run, schemas, design_csv, tmp_path, argv):
        argv = [a.format(csv=design_csv, tmp=tmp_path) for a in argv]

        code, body = run(*argv)

        assert code != 0
        jsonschema.validate(instance=body, schema=schemas["error"])

    def test_optimize_group_outputs(self, run, schemas, design_csv, tmp_path):
        """stdout, the plan file and the group file all validate"""
        # Arrange
        group = tmp_path / "opt.json"

        # Act
        code, plan = run(
            "optimize-group", "--data", str(design_csv), "--target-col", "x", "--drop-col", "y",
            "--out", str(group), "--compare", "--alpha", "0.2", "--m-samples", "25", "--seed", "3",
        )

        # Assert
        assert code == 0
        jsonschema.validate(instance=plan, schema=schemas["plan"])
        jsonschema.validate(instance=json.loads((tmp_path / "opt.plan.json").read_text()), schema=schemas["plan"])
        jsonschema.validate(instance=json.loads(group.read_text()), schema=schemas["group-file"])

    @pytest.mark.parametrize(
        "extra",
        [
            ("--kind", "cyclic", "--n", "6"),
            ("--kind", "blocks", "--n", "5", "--blocks", "1,2;3,4"),
        ],
    )
    def test_make_group_output(self, run, schemas, tmp_path, extra):
        out = tmp_path / "g.json"

        code, _ = run("make-group", *extra, "--out", str(out))

        assert code == 0
        jsonschema.validate(instance=json.loads(out.read_text()), schema=schemas["group-file"])

    def test_leverage_density_output(self, run, schemas, design_csv):
        code, body = run("leverage-density", "--data", str(design_csv), "--drop-col", "x", "--drop-col", "y")

        assert code == 0
        jsonschema.validate(instance=body, schema=schemas["leverage-histogram"])

    def test_simulation_rows(self, run, schemas, tmp_path):
        """Each CSV row is a valid simulation cell"""
        out = tmp_path / "t2.csv"

        code, _ = run(
            "simulate-type2", "--n", "30", "--p", "3", "--reps", "4", "--k-plus-1", "4",
            "--b-grid", "0,1", "--seed", "5", "--out", str(out),
        )

        rows = json.loads(pd.read_csv(out).to_json(orient="records"))
        assert code == 0
        assert len(rows) == 6
        for row in rows:
            jsonschema.validate(instance=row, schema=schemas["simulation-cell"])
