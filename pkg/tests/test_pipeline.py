"""
Integration Tests for the Pipeline Runner and CLI

Runs every stage on a small synthetic dataset and checks the structured
results, the artifacts on disk, reproducibility and the error paths.
"""

import json
import os

import pandas as pd
import pytest

from main import cli
from src.config import load_config
from src.ingest import write_flow_csv
from src.pipeline import STAGES, PipelineRunner
from src.synth import default_profiles, generate_dataset

SMALL = dict(
    synth_classes=3,
    flows_per_class=300,
    beta=32,
    stride=32,
    gamma=8,
    epsilon=8,
    epochs=2,
    batch_size=8,
    scale_s=8.0,
    margin_m=0.2,
    learning_rate=0.01,
    knn_k=5,
    forest_trees=5,
    holdout="class_02",
    seed=3,
)

CHAIN = (
    "synth",
    "build-graph",
    "embed-nodes",
    "make-examples",
    "train",
    "embed",
    "classify",
    "zdt",
    "cata",
    "eval",
    "project",
)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in list(os.environ):
        if name.startswith("FLOWEMBED_"):
            monkeypatch.delenv(name)


def run_chain(out_dir, **overrides):
    runner = PipelineRunner(load_config(out_dir=out_dir, **{**SMALL, **overrides}))
    results = {stage: runner.run(stage) for stage in CHAIN}
    return runner, results


class TestFullChain:
    """Tests for one complete run."""

    @pytest.fixture(scope="class")
    def run(self, tmp_path_factory):
        out_dir = tmp_path_factory.mktemp("run")
        runner, results = run_chain(out_dir)
        return out_dir, runner, results

    def test_every_stage_ok(self, run):
        """Test that each stage reports status ok."""
        _, _, results = run

        for stage, result in results.items():
            assert result["status"] == "ok", (stage, result)
            assert result["stage"] == stage

    def test_stage_counts(self, run):
        """Test the flow, example and embedding counts of the small run."""
        _, _, results = run

        assert results["synth"]["data"]["flows"] == 900
        assert results["make-examples"]["data"]["per_class"] == {
            "class_00": 9,
            "class_01": 9,
            "class_02": 9,
        }
        train = results["train"]["data"]
        assert train["holdout_class"] == "class_02"
        assert train["classes"] == ["class_00", "class_01"]
        assert train["n_holdout"] == 9
        assert train["n_train"] + train["n_test"] == 18
        assert results["embed"]["data"] == {
            "examples": 27,
            "dim": 64,
            "path": str(run[0] / "embeddings.csv"),
        }

    def test_artifacts_written(self, run):
        """Test that the run directory holds every stage output and the manifest."""
        out_dir, _, _ = run

        for name in (
            "flows.csv",
            "graph.csv",
            "nodes.csv",
            "examples.stpx",
            "split.json",
            "model.stpcn",
            "embeddings.csv",
            "classify.json",
            "zdt.csv",
            "pr_curve.csv",
            "cata.csv",
            "metrics.json",
            "projection.csv",
            "report.txt",
            "manifest.json",
            "config.resolved.json",
        ):
            assert (out_dir / name).is_file(), name

    def test_zdt_result(self, run):
        """Test that zdt reports detection metrics and writes one row per query."""
        out_dir, _, results = run
        data = results["zdt"]["data"]

        assert data["holdout_class"] == "class_02"
        for key in ("precision", "recall", "pr_auc"):
            assert 0.0 <= data[key] <= 1.0
        assert data["n_positive"] == 9

        rows = pd.read_csv(out_dir / "zdt.csv")
        assert list(rows.columns) == ["example_id", "true_is_holdout", "zdt_probability"]
        assert set(rows["true_is_holdout"]) == {0, 1}
        assert rows["true_is_holdout"].sum() == 9
        assert rows["zdt_probability"].between(0.0, 1.0).all()

    def test_cata_result(self, run):
        """Test that attribution frequencies cover all holdout examples."""
        _, _, results = run
        data = results["cata"]["data"]

        assert data["holdout_class"] == "class_02"
        assert data["n_examples"] == 9
        assert sum(entry["count"] for entry in data["entries"]) == 9
        assert {entry["attributed_class"] for entry in data["entries"]} <= {"class_00", "class_01"}
        assert [entry["rank"] for entry in data["entries"]] == list(
            range(1, len(data["entries"]) + 1)
        )

    def test_eval_metrics(self, run):
        """Test that metrics.json carries bounded clustering scores and detection."""
        out_dir, _, results = run
        metrics = json.loads((out_dir / "metrics.json").read_text())

        assert metrics == results["eval"]["data"]
        assert -1.0 <= metrics["silhouette"] <= 1.0
        assert 0.0 <= metrics["homogeneity"] <= 1.0
        assert metrics["n_classes"] == 2
        assert metrics["detection"]["n_positive"] == 9

    def test_holdout_flows_outside_graph(self, run):
        """Test that no address used only by the holdout class gets a stored node vector."""
        out_dir, _, results = run
        graph = results["build-graph"]["data"]
        ips = set(pd.read_csv(out_dir / "nodes.csv")["ip"])

        assert graph["holdout_class"] == "class_02"
        assert graph["excluded_flows"] == 300
        assert not any(ip.startswith(("10.2.0.", "198.51.2.", "203.0.2.")) for ip in ips)
        assert any(ip.startswith("10.0.0.") for ip in ips)

    def test_eval_classification(self, run):
        """Test that metrics.json carries the forest's per-class and macro report."""
        out_dir, _, _ = run
        classification = json.loads((out_dir / "metrics.json").read_text())["classification"]

        assert set(classification["per_class"]) == {"class_00", "class_01"}
        for summary in ("macro", "minimum"):
            for metric in ("precision", "recall", "auc"):
                assert 0.0 <= classification[summary][metric] <= 1.0
        assert classification["macro"]["support"] == len(
            json.loads((out_dir / "split.json").read_text())["test"]
        )

    def test_projection(self, run):
        """Test that the projection has one 3-D point per example."""
        out_dir, _, results = run
        rows = pd.read_csv(out_dir / "projection.csv")

        assert results["project"]["data"]["points"] == 27
        assert list(rows.columns) == ["example_id", "label", "x", "y", "z"]

    def test_manifest_hashes(self, run):
        """Test that the manifest records the model hash the header carries."""
        out_dir, runner, _ = run
        manifest = json.loads((out_dir / "manifest.json").read_text())

        assert manifest["model"]["hash"] == runner.stage_hash("model")
        assert manifest["graph"]["hash"] == runner.stage_hash("graph")


class TestReproducibility:
    """Tests for identical reruns."""

    def test_same_config_same_outputs(self, tmp_path):
        """Test that two runs with one config write identical embeddings and metrics."""
        run_chain(tmp_path / "a")
        run_chain(tmp_path / "b")

        for name in ("flows.csv", "embeddings.csv", "metrics.json", "zdt.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestStageErrors:
    """Tests for structured error results."""

    @pytest.fixture
    def trained(self, tmp_path):
        config = load_config(out_dir=tmp_path, **SMALL)
        runner = PipelineRunner(config)
        for stage in CHAIN[:5]:
            assert runner.run(stage)["status"] == "ok"
        return tmp_path

    def test_unknown_stage(self, tmp_path):
        """Test that an unknown stage name is an UNKNOWN_STAGE error."""
        result = PipelineRunner(load_config(out_dir=tmp_path)).run("fly")

        assert result["status"] == "error"
        assert result["error_code"] == "UNKNOWN_STAGE"
        assert "synth" in result["message"]

    def test_missing_input(self, tmp_path):
        """Test that a stage without its upstream artifact reports MISSING_INPUT."""
        result = PipelineRunner(load_config(out_dir=tmp_path)).run("build-graph")

        assert result["status"] == "error"
        assert result["error_code"] == "MISSING_INPUT"
        assert result["details"]["artifact"] == "flows"

    def test_ingest_without_path(self, tmp_path):
        """Test that ingest needs an input file."""
        result = PipelineRunner(load_config(out_dir=tmp_path)).run("ingest")

        assert result["error_code"] == "CONFIG_ERROR"

    def test_changed_config_rejected(self, trained):
        """Test that embedding with a model from another config is an artifact mismatch."""
        runner = PipelineRunner(load_config(out_dir=trained, **{**SMALL, "epochs": 3}))

        result = runner.run("embed")

        assert result["status"] == "error"
        assert result["error_code"] == "ARTIFACT_MISMATCH"
        assert result["details"]["artifact"] == "model"

    def test_force_accepts_mismatch(self, trained):
        """Test that force turns the mismatch into a warning."""
        runner = PipelineRunner(load_config(out_dir=trained, **{**SMALL, "epochs": 3}), force=True)

        assert runner.run("embed")["status"] == "ok"

    def test_zdt_without_holdout(self, tmp_path):
        """Test that zero-day detection without a holdout class is a precondition error."""
        settings = {key: value for key, value in SMALL.items() if key != "holdout"}
        runner = PipelineRunner(load_config(out_dir=tmp_path, **settings))
        for stage in CHAIN[:6]:
            assert runner.run(stage)["status"] == "ok"

        result = runner.run("zdt")

        assert result["error_code"] == "PRECONDITION_FAILED"

    def test_unknown_holdout(self, tmp_path):
        """Test that a holdout label absent from the data fails training."""
        runner = PipelineRunner(load_config(out_dir=tmp_path, **{**SMALL, "holdout": "nope"}))
        for stage in CHAIN[:4]:
            runner.run(stage)

        result = runner.run("train")

        assert result["error_code"] == "UNKNOWN_LABEL"


class TestExtendedStages:
    """Tests for ingest, inference on new flows and the repeated protocols."""

    @pytest.fixture
    def trained(self, tmp_path):
        runner = PipelineRunner(load_config(out_dir=tmp_path / "run", **SMALL))
        for stage in CHAIN[:6]:
            assert runner.run(stage)["status"] == "ok"
        return runner

    def test_ingest_sorts_and_records(self, tmp_path):
        """Test that ingest copies a sorted flow file into the run directory."""
        dataset = generate_dataset(default_profiles(2), 100, seed=1)
        source = write_flow_csv(list(reversed(dataset.records)), tmp_path / "in.csv")
        runner = PipelineRunner(load_config(out_dir=tmp_path / "run"))

        result = runner.run("ingest", input_path=str(source))

        assert result["status"] == "ok"
        assert result["data"]["flows"] == 200
        written = pd.read_csv(tmp_path / "run" / "flows.csv")
        assert list(written["timestamp_us"]) == sorted(written["timestamp_us"])

    def test_embed_new_flows(self, tmp_path, trained):
        """Test that a new flow file is embedded against the stored node table."""
        dataset = generate_dataset(default_profiles(3), 64, seed=99)
        flows = write_flow_csv(dataset.records, tmp_path / "new.csv")

        result = trained.run("embed", flows=str(flows))

        assert result["status"] == "ok"
        assert result["data"]["examples"] == 3 * 2
        assert result["data"]["policy"] == "zero"
        assert (tmp_path / "run" / "inference_embeddings.csv").is_file()

    def test_repeated_holdout_classify(self, trained):
        """Test that the repeated-holdout protocol aggregates every repeat."""
        result = trained.run("classify", with_holdout=True, repeats=2)

        assert result["status"] == "ok"
        assert result["data"]["repeats"] == 2
        for summary in ("macro", "minimum"):
            for metric in ("precision", "recall", "auc"):
                assert 0.0 <= result["data"]["aggregate"][summary][metric] <= 1.0

    def test_zdt_sweep(self, trained, tmp_path):
        """Test that the holdout sweep writes one row per class plus the average."""
        result = trained.run("zdt", repeats=2)

        assert result["status"] == "ok"
        assert len(result["data"]["holdouts"]) == 2
        rows = pd.read_csv(tmp_path / "run" / "zdt_sweep.csv")
        assert list(rows["holdout_class"])[-1] == "average"
        assert len(rows) == 3


class TestHoldoutResolution:
    """Tests for stages that take the holdout class from the run directory."""

    def test_later_stages_inherit_holdout(self, tmp_path):
        """Test that stages after build-graph run without the holdout setting."""
        runner = PipelineRunner(load_config(out_dir=tmp_path, **SMALL))
        for stage in CHAIN[:2]:
            assert runner.run(stage)["status"] == "ok"
        settings = {key: value for key, value in SMALL.items() if key != "holdout"}
        later = PipelineRunner(load_config(out_dir=tmp_path, **settings))

        results = {stage: later.run(stage) for stage in CHAIN[2:]}

        for stage, result in results.items():
            assert result["status"] == "ok", (stage, result)
        assert results["train"]["data"]["holdout_class"] == "class_02"
        assert results["zdt"]["data"]["holdout_class"] == "class_02"
        assert later.config.holdout == "class_02"

    def test_other_holdout_rejected(self, tmp_path):
        """Test that naming a different holdout than the graph's is an artifact mismatch."""
        runner = PipelineRunner(load_config(out_dir=tmp_path, **SMALL))
        for stage in CHAIN[:4]:
            assert runner.run(stage)["status"] == "ok"
        other = PipelineRunner(load_config(out_dir=tmp_path, **{**SMALL, "holdout": "class_01"}))

        result = other.run("train")

        assert result["error_code"] == "ARTIFACT_MISMATCH"

    def test_cli_chain_names_holdout_once(self, tmp_path, capsys):
        """Test that the documented CLI chain passes --holdout only to build-graph."""
        settings = {key: value for key, value in SMALL.items() if key != "holdout"}
        config = tmp_path / "pipeline.json"
        config.write_text(json.dumps({**settings, "out_dir": str(tmp_path / "run")}))

        codes = {}
        for stage in CHAIN:
            extra = ["--holdout", "class_02"] if stage == "build-graph" else []
            codes[stage] = cli([stage, "--config", str(config), *extra])
        outputs = capsys.readouterr().out

        assert codes == {stage: 0 for stage in CHAIN}, outputs
        split = json.loads((tmp_path / "run" / "split.json").read_text())
        assert split["holdout_class"] == "class_02"

    def test_fresh_policy_embeds_holdout_ips(self, tmp_path):
        """Test that the fresh policy gives holdout addresses vectors from their own flows."""
        runner, results = run_chain(tmp_path, unknown_ip_policy="fresh")

        for stage, result in results.items():
            assert result["status"] == "ok", (stage, result)
        assert results["make-examples"]["data"]["fresh_ips"] > 0
        ips = set(pd.read_csv(tmp_path / "nodes.csv")["ip"])
        assert not any(ip.startswith("10.2.0.") for ip in ips)


class TestCli:
    """Tests for the command-line front end."""

    @pytest.fixture
    def config_file(self, tmp_path):
        path = tmp_path / "pipeline.json"
        path.write_text(json.dumps({**SMALL, "out_dir": str(tmp_path / "run")}))
        return path

    def test_stage_success(self, config_file, capsys):
        """Test that a successful stage prints an ok result and exits 0."""
        code = cli(["synth", "--config", str(config_file)])

        assert code == 0
        result = json.loads(capsys.readouterr().out)
        assert result["status"] == "ok"
        assert result["data"]["flows"] == 900

    def test_flags_override_file(self, config_file, tmp_path, capsys):
        """Test that --out and --seed beat the config file."""
        code = cli(["synth", "--config", str(config_file), "--out", str(tmp_path / "other")])

        assert code == 0
        assert (tmp_path / "other" / "flows.csv").is_file()
        resolved = json.loads((tmp_path / "other" / "config.resolved.json").read_text())
        assert resolved["beta"] == 32

    def test_stage_error(self, tmp_path, capsys):
        """Test that a pipeline error prints the error result and exits 1."""
        code = cli(["build-graph", "--out", str(tmp_path / "empty")])

        assert code == 1
        result = json.loads(capsys.readouterr().out)
        assert result["error_code"] == "MISSING_INPUT"

    def test_bad_config_file(self, tmp_path, capsys):
        """Test that an invalid config file exits 1 with a config error."""
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"alpha": 0.5}))

        assert cli(["synth", "--config", str(path)]) == 1
        assert json.loads(capsys.readouterr().out)["error_code"] == "CONFIG_ERROR"

    def test_invalid_arguments(self):
        """Test that an unknown subcommand exits 2."""
        with pytest.raises(SystemExit) as exc_info:
            cli(["teleport"])

        assert exc_info.value.code == 2

    def test_every_stage_has_a_subcommand(self):
        """Test that the parser knows every stage."""
        for stage in STAGES:
            with pytest.raises(SystemExit) as exc_info:
                cli([stage, "--help"])
            assert exc_info.value.code == 0
