import json
import os

import pytest
from click.testing import CliRunner

from notebridge.cli import main
from notebridge.data import write_dataset
from notebridge.simulate import SimConfig, simulate

SMALL_SIM = {
    "n_tweets": 12,
    "n_raters": 60,
    "rater_pool_size": 10,
    "background_tweets": 10,
}


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    base = tmp_path_factory.mktemp("corpus")
    dataset, _ = simulate(SimConfig(seed=11, **SMALL_SIM))
    paths = write_dataset(dataset, base)
    return {k: str(v) for k, v in paths.items()}


def data_args(corpus):
    return ["--notes", corpus["notes"], "--ratings", corpus["ratings"],
            "--raters", corpus["raters"]]


def read_json(out_dir, name):
    with open(os.path.join(out_dir, name), encoding="utf-8") as fh:
        return json.load(fh)


class TestSimulateCommand:
    def test_writes_corpus_and_truth(self, runner, tmp_path):
        out = str(tmp_path / "sim")
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"sim": SMALL_SIM}))
        res = runner.invoke(main, ["simulate", "--config", str(cfg),
                                   "--seed", "2", "--out-dir", out])
        assert res.exit_code == 0, res.output
        manifest = read_json(out, "manifest.json")
        assert manifest["config"]["sim"]["seed"] == 2
        assert manifest["config"]["sim"]["n_tweets"] == 12
        for name in manifest["outputs"]:
            path = os.path.join(out, name)
            assert os.path.getsize(path) > 0
        assert "truth.json" in manifest["outputs"]
        assert manifest["counts"]["ratings"] > 0
        assert not os.path.exists(os.path.join(out, ".lock"))


class TestIngest:
    def test_round_trip(self, runner, corpus, tmp_path):
        out = str(tmp_path / "ingest")
        res = runner.invoke(main, ["ingest", *data_args(corpus), "--out-dir", out])
        assert res.exit_code == 0, res.output
        manifest = read_json(out, "manifest.json")
        assert manifest["filtered_counts"]["ratings"] <= manifest["counts"]["ratings"]
        assert os.path.exists(os.path.join(out, "notes.tsv"))

    def test_missing_input_names_path(self, runner, corpus, tmp_path):
        bad = str(tmp_path / "nope.tsv")
        res = runner.invoke(main, [
            "ingest", "--notes", bad, "--ratings", corpus["ratings"],
            "--raters", corpus["raters"], "--out-dir", str(tmp_path / "o"),
        ])
        assert res.exit_code != 0
        assert "nope.tsv" in res.output


class TestScore:
    def test_flag_overrides_config_file(self, runner, corpus, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"scoring": {"lambda_intercept": 0.2}}))
        out = str(tmp_path / "score")
        res = runner.invoke(main, [
            "score", *data_args(corpus), "--config", str(cfg),
            "--lambda-intercept", "0.3", "--out-dir", out,
        ])
        assert res.exit_code == 0, res.output
        manifest = read_json(out, "manifest.json")
        assert manifest["config"]["scoring"]["lambda_intercept"] == 0.3
        scores = read_json(out, "scores.json")
        assert scores["schema_version"] == 1
        assert scores["notes"]

    def test_config_file_used_without_flag(self, runner, corpus, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"scoring": {"lambda_intercept": 0.2}}))
        out = str(tmp_path / "score2")
        res = runner.invoke(main, ["score", *data_args(corpus),
                                   "--config", str(cfg), "--out-dir", out])
        assert res.exit_code == 0, res.output
        manifest = read_json(out, "manifest.json")
        assert manifest["config"]["scoring"]["lambda_intercept"] == 0.2

    def test_lock_blocks_concurrent_run(self, runner, corpus, tmp_path):
        out = tmp_path / "locked"
        out.mkdir()
        (out / ".lock").touch()
        res = runner.invoke(main, ["score", *data_args(corpus),
                                   "--out-dir", str(out)])
        assert res.exit_code != 0
        assert "locked" in res.output
        # lock left in place for the (simulated) holder
        assert (out / ".lock").exists()


class TestAnalysisCommands:
    def test_equal_exposure(self, runner, corpus, tmp_path):
        out = str(tmp_path / "ee")
        res = runner.invoke(main, ["equal-exposure", *data_args(corpus),
                                   "--out-dir", out])
        assert res.exit_code == 0, res.output
        rep = read_json(out, "representativeness.json")
        assert "factor" in rep["variables"]
        assert os.path.exists(os.path.join(out, "equal_exposure_scores.tsv"))

    def test_eq2_full_sample(self, runner, corpus, tmp_path):
        out = str(tmp_path / "eq2")
        res = runner.invoke(main, ["eq2", *data_args(corpus),
                                   "--full-sample", "--out-dir", out])
        assert res.exit_code == 0, res.output
        manifest = read_json(out, "manifest.json")
        assert manifest["config"]["equal_exposure"] is False
        fits = read_json(out, "eq2_outcomes.json")
        assert "helpfulness_score" in fits

    def test_pairwise_and_descriptives(self, runner, corpus, tmp_path):
        out1 = str(tmp_path / "pw")
        out2 = str(tmp_path / "desc")
        res1 = runner.invoke(main, ["pairwise", *data_args(corpus),
                                    "--out-dir", out1])
        res2 = runner.invoke(main, ["descriptives", *data_args(corpus),
                                    "--out-dir", out2])
        assert res1.exit_code == 0, res1.output
        assert res2.exit_code == 0, res2.output
        pw = read_json(out1, "pairwise.json")
        assert "beta" in pw or "error" in pw
        assert os.path.exists(os.path.join(out2, "bucket_table.tsv"))

    def test_confound(self, runner, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"sim": {
            "n_tweets": 25, "n_raters": 120, "rater_pool_size": 12,
            "background_tweets": 25,
        }}))
        out = str(tmp_path / "conf")
        res = runner.invoke(main, ["confound", "--config", str(cfg),
                                   "--seed", "0", "--out-dir", out])
        assert res.exit_code == 0, res.output
        rep = read_json(out, "confound.json")
        assert set(rep) >= {"full_sample", "equal_exposure",
                            "zero_lag_counterfactual", "pattern_holds"}


class TestReportAll:
    def test_simulated_end_to_end(self, runner, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"sim": SMALL_SIM}))
        out = str(tmp_path / "all")
        res = runner.invoke(main, ["report-all", "--config", str(cfg),
                                   "--seed", "4", "--out-dir", out])
        assert res.exit_code == 0, res.output
        manifest = read_json(out, "manifest.json")
        expected = {"scores.tsv", "scores.json", "table1.json",
                    "pairwise.json", "bucket_table.tsv", "text_profile.json",
                    "robustness.json", "truth.json"}
        assert expected <= set(manifest["outputs"])
        for name in manifest["outputs"]:
            assert os.path.getsize(os.path.join(out, name)) > 0
