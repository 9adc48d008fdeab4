import json

from click.testing import CliRunner

from amrule.cli import main

from conftest import SMALL_RUN, SMALL_SYNTH


def test_synth_run_eval_flow(tmp_path):
    runner = CliRunner()
    synth_cfg = tmp_path / "synth.json"
    synth_cfg.write_text(json.dumps(SMALL_SYNTH))
    data = tmp_path / "data"
    res = runner.invoke(main, ["synth", "--config", str(synth_cfg), "--out", str(data)])
    assert res.exit_code == 0, res.output
    assert (data / "rules_truth.json").exists()

    run_cfg = dict(SMALL_RUN)
    run_cfg.update(iterations=1,
                   catalog_a=str(data / "catalog_a.jsonl"),
                   catalog_b=str(data / "catalog_b.jsonl"),
                   copurchase=str(data / "copurchase.csv"),
                   unlabeled=str(data / "unlabeled.csv"),
                   truth_rules=str(data / "rules_truth.json"),
                   annotator="scripted")
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(run_cfg))
    run_dir = tmp_path / "run"
    res = runner.invoke(main, ["run", "--config", str(cfg_path), "--out", str(run_dir)])
    assert res.exit_code == 0, res.output
    assert (run_dir / "metrics.json").exists()
    final = json.loads(res.output[res.output.index("{"):])
    assert final["completed_iterations"] == 1

    res = runner.invoke(main, ["eval", "--run", str(run_dir), "--split", "test"])
    assert res.exit_code == 0, res.output
    payload = json.loads(res.output)
    assert payload["split"] == "test"
    assert 0.0 <= payload["accuracy"] <= 1.0

    # seed and ablation overrides are accepted
    res = runner.invoke(main, ["run", "--config", str(cfg_path),
                               "--out", str(tmp_path / "run2"),
                               "--ablation", "only-boosting", "--seed", "9"])
    assert res.exit_code == 0, res.output
    written = json.loads((tmp_path / "run2" / "config.json").read_text())
    assert written["ablation"] == "only-boosting"
    assert written["seed"] == 9


def test_run_rejects_api_annotator(tmp_path):
    cfg = dict(SMALL_RUN)
    cfg.update(annotator="api", catalog_a="x", catalog_b="x", copurchase="x")
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    runner = CliRunner()
    res = runner.invoke(main, ["run", "--config", str(cfg_path), "--out", str(tmp_path / "r")])
    assert res.exit_code != 0
    assert "serve" in res.output
