import json

import numpy as np
import pytest

from amrule.boosting import EnsembleModel
from amrule.orchestrator import Run, RunConfig, RunConfigError, load_run_for_eval

from conftest import small_run_config


class ConstantModel:
    def __init__(self, label):
        self.label = label

    def predict_labels(self, X):
        return np.full(len(X), self.label)


def test_run_config_validation():
    with pytest.raises(RunConfigError):
        RunConfig(ablation="nonsense")
    with pytest.raises(RunConfigError):
        RunConfig(error_source="quantum")
    with pytest.raises(RunConfigError):
        RunConfig.from_dict({"no_such_key": 1})
    cfg = RunConfig(min_count=4)
    assert cfg.test_min_count == 8
    assert RunConfig(min_count=4, min_count_test=5).test_min_count == 5


def test_small_run_completes_with_artifacts(small_run):
    run = small_run
    assert run.done
    d = run.run_dir
    for name in ("config.json", "manifest.json", "encoding.json",
                 "dataset.jsonl", "splits.json", "metrics.json"):
        assert (d / name).exists(), name
    for t in (1, 2):
        it = d / "iterations" / f"{t:02d}"
        for name in ("model.json", "weights.json", "candidates.json",
                     "rules.json", "metrics.json"):
            assert (it / name).exists(), f"{t}/{name}"
    doc = json.loads((d / "metrics.json").read_text())
    assert doc["schema_version"] == 1
    assert len(doc["iterations"]) == 2


def test_dataset_growth_and_ensemble_length(small_run):
    run = small_run
    doc = run.metrics_doc()
    sizes = [row["dataset_size"] for row in doc["iterations"]]
    assert sizes == sorted(sizes)
    assert len(run.ensemble) == run.iteration == 2


def test_minted_pairs_leave_unlabeled_pool(small_run):
    run = small_run
    # oracle: set-difference audit across iterations
    minted_ids = {p.pair_id for p in run.minted}
    remaining = {f"{a}|{b}" for a, b in run.unlabeled_ids}
    assert minted_ids
    assert not (minted_ids & remaining)
    labeled = set(run.pairs)
    assert not (minted_ids & labeled)


def test_weights_stay_positive_and_fixed_length(small_run):
    run = small_run
    assert len(run.weights) == len(run.train_ids)
    assert np.all(run.weights > 0)
    assert np.all(np.isfinite(run.weights))


def test_evaluate_constant_and_perfect_predictors(small_run):
    run = small_run
    y = run._labels(run.split.test)
    share_pos = float(np.mean(y == 1))
    ens = EnsembleModel([(ConstantModel(1), 1.0)])
    X, _ = run._matrix(run.split.test)
    from amrule.boosting import ensemble_predict_matrix
    preds = ensemble_predict_matrix(ens, X)
    assert abs(float(np.mean(preds == y)) - share_pos) < 1e-12

    class Oracle:
        def predict_labels(self, Xq):
            return y

    perfect = EnsembleModel([(Oracle(), 2.0)])
    assert float(np.mean(ensemble_predict_matrix(perfect, X) == y)) == 1.0


def test_evaluate_matches_manual_count(small_run):
    run = small_run
    ids = run.split.test[:20]
    X, _ = run._matrix(ids)
    preds = __import__("amrule.boosting", fromlist=["x"]).ensemble_predict_matrix(
        run.ensemble, X)
    hits = 0
    for pid, pred in zip(ids, preds):
        if pred == run.pairs[pid].label:
            hits += 1
    got = run.evaluate_split("test")
    # recompute by hand over the full split
    Xf, _ = run._matrix(run.split.test)
    pf = __import__("amrule.boosting", fromlist=["x"]).ensemble_predict_matrix(
        run.ensemble, Xf)
    manual = sum(1 for pid, p in zip(run.split.test, pf) if p == run.pairs[pid].label)
    assert got["accuracy"] == manual / len(run.split.test)
    assert hits == sum(1 for pid, p in zip(ids, preds[:20]) if p == run.pairs[pid].label)


def test_only_boosting_skips_discovery(small_dataset, tmp_path):
    data_dir, _ = small_dataset
    cfg = small_run_config(data_dir, ablation="only-boosting", iterations=2)
    run = Run(cfg, tmp_path / "ob")
    run.run_all()
    doc = run.metrics_doc()
    assert all(row["n_candidates"] == 0 for row in doc["iterations"])
    assert all(row["n_minted"] == 0 for row in doc["iterations"])
    assert not run.accepted_rules
    sizes = {row["dataset_size"] for row in doc["iterations"]}
    assert len(sizes) == 1  # D_t never grows


def test_no_ensemble_spends_budget_in_first_iteration(small_dataset, tmp_path):
    data_dir, _ = small_dataset
    cfg = small_run_config(data_dir, ablation="no-ensemble", iterations=3, budget=4)
    run = Run(cfg, tmp_path / "ne")
    run.run_all()
    doc = run.metrics_doc()
    rows = doc["iterations"]
    assert rows[0]["n_candidates"] <= 4 * 3  # budget b*T available at t=1
    assert all(r["n_candidates"] == 0 for r in rows[1:])
    assert all(r["n_minted"] == 0 for r in rows[1:])
    assert len(run.ensemble) == 3  # models still ensembled


def test_only_description_proposes_prompt_rules(small_dataset, tmp_path):
    data_dir, _ = small_dataset
    cfg = small_run_config(data_dir, ablation="only-description", iterations=1)
    run = Run(cfg, tmp_path / "od")
    run.run_all()
    cands = json.loads((run.iter_dir(1) / "candidates.json").read_text())
    assert cands
    assert all(c["rule"]["kind"] == "prompt" for c in cands)


def test_only_attributes_never_proposes_prompts(small_dataset, tmp_path):
    data_dir, _ = small_dataset
    cfg = small_run_config(data_dir, ablation="only-attributes", iterations=2)
    run = Run(cfg, tmp_path / "oa")
    run.run_all()
    for t in (1, 2):
        cands = json.loads((run.iter_dir(t) / "candidates.json").read_text())
        assert all(c["rule"]["kind"] != "prompt" for c in cands)


def test_load_run_for_eval_reconstructs(small_run):
    reloaded = load_run_for_eval(small_run.run_dir)
    want = small_run.evaluate_split("test")
    got = reloaded.evaluate_split("test")
    assert got == want


def test_schema_version_guard(small_run, tmp_path):
    import shutil

    clone = tmp_path / "clone"
    shutil.copytree(small_run.run_dir, clone)
    manifest = json.loads((clone / "manifest.json").read_text())
    manifest["schema_version"] = 999
    (clone / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(RunConfigError):
        load_run_for_eval(clone)


def test_decisions_log_replays_to_identical_rules(small_dataset, small_run, tmp_path):
    data_dir, _ = small_dataset
    cfg = small_run_config(data_dir, annotator="decisions",
                           decisions=str(small_run.run_dir / "decisions.jsonl"))
    replay = Run(cfg, tmp_path / "replay")
    replay.run_all()
    for t in (1, 2):
        a = json.loads((small_run.iter_dir(t) / "rules.json").read_text())
        b = json.loads((replay.iter_dir(t) / "rules.json").read_text())
        assert a == b
