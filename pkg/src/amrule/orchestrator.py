"""Run configuration, iteration driver, persistence, and evaluation.

One run executes T boosting iterations over a curated weak dataset: train the
weak model on the current augmented set, measure its weighted error on the
original weak training pairs, update instance weights, discover candidate
rules from the largest-weight instances, route them through annotation, match
the accepted rules against the unlabeled holdout to mint new weak positives,
and fold the model into the coefficient-weighted ensemble.  Every artifact
persists under the run directory so a finished run can be audited or
re-evaluated from disk alone.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import boosting, matching, tree_rules
from .annotation import (
    AnnotationDecision,
    DecisionsFileAnnotator,
    ScriptedAnnotator,
    SessionManager,
    append_decision_log,
)
from .catalog import (
    Catalog,
    DatasetSplit,
    LabeledPair,
    build_weak_dataset,
    load_catalog,
    load_copurchase,
    load_unlabeled,
    save_pairs,
    split_dataset,
)
from .featurize import PairFeaturizer, Standardizer, save_encoding
from .learner import MLPModel, TrainConfig, train_weak_model
from .prompt_rules import (
    NEGATIVE,
    POSITIVE,
    HttpLMClient,
    PromptUnavailableError,
    StubLMClient,
    propose_prompt_rule,
)
from .rules import PROMPT, CandidateRule, Rule

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

ABLATIONS = ("full", "only-attributes", "only-description", "only-boosting", "no-ensemble")


class RunConfigError(ValueError):
    pass


class StageError(RuntimeError):
    """An iteration stage failed; the run rolls back to the last persisted one."""


@dataclass
class RunConfig:
    # boosting loop
    iterations: int = 10
    budget: int = 10
    top_n: int = 300
    tree_depth: int = 5
    importance_repeats: int = 10
    threshold: float = 0.6
    cap: int = 500
    seed: int = 0
    ablation: str = "full"
    # dataset curation
    min_count: int = 3
    neg_ratio: float = 1.0
    min_count_test: int | None = None  # defaults to 2 * min_count
    ratios: tuple[float, float, float] = (0.7, 0.15, 0.15)
    sparse_threshold: float = 0.5
    # weak learner
    learning_rate: float = 2e-4
    weight_decay: float = 1e-4
    epochs: int = 100
    batch_size: int = 64
    hidden: tuple[int, int] = (64, 32)
    patience: int | None = None
    # resolved ambiguities, switchable
    error_source: str = "model"      # model | ensemble
    importance_target: str = "tree"  # tree | mlp
    drop_weak_models: bool = False
    # annotation
    annotator: str = "scripted"      # scripted | decisions | api
    truth_rules: str | None = None
    decisions: str | None = None
    # language-model client: "stub" or a base URL
    lm: str = "stub"
    # data paths
    catalog_a: str = ""
    catalog_b: str = ""
    copurchase: str = ""
    unlabeled: str | None = None

    def __post_init__(self):
        if self.ablation not in ABLATIONS:
            raise RunConfigError(f"ablation must be one of {ABLATIONS}")
        if self.iterations < 1 or self.budget < 1 or self.top_n < 1:
            raise RunConfigError("iterations, budget, and top_n must be >= 1")
        if self.error_source not in ("model", "ensemble"):
            raise RunConfigError("error_source must be 'model' or 'ensemble'")
        if self.importance_target not in ("tree", "mlp"):
            raise RunConfigError("importance_target must be 'tree' or 'mlp'")
        if self.annotator not in ("scripted", "decisions", "api"):
            raise RunConfigError("annotator must be scripted, decisions, or api")

    @property
    def test_min_count(self) -> int:
        return self.min_count_test if self.min_count_test is not None else 2 * self.min_count

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        cfg = RunConfig()
        for key, value in d.items():
            if not hasattr(cfg, key):
                raise RunConfigError(f"unknown run config key {key!r}")
            if isinstance(getattr(cfg, key), tuple) and value is not None:
                value = tuple(value)
            setattr(cfg, key, value)
        cfg.__post_init__()
        return cfg

    @staticmethod
    def from_file(path: str | Path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return RunConfig.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


class Run:
    """Driver for one configured run rooted at a run directory."""

    def __init__(self, config: RunConfig, run_dir: str | Path,
                 annotator=None, lm_client=None):
        self.config = config
        self.run_dir = Path(run_dir)
        self.lm = lm_client or (StubLMClient() if config.lm == "stub"
                                else HttpLMClient(config.lm))
        self.annotator = annotator or self._build_annotator()
        self.sessions = SessionManager(
            path_factory=lambda t: self.iter_dir(t) / "session.json")
        self.finalized_event = threading.Event()
        self.stage = "created"
        self.iteration = 0
        self.done = False
        self.error: str | None = None

        # populated by prepare()
        self.catalog_a: Catalog | None = None
        self.catalog_b: Catalog | None = None
        self.featurizer: PairFeaturizer | None = None
        self.standardizer: Standardizer | None = None
        self.pairs: dict[str, LabeledPair] = {}
        self.split: DatasetSplit | None = None
        self.weights: np.ndarray | None = None
        self.train_ids: list[str] = []
        self.minted: list[LabeledPair] = []
        self.unlabeled_ids: list[tuple[str, str]] = []
        self.ensemble = boosting.EnsembleModel()
        self.accepted_rules: list[Rule] = []
        self.rejected_rule_ids: list[str] = []
        self.rule_keys_seen: set[tuple] = set()
        self.records: list[boosting.IterationRecord] = []
        self._enc_cache: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    # ------------------------------------------------------------------
    # setup
    # ------------------------------------------------------------------

    def _build_annotator(self):
        cfg = self.config
        if cfg.annotator == "scripted":
            if not cfg.truth_rules:
                raise RunConfigError("scripted annotator needs truth_rules")
            return ScriptedAnnotator.from_file(cfg.truth_rules)
        if cfg.annotator == "decisions":
            if not cfg.decisions:
                raise RunConfigError("decisions annotator needs a decisions file")
            return DecisionsFileAnnotator(cfg.decisions)
        return None  # api: decisions arrive through the service

    def iter_dir(self, t: int) -> Path:
        return self.run_dir / "iterations" / f"{t:02d}"

    def prepare(self) -> None:
        cfg = self.config
        self._set_stage("prepare")
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.catalog_a = load_catalog(cfg.catalog_a)
        self.catalog_b = load_catalog(cfg.catalog_b)
        records = load_copurchase(cfg.copurchase)
        pairs = build_weak_dataset(self.catalog_a, self.catalog_b, records,
                                   min_count=cfg.min_count, neg_ratio=cfg.neg_ratio,
                                   seed=cfg.seed)
        self.pairs = {p.pair_id: p for p in pairs}
        self.split = split_dataset(pairs, cfg.ratios, seed=cfg.seed + 1,
                                   min_count_test=cfg.test_min_count)
        self.train_ids = list(self.split.train)

        labeled_keys = set(self.pairs)
        if cfg.unlabeled:
            self.unlabeled_ids = [
                (a, b) for a, b in load_unlabeled(cfg.unlabeled)
                if f"{a}|{b}" not in labeled_keys]
        else:
            self.unlabeled_ids = []
        self.split.holdout_unlabeled = [f"{a}|{b}" for a, b in self.unlabeled_ids]

        self.featurizer = PairFeaturizer(self.catalog_a.schema, self.catalog_b.schema)
        train_products = [(self.catalog_a.get(self.pairs[i].anchor_id),
                           self.catalog_b.get(self.pairs[i].rec_id))
                          for i in self.train_ids]
        self.featurizer.fit_categories(train_products)
        X_train, _ = self._matrix(self.train_ids)
        self.standardizer = Standardizer().fit(X_train, self.featurizer.descriptors)
        self.weights = boosting.init_weights(len(self.train_ids))

        _write_json(self.run_dir / "config.json", cfg.to_dict())
        _write_json(self.run_dir / "manifest.json", {
            "schema_version": SCHEMA_VERSION,
            "seed": cfg.seed,
            "tree_backend": tree_rules.backend_name(),
            "seed_plan": {
                "dataset": cfg.seed, "split": cfg.seed + 1,
                "train": "seed*1000 + t", "importance": "seed*1000 + 500 + t"},
        })
        save_encoding(self.featurizer, self.run_dir / "encoding.json")
        save_pairs(pairs, self.run_dir / "dataset.jsonl")
        _write_json(self.run_dir / "splits.json", self.split.as_dict())
        self._set_stage("ready")

    # ------------------------------------------------------------------
    # encoding helpers
    # ------------------------------------------------------------------

    def _encode_ids(self, anchor_id: str, rec_id: str):
        key = f"{anchor_id}|{rec_id}"
        hit = self._enc_cache.get(key)
        if hit is None:
            enc = self.featurizer.encode(self.catalog_a.get(anchor_id),
                                         self.catalog_b.get(rec_id))
            hit = (enc.values, enc.mask)
            self._enc_cache[key] = hit
        return hit

    def _matrix(self, pair_ids: list[str]):
        rows = [self._encode_ids(*pid.split("|", 1)) for pid in pair_ids]
        X = np.stack([r[0] for r in rows])
        M = np.stack([r[1] for r in rows])
        return X, M

    def _labels(self, pair_ids: list[str]) -> np.ndarray:
        return np.array([self.pairs[i].label for i in pair_ids])

    # ------------------------------------------------------------------
    # the iteration
    # ------------------------------------------------------------------

    def run_all(self) -> None:
        try:
            if self.split is None:
                self.prepare()
            for _ in range(self.config.iterations):
                self.run_iteration()
            self.done = True
            self._set_stage("done")
        except Exception as exc:
            self.error = str(exc)
            self._set_stage("failed")
            raise

    def run_iteration(self) -> boosting.IterationRecord:
        cfg = self.config
        t = self.iteration + 1
        if t > cfg.iterations:
            raise StageError(f"run already completed {cfg.iterations} iterations")
        itdir = self.iter_dir(t)

        # -- train the weak model on the augmented dataset ------------------
        self._set_stage("train")
        train_pairs = [self.pairs[i] for i in self.train_ids] + self.minted
        X_aug = np.stack([self._encode_ids(p.anchor_id, p.rec_id)[0] for p in train_pairs])
        y_aug = np.array([p.label for p in train_pairs])
        X_val, _ = self._matrix(self.split.validation)
        y_val = self._labels(self.split.validation)
        tcfg = TrainConfig(learning_rate=cfg.learning_rate, weight_decay=cfg.weight_decay,
                           epochs=cfg.epochs, batch_size=cfg.batch_size,
                           seed=cfg.seed * 1000 + t, hidden=tuple(cfg.hidden),
                           patience=cfg.patience)
        from .learner import fit_mlp
        model = fit_mlp(X_aug, y_aug, tcfg, X_val, y_val, self.standardizer)

        # -- weighted error and coefficient on the original weak pairs ------
        self._set_stage("boost")
        X_l, _ = self._matrix(self.train_ids)
        y_l = self._labels(self.train_ids)
        preds = model.predict_labels(X_l)
        if cfg.error_source == "ensemble" and len(self.ensemble):
            vote = np.zeros(len(X_l))
            for m, a in self.ensemble.members:
                vote += a * m.predict_labels(X_l)
            vote += 1.0 * preds
            preds_for_err = np.where(vote >= 0.0, 1, -1)
        else:
            preds_for_err = preds
        err, err_raw = boosting.weighted_error(self.weights, preds_for_err, y_l)
        alpha = boosting.model_coefficient(err)
        self.weights = boosting.update_weights(self.weights, preds_for_err, y_l, alpha)
        if not (cfg.drop_weak_models and alpha <= 0.0):
            self.ensemble.append(model, alpha)

        # -- rule discovery on the large-error subset -----------------------
        selected = boosting.select_large_error(self.weights, min(cfg.top_n, len(self.weights)))
        candidates: list[CandidateRule] = []
        discover = cfg.ablation != "only-boosting" and not (
            cfg.ablation == "no-ensemble" and t > 1)
        budget = cfg.budget * cfg.iterations if (
            cfg.ablation == "no-ensemble" and t == 1) else cfg.budget
        if discover:
            self._set_stage("discover")
            candidates = self._discover_rules(t, selected, budget, model)

        # -- annotation ------------------------------------------------------
        accepted: list[Rule] = []
        if discover:
            self._set_stage("annotation")
            accepted = self._annotate(t, candidates, budget)
            self.accepted_rules.extend(accepted)
            for cand in candidates:
                self.rule_keys_seen.add(cand.rule.key())
            for rule in accepted:
                if rule.kind == PROMPT:
                    # an accepted prompt settles its attribute for good; only
                    # rejected fillings may be re-proposed with another token
                    self.rule_keys_seen.add((PROMPT, rule.attribute, None))
            self.rejected_rule_ids.extend(self.sessions.rejected_ids())
            _write_json(itdir / "rules.json", [r.to_dict() for r in accepted])

        # -- rule matching over the unlabeled holdout ------------------------
        minted: list[LabeledPair] = []
        if discover and self.accepted_rules and self.unlabeled_ids:
            self._set_stage("match")
            minted = self._match_and_mint(t, itdir)
            self.minted.extend(minted)

        # -- metrics and persistence -----------------------------------------
        self._set_stage("evaluate")
        test_acc = self.evaluate_split("test")["accuracy"]
        val_acc = self.evaluate_split("validation")["accuracy"]
        record = boosting.IterationRecord(
            iteration=t, err=err, err_raw=err_raw, alpha=alpha,
            n_candidates=len(candidates), n_accepted=len(accepted),
            n_minted=len(minted), dataset_size=len(train_pairs),
            metrics={"test_accuracy": test_acc, "validation_accuracy": val_acc,
                     "weight_total": float(np.sum(self.weights))})
        self.records.append(record)
        self.iteration = t

        itdir.mkdir(parents=True, exist_ok=True)
        model.save(itdir / "model.json")
        _write_json(itdir / "weights.json",
                    {"iteration": t, "weights": [float(w) for w in self.weights]})
        _write_json(itdir / "candidates.json", [c.to_dict() for c in candidates])
        if not (itdir / "rules.json").exists():
            _write_json(itdir / "rules.json", [])
        _write_json(itdir / "metrics.json", record.to_dict())
        _write_json(self.run_dir / "metrics.json", self.metrics_doc())
        self._set_stage("idle")
        return record

    # ------------------------------------------------------------------
    # stages
    # ------------------------------------------------------------------

    def _discover_rules(self, t: int, selected: list[int], budget: int,
                        model: MLPModel) -> list[CandidateRule]:
        cfg = self.config
        sel_ids = [self.train_ids[i] for i in selected]
        X, _ = self._matrix(sel_ids)
        y = self._labels(sel_ids)
        tree = tree_rules.fit_tree((X, y), depth=cfg.tree_depth)
        evaluate = model.predict_labels if cfg.importance_target == "mlp" else tree.predict_labels
        importances = tree_rules.permutation_importance(
            evaluate, X, y, K=cfg.importance_repeats,
            seed=cfg.seed * 1000 + 500 + t)

        sparsity = self._column_sparsity()
        threshold = 1.1 if cfg.ablation == "only-attributes" else cfg.sparse_threshold
        candidates = tree_rules.propose_tree_rules(
            importances, self.featurizer.descriptors, sparsity, b=budget,
            sparse_threshold=threshold, exclude=self.rule_keys_seen,
            iteration=t, only_prompts=cfg.ablation == "only-description")

        examples = self._example_context(sel_ids[:3])
        completed: list[CandidateRule] = []
        for cand in candidates:
            if cand.rule.kind == PROMPT:
                done = self._complete_prompt(cand, sel_ids, t)
                if done is None:
                    continue
                cand = done
            cand.examples = examples
            completed.append(cand)
        return completed

    def _complete_prompt(self, cand: CandidateRule, sel_ids: list[str],
                         t: int) -> CandidateRule | None:
        """Fill a prompt placeholder using a large-error pair's descriptions."""
        attr = cand.rule.attribute
        ordered = []
        for rank, pid in enumerate(sel_ids):
            pair = self.pairs[pid]
            a = self.catalog_a.get(pair.anchor_id)
            b = self.catalog_b.get(pair.rec_id)
            if not a.description.strip() or not b.description.strip():
                continue
            missing = a.attr(attr) is None or b.attr(attr) is None
            # prefer weak positives whose attribute value is hidden: those are
            # the pairs a description-based fallback rule is meant to cover
            ordered.append(((0 if pair.label == 1 else 1, 0 if missing else 1, rank),
                            pair, a, b))
        ordered.sort(key=lambda item: item[0])
        for _, pair, a, b in ordered:
            polarity = POSITIVE if pair.label == 1 else NEGATIVE
            try:
                done = propose_prompt_rule(self.lm, a, b, attr, cand.rule.mu,
                                           polarity, t, cand.rule.id)
                done.feature_index = cand.feature_index
                return done
            except PromptUnavailableError:
                continue
        log.warning("no usable pair to fill prompt candidate %s", cand.id)
        return None

    def _column_sparsity(self) -> list[float]:
        sa, sb = self.catalog_a.schema.sparsity, self.catalog_b.schema.sparsity
        out = []
        for d in self.featurizer.descriptors:
            if d.provenance == "anchor":
                out.append(sa.get(d.attribute, 0.0))
            elif d.provenance == "rec":
                out.append(sb.get(d.attribute, 0.0))
            else:
                out.append(max(sa.get(d.attribute, 0.0), sb.get(d.attribute, 0.0)))
        return out

    def _example_context(self, pair_ids: list[str]) -> list[dict]:
        out = []
        for pid in pair_ids:
            pair = self.pairs[pid]
            a = self.catalog_a.get(pair.anchor_id)
            b = self.catalog_b.get(pair.rec_id)
            out.append({
                "pair_id": pid, "label": pair.label,
                "anchor": {"id": a.id, "name": a.name, "attributes": a.attributes,
                           "description": a.description},
                "rec": {"id": b.id, "name": b.name, "attributes": b.attributes,
                        "description": b.description},
            })
        return out

    def _annotate(self, t: int, candidates: list[CandidateRule],
                  budget: int) -> list[Rule]:
        session = self.sessions.open_session(t, candidates, budget)
        if session.state == "finalized":  # no candidates
            return []
        decisions_log = self.run_dir / "decisions.jsonl"
        if self.annotator is not None:
            for cand in candidates:
                decision = self.annotator.decide(cand)
                self.sessions.submit_decision(decision)
                append_decision_log(decisions_log, decision)
            return self.sessions.finalize()
        # api mode: decisions arrive through the service; wait for finalize
        self._set_stage("annotation")
        while self.sessions.current.state != "finalized":
            self.finalized_event.wait(timeout=0.2)
            self.finalized_event.clear()
        return self.sessions.finalize()

    def submit_api_decision(self, decision: AnnotationDecision):
        """Entry point for the annotation service."""
        session = self.sessions.submit_decision(decision)
        append_decision_log(self.run_dir / "decisions.jsonl", decision)
        return session

    def finalize_api_session(self) -> list[Rule]:
        accepted = self.sessions.finalize()
        self.finalized_event.set()
        return accepted

    def _match_and_mint(self, t: int, itdir: Path) -> list[LabeledPair]:
        cfg = self.config
        scores = []
        for a_id, b_id in self.unlabeled_ids:
            values, mask = self._encode_ids(a_id, b_id)
            enc = _Encoding(values, mask, self.featurizer.descriptors)
            scores.append(matching.score_pair(
                self.accepted_rules, enc, self.catalog_a.get(a_id),
                self.catalog_b.get(b_id), self.featurizer, self.lm))
        minted = matching.assign_weak_labels(scores, cfg.threshold, cfg.cap, t)
        minted_ids = {p.pair_id for p in minted}
        itdir.mkdir(parents=True, exist_ok=True)
        matching.save_matches(scores, minted_ids, itdir / "matches.json")
        self.unlabeled_ids = [(a, b) for a, b in self.unlabeled_ids
                              if f"{a}|{b}" not in minted_ids]
        return minted

    # ------------------------------------------------------------------
    # evaluation and reporting
    # ------------------------------------------------------------------

    def evaluate_split(self, name: str) -> dict:
        ids = getattr(self.split, {"train": "train", "validation": "validation",
                                   "test": "test"}[name])
        if not ids:
            raise ValueError(f"split {name} is empty")
        X, _ = self._matrix(ids)
        y = self._labels(ids)
        preds = boosting.ensemble_predict_matrix(self.ensemble, X)
        return {"split": name, "size": len(ids),
                "accuracy": float(np.mean(preds == y))}

    def metrics_doc(self) -> dict:
        iterations = []
        for r in self.records:
            row = r.to_dict()
            row.update(row.pop("metrics"))
            iterations.append(row)
        doc = {
            "schema_version": SCHEMA_VERSION,
            "seed": self.config.seed,
            "ablation": self.config.ablation,
            "iterations": iterations,
            "final": {
                "completed_iterations": self.iteration,
                "ensemble_size": len(self.ensemble),
                "accepted_rules": len(self.accepted_rules),
                "total_minted": len(self.minted),
                "test_accuracy": iterations[-1]["test_accuracy"] if iterations else None,
            },
        }
        return doc

    def _set_stage(self, stage: str) -> None:
        self.stage = stage

    def status(self) -> dict:
        return {"iteration": self.iteration + (0 if self.stage in ("idle", "done", "ready", "created") else 1),
                "stage": self.stage, "done": self.done, "error": self.error}


class _Encoding:
    """Lightweight PairEncoding view over cached arrays."""

    __slots__ = ("values", "mask", "descriptors")

    def __init__(self, values, mask, descriptors):
        self.values = values
        self.mask = mask
        self.descriptors = descriptors


def load_run_for_eval(run_dir: str | Path) -> Run:
    """Rebuild a finished run's data and ensemble from its directory."""
    run_dir = Path(run_dir)
    cfg = RunConfig.from_file(run_dir / "config.json")
    manifest = json.loads((run_dir / "manifest.json").read_text())
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise RunConfigError(
            f"run directory uses metrics schema {manifest.get('schema_version')}, "
            f"this build writes {SCHEMA_VERSION}; refusing to resume")
    run = Run(cfg, run_dir)
    run.prepare()
    metrics = json.loads((run_dir / "metrics.json").read_text())
    for row in metrics["iterations"]:
        t = row["iteration"]
        model = MLPModel.load(run.iter_dir(t) / "model.json")
        run.ensemble.append(model, row["alpha"])
        run.iteration = t
    return run
