"""Candidate attribute rules from decision trees and permutation importance.

A depth-capped Gini tree is fit on the large-error subset, feature columns
are ranked by how much accuracy a random shuffle of each one destroys, and
the top-ranked features map onto rule prototypes: equality for shared
categorical difference columns, an inequality with a direction left to the
annotator for numerical column pairs, presence for stand-alone attributes,
and a prompt placeholder for attributes too sparse to match structurally.

The tree consumes placeholder-filled columns (missing cells carry the 0.0
placeholder), so presence versus absence of an attribute is itself a split
the tree can discover; that is what lets sparse and stand-alone attributes
surface as Contain and Prompt candidates.

The split-scan and leaf-routing kernels run through a compiled extension
when it is importable; a numpy fallback with identical arithmetic is
selected otherwise (see amrule.tree_backend_name()).
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .catalog import CATEGORICAL, NUMERICAL
from .featurize import ANCHOR, REC, SHARED_DIFF, FeatureDescriptor, PairEncoding
from .rules import CONTAIN, EXACT_MATCH, PROMPT, RANGE, UNRESOLVED, CandidateRule, Rule

try:  # pragma: no cover - import-time backend pick
    from . import _tree_core as _backend
except ImportError:  # pragma: no cover
    from . import _tree_backend_py as _backend

from . import _tree_backend_py as _py_backend

BACKEND = _backend.BACKEND

MIN_DEPTH, MAX_DEPTH = 3, 10


def backend_name() -> str:
    return BACKEND


@dataclass
class DecisionTree:
    """Flat-array binary tree; leaves carry the class-count distribution."""

    feature: np.ndarray     # int64, -1 at leaves
    threshold: np.ndarray   # float64
    left: np.ndarray        # int64
    right: np.ndarray       # int64
    leaf_label: np.ndarray  # int64 class index, valid at every node
    counts: np.ndarray      # (n_nodes, 2) class counts
    depth: int
    n_features: int

    def predict_classes(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return np.asarray(_backend.predict_classes(
            self.feature, self.threshold, self.left, self.right,
            self.leaf_label, X))

    def predict_labels(self, X: np.ndarray) -> np.ndarray:
        return np.where(self.predict_classes(X) == 0, 1, -1)

    def features_used(self) -> set[int]:
        return {int(f) for f in self.feature if f >= 0}

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


def fit_tree(
    subset: Sequence[tuple[PairEncoding, int]] | tuple[np.ndarray, np.ndarray],
    depth: int,
    seed: int = 0,
) -> DecisionTree:
    """Greedy Gini tree over placeholder-filled columns.

    ``subset`` is either (encoding, label) pairs or an (X, y) tuple with
    labels in {+1, -1}.  ``seed`` is accepted for interface stability; every
    tie already breaks deterministically (lowest feature index, lowest
    threshold), so the fit does not consume randomness.
    """
    if not MIN_DEPTH <= depth <= MAX_DEPTH:
        raise ValueError(f"depth must be in [{MIN_DEPTH}, {MAX_DEPTH}], got {depth}")
    if isinstance(subset, tuple) and len(subset) == 2:
        X, y = subset
    else:
        if not len(subset):
            raise ValueError("subset must be non-empty")
        X = np.stack([enc.values for enc, _ in subset])
        y = np.array([label for _, label in subset])
    X = np.ascontiguousarray(X, dtype=np.float64)
    y_cls = np.where(np.asarray(y) == 1, 0, 1).astype(np.int64)
    n, d = X.shape

    nodes: list[dict] = []

    def build(rows: np.ndarray, level: int) -> int:
        node_id = len(nodes)
        nodes.append({})
        n1 = int(y_cls[rows].sum())
        n0 = len(rows) - n1
        node = {"feature": -1, "threshold": 0.0, "left": -1, "right": -1,
                "label": 0 if n0 >= n1 else 1, "counts": (n0, n1)}
        nodes[node_id] = node
        if level >= depth or n0 == 0 or n1 == 0 or len(rows) < 2:
            return node_id
        best_gain, best_f, best_thr = 0.0, -1, 0.0
        for f in range(d):
            col = X[rows, f]
            order = np.argsort(col, kind="stable")
            vals = np.ascontiguousarray(col[order])
            cls = np.ascontiguousarray(y_cls[rows][order])
            gain, thr, _ = _backend.scan_feature(vals, cls)
            if gain > best_gain:
                best_gain, best_f, best_thr = gain, f, thr
        if best_f < 0:
            return node_id
        go_left = X[rows, best_f] <= best_thr
        left_rows, right_rows = rows[go_left], rows[~go_left]
        node.update(feature=best_f, threshold=best_thr)
        node["left"] = build(left_rows, level + 1)
        node["right"] = build(right_rows, level + 1)
        return node_id

    build(np.arange(n), 0)
    return DecisionTree(
        feature=np.array([nd["feature"] for nd in nodes], dtype=np.int64),
        threshold=np.array([nd["threshold"] for nd in nodes], dtype=np.float64),
        left=np.array([nd["left"] for nd in nodes], dtype=np.int64),
        right=np.array([nd["right"] for nd in nodes], dtype=np.int64),
        leaf_label=np.array([nd["label"] for nd in nodes], dtype=np.int64),
        counts=np.array([nd["counts"] for nd in nodes], dtype=np.int64),
        depth=depth, n_features=d)


# ---------------------------------------------------------------------------
# Permutation importance
# ---------------------------------------------------------------------------

@dataclass
class FeatureImportance:
    feature: int
    mu: float
    repeats: int
    scores: list[float] = field(default_factory=list)  # accuracy per repeat

    def to_dict(self) -> dict:
        return {"feature": self.feature, "mu": self.mu,
                "repeats": self.repeats, "scores": self.scores}


def importance_permutations(n: int, d: int, K: int, seed: int) -> list[list[np.ndarray]]:
    """The exact permutation schedule used by permutation_importance.

    Draws K permutations of n rows per feature from one seeded generator,
    features in ascending index order, repeats in ascending order.  Replaying
    this schedule reproduces every score bit-for-bit.
    """
    rng = np.random.default_rng(seed)
    return [[rng.permutation(n) for _ in range(K)] for _ in range(d)]


def permutation_importance(
    evaluate: Callable[[np.ndarray], np.ndarray],
    X: np.ndarray,
    y: np.ndarray,
    K: int = 10,
    seed: int = 0,
    permutations: list[list[np.ndarray]] | None = None,
) -> list[FeatureImportance]:
    """Accuracy drop caused by shuffling each column, averaged over K repeats.

    ``evaluate(X) -> labels`` is the model under test (the induced tree by
    default; configurable to the weak MLP).  Placeholder zeros travel with
    the shuffle, so a permuted missing cell stays missing.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    n, d = X.shape
    if n == 0:
        raise ValueError("subset must be non-empty")
    if permutations is None:
        permutations = importance_permutations(n, d, K, seed)
    base = float(np.mean(evaluate(X) == y))
    out: list[FeatureImportance] = []
    for f in range(d):
        scores: list[float] = []
        for k in range(K):
            perm = permutations[f][k]
            Xp = X.copy()
            Xp[:, f] = X[perm, f]
            scores.append(float(np.mean(evaluate(Xp) == y)))
        # averaged in delta form so a no-op permutation yields exactly 0
        mu = sum(base - s for s in scores) / K
        out.append(FeatureImportance(feature=f, mu=mu, repeats=K, scores=scores))
    return out


# ---------------------------------------------------------------------------
# Rule prototypes
# ---------------------------------------------------------------------------

def _tokens(attr: str) -> set[str]:
    return set(re.split(r"[^a-z0-9]+", attr.lower())) - {""}


def _range_counterpart(desc: FeatureDescriptor,
                       layout: Sequence[FeatureDescriptor]) -> FeatureDescriptor | None:
    """Opposite-side numerical attribute with the largest name-token overlap."""
    other = REC if desc.provenance == ANCHOR else ANCHOR
    mine = _tokens(desc.attribute)
    best, best_overlap = None, 0
    for cand in layout:
        if cand.provenance != other or cand.kind != NUMERICAL:
            continue
        overlap = len(mine & _tokens(cand.attribute))
        if overlap > best_overlap:
            best, best_overlap = cand, overlap
    return best


def _prototype(desc: FeatureDescriptor, layout: Sequence[FeatureDescriptor],
               sparse: bool) -> Rule | None:
    """Map one encoding column to an unbound rule prototype, or None."""
    if sparse:
        return Rule(id="", kind=PROMPT, mu=0.0, iteration=0, attribute=desc.attribute)
    if desc.provenance == SHARED_DIFF:
        if desc.kind == CATEGORICAL:
            return Rule(id="", kind=EXACT_MATCH, mu=0.0, iteration=0,
                        attribute=desc.attribute)
        return Rule(id="", kind=RANGE, mu=0.0, iteration=0,
                    anchor_attribute=desc.attribute, rec_attribute=desc.attribute,
                    direction=UNRESOLVED)
    if desc.kind == NUMERICAL:
        partner = _range_counterpart(desc, layout)
        if partner is not None:
            a, r = (desc, partner) if desc.provenance == ANCHOR else (partner, desc)
            return Rule(id="", kind=RANGE, mu=0.0, iteration=0,
                        anchor_attribute=a.attribute, rec_attribute=r.attribute,
                        direction=UNRESOLVED)
    return Rule(id="", kind=CONTAIN, mu=0.0, iteration=0,
                attribute=desc.attribute, side=desc.provenance)


def propose_tree_rules(
    importances: Sequence[FeatureImportance],
    layout: Sequence[FeatureDescriptor],
    sparsity: Sequence[float],
    b: int,
    sparse_threshold: float = 0.5,
    exclude: set[tuple] | None = None,
    iteration: int = 0,
    only_prompts: bool = False,
) -> list[CandidateRule]:
    """Top-b importance features mapped to rule prototypes.

    Features tie-break by ascending index; only strictly positive importance
    is usable.  A candidate whose (kind, attributes) identity was already
    accepted or rejected earlier in the run is skipped and the next feature
    promoted, so the budget surfaces novel rules.  Attributes at or above the
    sparse threshold become prompt placeholders for the description view
    (``only_prompts`` forces that for every feature).
    """
    if b < 1:
        raise ValueError("b must be >= 1")
    exclude = set(exclude or ())
    ranked = sorted(importances, key=lambda fi: (-fi.mu, fi.feature))
    out: list[CandidateRule] = []
    seen: set[tuple] = set()
    for fi in ranked:
        if len(out) >= b:
            break
        if fi.mu <= 0.0:
            continue
        desc = layout[fi.feature]
        sparse = only_prompts or sparsity[fi.feature] >= sparse_threshold
        proto = _prototype(desc, layout, sparse)
        if proto is None:
            continue
        key = proto.key()
        if key in exclude or key in seen:
            continue
        seen.add(key)
        proto.id = f"r{iteration:02d}-{len(out):02d}"
        proto.mu = fi.mu
        proto.iteration = iteration
        out.append(CandidateRule(rule=proto, feature_index=fi.feature))
    if len(out) < b:
        warnings.warn(
            f"only {len(out)} usable candidate rules for budget b={b}", stacklevel=2)
    return out


def python_backend():
    """The numpy fallback kernels (for backend-parity tests and benchmarks)."""
    return _py_backend


def active_backend():
    return _backend
