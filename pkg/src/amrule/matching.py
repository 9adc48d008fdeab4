"""Score unlabeled pairs against accepted rules and mint weak positives.

Attribute rules contribute their importance weight when the pair hard-matches
them (missing values never match); prompt rules contribute importance times
the clamped embedding cosine between the pair's filled prompt and the rule's
stored prompt.  Per-pair totals accumulate in plain left-to-right order so an
audit can recompute them bit-for-bit, and the normalized score divides by the
total importance mass of the rule set.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .catalog import LabeledPair, Product
from .featurize import ANCHOR, REC, SHARED_DIFF, PairEncoding, PairFeaturizer
from .prompt_rules import PromptUnavailableError, TransportError, embed_pair_prompt
from .rules import CONTAIN, EXACT_MATCH, PROMPT, RANGE, Rule

log = logging.getLogger(__name__)


@dataclass
class MatchScore:
    pair_id: str
    components: list[dict] = field(default_factory=list)  # per rule: {rule_id, s_d, s_p}
    total: float = 0.0
    normalized: float = 0.0

    def to_dict(self) -> dict:
        return {"pair_id": self.pair_id, "components": self.components,
                "total": self.total, "normalized": self.normalized}


def _column(encoding: PairEncoding, featurizer: PairFeaturizer,
            provenance: str, attribute: str):
    desc = featurizer.descriptor(provenance, attribute)
    if desc is None:
        return None, False
    return float(encoding.values[desc.index]), bool(encoding.mask[desc.index])


def score_tree_rule(rule: Rule, encoding: PairEncoding,
                    featurizer: PairFeaturizer) -> float:
    """Importance-weighted hard match of one attribute rule; missing data scores 0."""
    if rule.kind == EXACT_MATCH:
        value, present = _column(encoding, featurizer, SHARED_DIFF, rule.attribute)
        satisfied = present and value == 0.0
    elif rule.kind == RANGE:
        va, pa = _column(encoding, featurizer, ANCHOR, rule.anchor_attribute)
        vb, pb = _column(encoding, featurizer, REC, rule.rec_attribute)
        if not (pa and pb):
            satisfied = False
        elif rule.direction == "ge":
            satisfied = va >= vb
        elif rule.direction == "le":
            satisfied = va <= vb
        else:
            raise ValueError(f"range rule {rule.id} has unresolved direction")
    elif rule.kind == CONTAIN:
        _, present = _column(encoding, featurizer, rule.side or ANCHOR, rule.attribute)
        satisfied = present
    else:
        raise ValueError(f"score_tree_rule got a {rule.kind} rule")
    return rule.mu if satisfied else 0.0


def clamped_cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    cos = float(np.dot(u, v) / (nu * nv))
    return min(max(cos, 0.0), 1.0)


def score_prompt_rule(rule: Rule, anchor: Product, rec: Product, client) -> float:
    """Importance times the clamped prompt-embedding cosine; 0 when unusable."""
    if rule.kind != PROMPT:
        raise ValueError(f"score_prompt_rule got a {rule.kind} rule")
    if rule.embedding is None:
        return 0.0
    try:
        pair_emb = embed_pair_prompt(client, anchor, rec, rule.attribute)
    except PromptUnavailableError:
        return 0.0
    except TransportError as exc:
        log.warning("prompt scoring degraded for %s|%s: %s", anchor.id, rec.id, exc)
        return 0.0
    return rule.mu * clamped_cosine(pair_emb, rule.embedding_array)


def score_pair(rules: Sequence[Rule], encoding: PairEncoding, anchor: Product,
               rec: Product, featurizer: PairFeaturizer, client) -> MatchScore:
    """Sum the per-rule evidence; each rule contributes only its own kind."""
    score = MatchScore(pair_id=f"{anchor.id}|{rec.id}")
    total = 0.0
    mu_mass = 0.0
    for rule in rules:
        if rule.kind == PROMPT:
            s_d = 0.0
            s_p = score_prompt_rule(rule, anchor, rec, client)
        else:
            s_d = score_tree_rule(rule, encoding, featurizer)
            s_p = 0.0
        score.components.append({"rule_id": rule.id, "s_d": s_d, "s_p": s_p})
        total += s_d + s_p
        mu_mass += rule.mu
    score.total = total
    score.normalized = total / mu_mass if mu_mass > 0.0 else 0.0
    return score


def assign_weak_labels(scores: Sequence[MatchScore], threshold: float,
                       cap: int, iteration: int) -> list[LabeledPair]:
    """Mint weak positives for the highest normalized scores above threshold."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    eligible = [s for s in scores if s.normalized >= threshold]
    eligible.sort(key=lambda s: (-s.normalized, s.pair_id))
    minted = []
    for s in eligible[:cap]:
        anchor_id, rec_id = s.pair_id.split("|", 1)
        minted.append(LabeledPair(anchor_id, rec_id, +1, weak=True,
                                  source="rule", iteration=iteration))
    if not minted:
        log.info("iteration %d matched no unlabeled pairs above %.2f",
                 iteration, threshold)
    return minted


def save_matches(scores: Sequence[MatchScore], minted_ids: set[str],
                 path: str | Path) -> None:
    """Persist the component breakdown of every minted pair for audits."""
    payload = [s.to_dict() for s in scores if s.pair_id in minted_ids]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
