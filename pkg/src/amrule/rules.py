"""Atomic labeling rules and their serialized forms.

Four kinds exist.  ExactMatch requires the shared attribute to be present on
both sides and equal.  Range relates an anchor attribute to a recommendation
attribute with an inequality whose direction is bound during annotation.
Contain requires one side's attribute to carry a real value instead of the
missing placeholder.  Prompt matches through description semantics: it keeps
the filled template text, the predicted relation token, and its embedding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EXACT_MATCH = "exact_match"
RANGE = "range"
CONTAIN = "contain"
PROMPT = "prompt"

UNRESOLVED = "unresolved"


@dataclass
class Rule:
    id: str
    kind: str
    mu: float
    iteration: int
    # exact_match / contain / prompt
    attribute: str | None = None
    # range
    anchor_attribute: str | None = None
    rec_attribute: str | None = None
    direction: str = UNRESOLVED  # unresolved | le | ge
    # contain
    side: str | None = None  # anchor | rec
    # prompt
    token: str | None = None
    prompt_text: str | None = None
    embedding: list[float] | None = None

    def key(self) -> tuple:
        """Dedup identity: kind plus the attributes it touches.

        Prompt identity includes the relation token: rejecting one filled
        prompt should not block a later proposal whose prediction differs.
        """
        if self.kind == RANGE:
            return (RANGE, self.anchor_attribute, self.rec_attribute)
        if self.kind == CONTAIN:
            return (CONTAIN, self.attribute, self.side)
        if self.kind == PROMPT:
            return (PROMPT, self.attribute, self.token)
        return (self.kind, self.attribute)

    @property
    def embedding_array(self) -> np.ndarray | None:
        if self.embedding is None:
            return None
        return np.asarray(self.embedding, dtype=np.float64)

    def describe(self) -> str:
        if self.kind == EXACT_MATCH:
            return f"{self.attribute} (anchor) = {self.attribute} (rec)"
        if self.kind == RANGE:
            op = {"ge": ">=", "le": "<="}.get(self.direction, "?")
            return f"{self.anchor_attribute} (anchor) {op} {self.rec_attribute} (rec)"
        if self.kind == CONTAIN:
            return f"{self.attribute} present on {self.side or 'either'} side"
        return f"descriptions agree that {self.attribute} are [{self.token}]"

    def to_dict(self) -> dict:
        d = {"id": self.id, "kind": self.kind, "mu": self.mu, "iteration": self.iteration}
        if self.kind == RANGE:
            d.update(anchor_attribute=self.anchor_attribute,
                     rec_attribute=self.rec_attribute, direction=self.direction)
        elif self.kind == CONTAIN:
            d.update(attribute=self.attribute, side=self.side)
        elif self.kind == PROMPT:
            d.update(attribute=self.attribute, token=self.token,
                     prompt_text=self.prompt_text, embedding=self.embedding)
        else:
            d.update(attribute=self.attribute)
        return d

    @staticmethod
    def from_dict(d: dict) -> "Rule":
        return Rule(
            id=d["id"], kind=d["kind"], mu=float(d["mu"]), iteration=int(d["iteration"]),
            attribute=d.get("attribute"),
            anchor_attribute=d.get("anchor_attribute"),
            rec_attribute=d.get("rec_attribute"),
            direction=d.get("direction", UNRESOLVED),
            side=d.get("side"),
            token=d.get("token"),
            prompt_text=d.get("prompt_text"),
            embedding=d.get("embedding"),
        )


@dataclass
class CandidateRule:
    """A proposed rule awaiting annotation.

    Prototypes from tree induction arrive with unbound parameters (a Range
    direction stays unresolved until a human outputs the inequality sign);
    prompt candidates arrive fully bound.  ``feature_index`` remembers the
    encoding column whose importance triggered the proposal.
    """

    rule: Rule
    feature_index: int
    examples: list[dict] = field(default_factory=list)

    @property
    def id(self) -> str:
        return self.rule.id

    def to_dict(self) -> dict:
        return {"rule": self.rule.to_dict(), "feature_index": self.feature_index,
                "examples": self.examples}

    @staticmethod
    def from_dict(d: dict) -> "CandidateRule":
        return CandidateRule(rule=Rule.from_dict(d["rule"]),
                             feature_index=int(d["feature_index"]),
                             examples=list(d.get("examples", [])))
