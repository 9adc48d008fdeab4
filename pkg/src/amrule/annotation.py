"""Rule-level annotation sessions.

Each boosting iteration opens at most one session holding that iteration's
candidate rules plus context.  An annotator (human over HTTP, a decisions
file, or the scripted stand-in used for benchmarks) submits one verdict per
candidate: accept with parameters matching the candidate's prototype kind,
or abstain.  Finalizing binds the accepted rules' parameters and returns the
iteration rule set; abstained candidates land on the rejection ledger so the
next iterations surface novel rules instead.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .rules import CONTAIN, EXACT_MATCH, PROMPT, RANGE, CandidateRule, Rule

ABSTAIN = "abstain"
VERDICTS = (EXACT_MATCH, RANGE, CONTAIN, PROMPT, ABSTAIN)


class SessionConflictError(RuntimeError):
    """Another session is already open for this run."""


class DecisionValidationError(ValueError):
    """Verdict kind is incompatible with the candidate's prototype."""


class UnknownRuleError(KeyError):
    pass


class IncompleteSessionError(RuntimeError):
    """Finalize was called while candidates are still undecided."""


@dataclass
class AnnotationDecision:
    rule_id: str
    verdict: str                 # exact_match | range | contain | prompt | abstain
    params: dict = field(default_factory=dict)  # range: direction; contain: side
    annotator: str = "anonymous"
    timestamp: float = 0.0

    def to_dict(self) -> dict:
        return {"rule_id": self.rule_id, "verdict": self.verdict,
                "params": self.params, "annotator": self.annotator,
                "timestamp": self.timestamp}

    @staticmethod
    def from_dict(d: dict) -> "AnnotationDecision":
        return AnnotationDecision(
            rule_id=d["rule_id"], verdict=d["verdict"],
            params=dict(d.get("params", {})),
            annotator=d.get("annotator", "anonymous"),
            timestamp=float(d.get("timestamp", 0.0)))


@dataclass
class AnnotationSession:
    iteration: int
    candidates: list[CandidateRule]
    budget: int
    decisions: dict[str, AnnotationDecision] = field(default_factory=dict)
    state: str = "open"  # open | finalized
    _accepted: list[Rule] | None = None

    @property
    def pending(self) -> list[str]:
        return [c.id for c in self.candidates if c.id not in self.decisions]

    def candidate(self, rule_id: str) -> CandidateRule:
        for c in self.candidates:
            if c.id == rule_id:
                return c
        raise UnknownRuleError(rule_id)

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "budget": self.budget,
            "state": self.state,
            "candidates": [c.to_dict() for c in self.candidates],
            "decisions": {rid: d.to_dict() for rid, d in sorted(self.decisions.items())},
        }

    @staticmethod
    def from_dict(d: dict) -> "AnnotationSession":
        sess = AnnotationSession(
            iteration=int(d["iteration"]),
            candidates=[CandidateRule.from_dict(c) for c in d["candidates"]],
            budget=int(d["budget"]),
            state=d.get("state", "open"))
        sess.decisions = {rid: AnnotationDecision.from_dict(dd)
                          for rid, dd in d.get("decisions", {}).items()}
        return sess


def validate_decision(candidate: CandidateRule, decision: AnnotationDecision) -> None:
    if decision.verdict not in VERDICTS:
        raise DecisionValidationError(f"unknown verdict {decision.verdict!r}")
    if decision.verdict == ABSTAIN:
        return
    if decision.verdict != candidate.rule.kind:
        raise DecisionValidationError(
            f"verdict {decision.verdict!r} is invalid on a "
            f"{candidate.rule.kind!r} candidate {candidate.id}")
    if decision.verdict == RANGE:
        if decision.params.get("direction") not in ("le", "ge"):
            raise DecisionValidationError(
                "a range verdict must carry direction 'le' or 'ge'")
    if decision.verdict == CONTAIN:
        side = decision.params.get("side", candidate.rule.side)
        if side not in ("anchor", "rec"):
            raise DecisionValidationError(
                "a contain verdict must carry side 'anchor' or 'rec'")


def bind_rule(candidate: CandidateRule, decision: AnnotationDecision) -> Rule:
    """Apply the verdict's parameters to the candidate's rule prototype."""
    rule = Rule.from_dict(candidate.rule.to_dict())
    if decision.verdict == RANGE:
        rule.direction = decision.params["direction"]
    elif decision.verdict == CONTAIN:
        rule.side = decision.params.get("side", rule.side)
    return rule


class SessionManager:
    """Serialized access to the single open session; persists every mutation.

    ``path_factory`` maps an iteration number to the session snapshot path;
    when omitted, sessions are kept in memory only.
    """

    def __init__(self, path_factory=None):
        self.path_factory = path_factory
        self.current: AnnotationSession | None = None
        self._lock = threading.Lock()

    def open_session(self, iteration: int, candidates: Sequence[CandidateRule],
                     budget: int) -> AnnotationSession:
        with self._lock:
            if self.current is not None and self.current.state == "open":
                raise SessionConflictError(
                    f"session for iteration {self.current.iteration} is still open")
            if len(candidates) > budget:
                raise ValueError(
                    f"{len(candidates)} candidates exceed the budget b={budget}")
            session = AnnotationSession(iteration=iteration,
                                        candidates=list(candidates), budget=budget)
            if not candidates:
                session.state = "finalized"
                session._accepted = []
            self.current = session
            self._persist()
            return session

    def submit_decision(self, decision: AnnotationDecision) -> AnnotationSession:
        with self._lock:
            session = self._require_open()
            candidate = session.candidate(decision.rule_id)
            previous = session.decisions.get(decision.rule_id)
            if previous is not None:
                if (previous.verdict, previous.params) == (decision.verdict, decision.params):
                    return session  # idempotent resubmission
                raise DecisionValidationError(
                    f"rule {decision.rule_id} already decided as {previous.verdict!r}")
            validate_decision(candidate, decision)
            if decision.timestamp == 0.0:
                decision.timestamp = time.time()
            session.decisions[decision.rule_id] = decision
            self._persist()
            return session

    def finalize(self) -> list[Rule]:
        with self._lock:
            session = self.current
            if session is None:
                raise SessionConflictError("no session to finalize")
            if session.state == "finalized":
                return list(session._accepted or [])
            if session.pending:
                raise IncompleteSessionError(
                    f"{len(session.pending)} candidates undecided: {session.pending}")
            accepted = []
            for cand in session.candidates:
                decision = session.decisions[cand.id]
                if decision.verdict != ABSTAIN:
                    accepted.append(bind_rule(cand, decision))
            session.state = "finalized"
            session._accepted = accepted
            self._persist()
            return list(accepted)

    def rejected_ids(self) -> list[str]:
        if self.current is None:
            return []
        return [rid for rid, d in self.current.decisions.items() if d.verdict == ABSTAIN]

    def _require_open(self) -> AnnotationSession:
        if self.current is None or self.current.state != "open":
            raise SessionConflictError("no open session")
        return self.current

    def _persist(self) -> None:
        if self.path_factory is None or self.current is None:
            return
        path = Path(self.path_factory(self.current.iteration))
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(self.current.to_dict(), fh, indent=2, sort_keys=True)
        tmp.replace(path)


# ---------------------------------------------------------------------------
# Annotators
# ---------------------------------------------------------------------------

class ScriptedAnnotator:
    """Benchmark stand-in for a domain expert.

    Accepts a candidate exactly when it matches a planted ground-truth rule
    (same kind over the same attributes), binding the true direction or side;
    abstains on everything else.
    """

    name = "scripted"

    def __init__(self, truth_rules: Sequence[dict]):
        self.truth = list(truth_rules)

    @staticmethod
    def from_file(path: str | Path) -> "ScriptedAnnotator":
        with open(path, encoding="utf-8") as fh:
            return ScriptedAnnotator(json.load(fh))

    def _match(self, rule: Rule) -> dict | None:
        for t in self.truth:
            if t["kind"] != rule.kind:
                continue
            if rule.kind == RANGE:
                if (t["anchor_attribute"] == rule.anchor_attribute
                        and t["rec_attribute"] == rule.rec_attribute):
                    return t
            elif t.get("attribute") == rule.attribute:
                # a prompt rule filled with the wrong relation word is junk
                # even when it names the right attribute
                if rule.kind == PROMPT and t.get("token") not in (None, rule.token):
                    continue
                return t
        return None

    def decide(self, candidate: CandidateRule) -> AnnotationDecision:
        truth = self._match(candidate.rule)
        if truth is None:
            return AnnotationDecision(candidate.id, ABSTAIN, annotator=self.name)
        params: dict = {}
        if candidate.rule.kind == RANGE:
            params["direction"] = truth["direction"]
        elif candidate.rule.kind == CONTAIN:
            params["side"] = truth.get("side", candidate.rule.side)
        return AnnotationDecision(candidate.id, candidate.rule.kind,
                                  params=params, annotator=self.name)


class DecisionsFileAnnotator:
    """Headless replay: decisions come from a JSON-lines file keyed by rule id."""

    name = "decisions-file"

    def __init__(self, path: str | Path):
        self.by_rule: dict[str, AnnotationDecision] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                d = AnnotationDecision.from_dict(json.loads(line))
                self.by_rule[d.rule_id] = d

    def decide(self, candidate: CandidateRule) -> AnnotationDecision:
        decision = self.by_rule.get(candidate.id)
        if decision is None:
            raise UnknownRuleError(
                f"decisions file has no verdict for rule {candidate.id}")
        return decision


def append_decision_log(path: str | Path, decision: AnnotationDecision) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps({"rule_id": decision.rule_id,
                             "verdict": decision.verdict,
                             "params": decision.params}, sort_keys=True) + "\n")
