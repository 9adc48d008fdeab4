"""Fallback rules for sparse attributes via masked-prompt description queries.

A product pair's descriptions are templated into a single masked sentence
("... because their <attr> are [MASK]."), a language-model client fills the
mask, and the filled text plus its embedding become a Prompt rule that later
matches unlabeled pairs by embedding cosine.  A deterministic in-process
stub client implements the same fill-mask/embed protocol as the HTTP client
so the whole path runs offline.
"""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass

import numpy as np

from .catalog import Product
from .rules import PROMPT, CandidateRule, Rule

MASK = "[MASK]"
POSITIVE = "compatible"
NEGATIVE = "not-compatible"

DEFAULT_TEMPLATE = ("{name_a}: {desc_a} {name_b}: {desc_b} "
                    "The {name_a_low} is {polarity} with the {name_b_low} "
                    "because their {attr} are " + MASK + ".")


class PromptUnavailableError(ValueError):
    """The pair cannot be templated (e.g. an empty description)."""


class ProtocolError(RuntimeError):
    """The client returned a malformed mask distribution or embedding."""


class TransportError(RuntimeError):
    def __init__(self, message: str, retries: int):
        super().__init__(f"{message} (after {retries} retries)")
        self.retries = retries


@dataclass
class PromptTemplate:
    text: str = DEFAULT_TEMPLATE

    def render(self, name_a: str, desc_a: str, name_b: str, desc_b: str,
               attr: str, polarity: str) -> str:
        word = "compatible" if polarity == POSITIVE else "not compatible"
        prompt = self.text.format(
            name_a=name_a, desc_a=desc_a, name_b=name_b, desc_b=desc_b,
            name_a_low=name_a.lower(), name_b_low=name_b.lower(),
            attr=attr, polarity=word)
        if prompt.count(MASK) != 1:
            raise PromptUnavailableError("template must contain exactly one mask slot")
        return prompt


def _ensure_period(text: str) -> str:
    text = text.strip()
    return text if text.endswith(".") else text + "."


def truncate_description(text: str, limit: int) -> str:
    """Cut to the last sentence boundary that fits under the limit."""
    if len(text) <= limit:
        return text
    head = text[:limit]
    stop = head.rfind(".")
    return head[:stop + 1] if stop > 0 else head


def build_prompt(anchor: Product, rec: Product, attr: str,
                 polarity: str = POSITIVE, client=None,
                 template: PromptTemplate | None = None) -> str:
    """Fill the rule template for one pair; polarity comes from its weak label."""
    if not anchor.description.strip() or not rec.description.strip():
        raise PromptUnavailableError(
            f"pair ({anchor.id}, {rec.id}) has an empty description")
    desc_a, desc_b = anchor.description, rec.description
    limit = getattr(client, "max_prompt_chars", None)
    if limit:
        desc_a = truncate_description(desc_a, limit)
        desc_b = truncate_description(desc_b, limit)
    tpl = template or PromptTemplate()
    return tpl.render(anchor.name, _ensure_period(desc_a),
                      rec.name, _ensure_period(desc_b), attr, polarity)


def predict_mask(client, prompt: str) -> tuple[str, float]:
    """Highest-probability mask token; ties break toward the lowest token id."""
    if prompt.count(MASK) != 1:
        raise PromptUnavailableError("prompt must contain exactly one mask slot")
    tokens, probs = client.fill_mask(prompt)
    probs = np.asarray(probs, dtype=np.float64)
    if len(tokens) != len(probs) or len(tokens) == 0:
        raise ProtocolError("token and probability lists must align")
    if np.any(probs < 0) or abs(float(probs.sum()) - 1.0) > 1e-6:
        raise ProtocolError(f"mask distribution must sum to 1, got {probs.sum():.6f}")
    best = int(np.argmax(probs))
    return str(tokens[best]), float(probs[best])


def fill_template(prompt: str, token: str) -> str:
    return prompt.replace(MASK, token)


def propose_prompt_rule(client, anchor: Product, rec: Product, attr: str,
                        mu: float, polarity: str, iteration: int,
                        rule_id: str) -> CandidateRule:
    """Complete a prompt placeholder into a bound candidate rule."""
    prompt = build_prompt(anchor, rec, attr, polarity, client=client)
    token, _ = predict_mask(client, prompt)
    text = fill_template(prompt, token)
    embedding = np.asarray(client.embed(text), dtype=np.float64)
    rule = Rule(id=rule_id, kind=PROMPT, mu=mu, iteration=iteration,
                attribute=attr, token=token, prompt_text=text,
                embedding=[float(v) for v in embedding])
    return CandidateRule(rule=rule, feature_index=-1)


def embed_pair_prompt(client, anchor: Product, rec: Product, attr: str) -> np.ndarray:
    """Embed an unlabeled pair's filled prompt (polarity fixed to compatible)."""
    prompt = build_prompt(anchor, rec, attr, POSITIVE, client=client)
    token, _ = predict_mask(client, prompt)
    return np.asarray(client.embed(fill_template(prompt, token)), dtype=np.float64)


# ---------------------------------------------------------------------------
# Clients
# ---------------------------------------------------------------------------

def _words(text: str) -> list[str]:
    return re.findall(r"[a-z0-9]+(?:[.'/-][a-z0-9]+)*", text.lower())


class StubLMClient:
    """Deterministic offline client implementing the fill-mask/embed protocol.

    The mask distribution puts 0.9 on "same" when the value tokens found next
    to the queried attribute name agree across the two descriptions, else 0.9
    on "different" (remainder uniform); an unparseable prompt yields the
    uniform distribution.  Embeddings are 64-dimensional hashed bag-of-words
    with L2 normalization, so identical texts embed identically.
    """

    VOCAB = ("same", "different", "related", "unknown")

    def __init__(self, embedding_dim: int = 64, max_prompt_chars: int = 4096):
        self.embedding_dim = embedding_dim
        self.max_prompt_chars = max_prompt_chars

    def fill_mask(self, prompt: str) -> tuple[list[str], list[float]]:
        parsed = self._parse(prompt)
        if parsed is None:
            p = 1.0 / len(self.VOCAB)
            return list(self.VOCAB), [p] * len(self.VOCAB)
        attr, desc_a, desc_b = parsed
        va = self._adjacent_value(attr, desc_a)
        vb = self._adjacent_value(attr, desc_b)
        winner = "same" if (va is not None and va == vb) else "different"
        rest = 0.1 / (len(self.VOCAB) - 1)
        probs = [0.9 if tok == winner else rest for tok in self.VOCAB]
        return list(self.VOCAB), probs

    def embed(self, text: str) -> list[float]:
        vec = np.zeros(self.embedding_dim, dtype=np.float64)
        for tok in _words(text):
            vec[zlib.crc32(tok.encode()) % self.embedding_dim] += 1.0
        norm = float(np.linalg.norm(vec))
        if norm > 0:
            vec /= norm
        return [float(v) for v in vec]

    def _parse(self, prompt: str):
        tail = re.search(
            r"\. The (.+?) is (?:not )?compatible with the (.+?) "
            r"because their (.+?) are \[MASK\]\.$", prompt, re.DOTALL)
        if tail is None:
            return None
        name_b, attr = tail.group(2), tail.group(3)
        head = prompt[:tail.start() + 1]
        first = head.find(": ")
        if first < 0:
            return None
        rest = head[first + 2:]
        boundary = re.search(rf"\.\s+{re.escape(name_b)}:\s+", rest, re.IGNORECASE)
        if boundary is None:
            return None
        desc_a = rest[:boundary.start() + 1]
        desc_b = rest[boundary.end():]
        return attr, desc_a, desc_b

    def _adjacent_value(self, attr: str, description: str) -> str | None:
        desc_tokens = _words(description)
        for a in _words(attr):
            stems = {a, a.rstrip("s")}
            for i, tok in enumerate(desc_tokens[:-1]):
                if tok in stems or tok.rstrip("s") in stems:
                    return desc_tokens[i + 1]
        return None


class HttpLMClient:
    """Wire-protocol client: POST /v1/fill_mask and POST /v1/embed."""

    def __init__(self, base_url: str, retries: int = 2, timeout: float = 30.0,
                 max_prompt_chars: int = 4096, transport=None):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.retries = retries
        self.max_prompt_chars = max_prompt_chars
        self.embedding_dim: int | None = None
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def _post(self, path: str, payload: dict) -> dict:
        import httpx

        last = None
        for _ in range(self.retries + 1):
            try:
                resp = self._client.post(self.base_url + path, json=payload)
                resp.raise_for_status()
                return resp.json()
            except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                last = exc
        raise TransportError(f"{path}: {last}", self.retries)

    def fill_mask(self, prompt: str) -> tuple[list[str], list[float]]:
        data = self._post("/v1/fill_mask", {"prompt": prompt})
        if "tokens" not in data or "probs" not in data:
            raise ProtocolError("fill_mask response missing tokens/probs")
        return list(data["tokens"]), [float(p) for p in data["probs"]]

    def embed(self, text: str) -> list[float]:
        data = self._post("/v1/embed", {"text": text})
        if "vector" not in data:
            raise ProtocolError("embed response missing vector")
        vec = [float(v) for v in data["vector"]]
        if self.embedding_dim is None:
            self.embedding_dim = len(vec)
        elif len(vec) != self.embedding_dim:
            raise ProtocolError(
                f"embedding dimension changed: {len(vec)} != {self.embedding_dim}")
        return vec
