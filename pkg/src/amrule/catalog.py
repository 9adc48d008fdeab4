"""Product catalogs, co-purchase logs, weak-label curation, and splits.

A catalog is a set of products from one category, each carrying a structured
attribute map and a free-text description.  Co-purchase counts between an
anchor catalog and a recommendation catalog are the weak supervision source:
frequently co-purchased pairs become weak positives, and random cross-catalog
pairs absent from the log become negatives.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CATEGORICAL = "categorical"
NUMERICAL = "numerical"


class IngestionError(ValueError):
    """Raised when input files violate catalog invariants."""


class EmptyPositiveError(ValueError):
    """Raised when no co-purchase pair clears the positive threshold."""


class SplitError(ValueError):
    """Raised when a dataset cannot be split as requested."""


@dataclass(frozen=True)
class AttributeValue:
    """A single attribute cell: categorical, numerical, or missing."""

    kind: str  # CATEGORICAL | NUMERICAL | "missing"
    value: str | float | None = None

    @staticmethod
    def classify(raw) -> "AttributeValue":
        if raw is None:
            return AttributeValue("missing", None)
        if isinstance(raw, bool):
            return AttributeValue(CATEGORICAL, str(raw))
        if isinstance(raw, (int, float)):
            v = float(raw)
            if not np.isfinite(v):
                raise IngestionError(f"non-finite numerical attribute value: {raw!r}")
            return AttributeValue(NUMERICAL, v)
        return AttributeValue(CATEGORICAL, str(raw))

    @property
    def missing(self) -> bool:
        return self.kind == "missing"


@dataclass
class Product:
    id: str
    category: str
    name: str
    attributes: dict[str, str | float | None]
    description: str = ""

    def attr(self, name: str):
        return self.attributes.get(name)


@dataclass
class AttributeSchema:
    """Stable column layout for one category, with per-attribute missing rates."""

    category: str
    columns: list[tuple[str, str]]  # (attribute name, kind), stable order
    sparsity: dict[str, float] = field(default_factory=dict)

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.columns]

    def kind_of(self, name: str) -> str | None:
        for n, k in self.columns:
            if n == name:
                return k
        return None


@dataclass
class Catalog:
    category: str
    products: list[Product]
    schema: AttributeSchema

    def __post_init__(self):
        self.by_id = {p.id: p for p in self.products}

    def __len__(self):
        return len(self.products)

    def get(self, pid: str) -> Product:
        return self.by_id[pid]


@dataclass(frozen=True)
class CoPurchaseRecord:
    anchor_id: str
    rec_id: str
    count: int


@dataclass
class LabeledPair:
    anchor_id: str
    rec_id: str
    label: int  # +1 | -1
    weak: bool = True
    source: str = "copurchase"  # copurchase | rule | synthetic
    count: int | None = None  # co-purchase count, when sourced from the log
    iteration: int | None = None  # boosting iteration that minted a rule pair

    def __post_init__(self):
        if self.label not in (1, -1):
            raise ValueError(f"label must be +1 or -1, got {self.label}")

    @property
    def pair_id(self) -> str:
        return f"{self.anchor_id}|{self.rec_id}"

    def to_dict(self) -> dict:
        return {
            "anchor_id": self.anchor_id,
            "rec_id": self.rec_id,
            "label": self.label,
            "weak": self.weak,
            "source": self.source,
            "count": self.count,
            "iteration": self.iteration,
        }

    @staticmethod
    def from_dict(d: dict) -> "LabeledPair":
        return LabeledPair(
            anchor_id=d["anchor_id"],
            rec_id=d["rec_id"],
            label=int(d["label"]),
            weak=bool(d.get("weak", True)),
            source=d.get("source", "copurchase"),
            count=d.get("count"),
            iteration=d.get("iteration"),
        )


@dataclass
class DatasetSplit:
    train: list[str]
    validation: list[str]
    test: list[str]
    holdout_unlabeled: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "train": list(self.train),
            "validation": list(self.validation),
            "test": list(self.test),
            "holdout_unlabeled": list(self.holdout_unlabeled),
        }


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

def infer_schema(products: Sequence[Product], category: str) -> AttributeSchema:
    """Derive the column layout and missing rates from a product list.

    Column order is first-seen order across the catalog file; the order is
    frozen afterwards because featurization depends on it.  An attribute is
    numerical when every present value is a number.
    """
    order: list[str] = []
    numeric_ok: dict[str, bool] = {}
    present: dict[str, int] = {}
    for p in products:
        for name, raw in p.attributes.items():
            if name not in numeric_ok:
                order.append(name)
                numeric_ok[name] = True
                present[name] = 0
            av = AttributeValue.classify(raw)
            if not av.missing:
                present[name] += 1
                if av.kind != NUMERICAL:
                    numeric_ok[name] = False
    n = max(len(products), 1)
    columns = [(name, NUMERICAL if (numeric_ok[name] and present[name] > 0) else CATEGORICAL)
               for name in order]
    sparsity = {name: 1.0 - present[name] / n for name in order}
    return AttributeSchema(category=category, columns=columns, sparsity=sparsity)


def load_catalog(path: str | Path) -> Catalog:
    """Read a JSON-lines catalog file (one product object per line)."""
    products: list[Product] = []
    seen: set[str] = set()
    category = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestionError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
            pid = str(obj["id"])
            if pid in seen:
                raise IngestionError(f"{path}:{lineno}: duplicate product id {pid!r}")
            seen.add(pid)
            if category is None:
                category = obj.get("category", "")
            desc = obj.get("description")
            products.append(Product(
                id=pid,
                category=obj.get("category", ""),
                name=obj.get("name", pid),
                attributes=dict(obj.get("attributes", {})),
                description="" if desc is None else str(desc),
            ))
    if not products:
        raise IngestionError(f"{path}: empty catalog")
    return Catalog(category=category or "", products=products,
                   schema=infer_schema(products, category or ""))


def save_catalog(catalog: Catalog, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in catalog.products:
            fh.write(json.dumps({
                "id": p.id,
                "category": p.category,
                "name": p.name,
                "attributes": p.attributes,
                "description": p.description,
            }, sort_keys=True) + "\n")


def load_copurchase(path: str | Path) -> list[CoPurchaseRecord]:
    """Read the co-purchase CSV (header: anchor_id,rec_id,count)."""
    records: list[CoPurchaseRecord] = []
    seen: set[tuple[str, str]] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = {"anchor_id", "rec_id", "count"}
        if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
            raise IngestionError(f"{path}: expected header anchor_id,rec_id,count")
        for row in reader:
            key = (row["anchor_id"], row["rec_id"])
            if key in seen:
                raise IngestionError(f"{path}: duplicate co-purchase pair {key}")
            seen.add(key)
            count = int(row["count"])
            if count < 1:
                raise IngestionError(f"{path}: count must be >= 1 for pair {key}")
            records.append(CoPurchaseRecord(key[0], key[1], count))
    return records


def save_copurchase(records: Iterable[CoPurchaseRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["anchor_id", "rec_id", "count"])
        for r in records:
            writer.writerow([r.anchor_id, r.rec_id, r.count])


# ---------------------------------------------------------------------------
# Weak dataset curation
# ---------------------------------------------------------------------------

def build_weak_dataset(
    catalog_a: Catalog,
    catalog_b: Catalog,
    copurchase: Sequence[CoPurchaseRecord],
    min_count: int = 3,
    neg_ratio: float = 1.0,
    seed: int = 0,
) -> list[LabeledPair]:
    """Curate weak positives and sampled negatives from the co-purchase log.

    Positives are pairs co-purchased at least ``min_count`` times.  Negatives
    are uniform anchor x recommendation samples excluding anything present in
    the log (at any count), so a sampled negative can never be a known
    co-purchase.  Deterministic for a fixed seed.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    if not catalog_a.products or not catalog_b.products:
        raise IngestionError("both catalogs must be non-empty")
    overlap = set(catalog_a.by_id) & set(catalog_b.by_id)
    if overlap:
        raise IngestionError(f"catalogs share product ids: {sorted(overlap)[:5]}")

    log_pairs = {(r.anchor_id, r.rec_id) for r in copurchase}
    positives = [
        LabeledPair(r.anchor_id, r.rec_id, +1, source="copurchase", count=r.count)
        for r in copurchase if r.count >= min_count
    ]
    if not positives:
        raise EmptyPositiveError(
            f"no co-purchase pair reaches min_count={min_count}")

    n_neg = int(round(neg_ratio * len(positives)))
    rng = np.random.default_rng(seed)
    a_ids = [p.id for p in catalog_a.products]
    b_ids = [p.id for p in catalog_b.products]
    negatives: list[LabeledPair] = []
    chosen: set[tuple[str, str]] = set()
    attempts = 0
    max_attempts = max(1000, 200 * n_neg)
    while len(negatives) < n_neg:
        attempts += 1
        if attempts > max_attempts:
            raise IngestionError(
                "could not sample enough negatives outside the co-purchase log")
        a = a_ids[int(rng.integers(len(a_ids)))]
        b = b_ids[int(rng.integers(len(b_ids)))]
        key = (a, b)
        if key in log_pairs or key in chosen:
            continue
        chosen.add(key)
        negatives.append(LabeledPair(a, b, -1, source="copurchase"))
    return positives + negatives


def split_dataset(
    pairs: Sequence[LabeledPair],
    ratios: tuple[float, float, float],
    seed: int,
    min_count_test: int | None = None,
) -> DatasetSplit:
    """Stratified train/validation/test split at the given ratios.

    When ``min_count_test`` is set, only positives whose co-purchase count
    reaches it are eligible for the test partition, which gives the test set
    a higher-quality weak signal than the training set.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f"ratios must sum to 1, got {ratios}")
    if len(pairs) < 10:
        raise SplitError(f"need at least 10 pairs to stratify, got {len(pairs)}")
    by_label: dict[int, list[LabeledPair]] = {+1: [], -1: []}
    for p in pairs:
        by_label[p.label].append(p)
    if not by_label[+1] or not by_label[-1]:
        raise SplitError("both labels must be present to stratify")

    rng = np.random.default_rng(seed)
    out = {"train": [], "validation": [], "test": []}
    for label in (+1, -1):
        group = by_label[label]
        counts = _allocate(len(group), ratios)
        ids = [p.pair_id for p in group]
        order = rng.permutation(len(ids))
        shuffled = [ids[i] for i in order]
        n_test = counts[2]
        if label == +1 and min_count_test is not None:
            eligible = {p.pair_id for p in group
                        if p.count is not None and p.count >= min_count_test}
            if len(eligible) < n_test:
                raise SplitError(
                    f"only {len(eligible)} positives reach min_count_test="
                    f"{min_count_test}, need {n_test} for the test split")
            test_ids = [i for i in shuffled if i in eligible][:n_test]
            rest = [i for i in shuffled if i not in set(test_ids)]
        else:
            test_ids = shuffled[:n_test]
            rest = shuffled[n_test:]
        out["train"].extend(rest[:counts[0]])
        out["validation"].extend(rest[counts[0]:counts[0] + counts[1]])
        out["test"].extend(test_ids)
    # shuffle each partition so positional order carries no label blocks:
    # downstream weight tie-breaks select by position and must not see a
    # label-sorted prefix
    for ids in out.values():
        order = rng.permutation(len(ids))
        ids[:] = [ids[i] for i in order]
    return DatasetSplit(train=out["train"], validation=out["validation"],
                        test=out["test"])


def _allocate(n: int, ratios: Sequence[float]) -> list[int]:
    """Largest-remainder allocation of n items over the ratio buckets."""
    raw = [r * n for r in ratios]
    base = [int(x) for x in raw]
    short = n - sum(base)
    remainders = sorted(range(len(raw)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in remainders[:short]:
        base[i] += 1
    return base


def save_pairs(pairs: Iterable[LabeledPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(json.dumps(p.to_dict(), sort_keys=True) + "\n")


def load_pairs(path: str | Path) -> list[LabeledPair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                pairs.append(LabeledPair.from_dict(json.loads(line)))
    return pairs


def load_unlabeled(path: str | Path) -> list[tuple[str, str]]:
    """Read the unlabeled-pair CSV (header: anchor_id,rec_id)."""
    out: list[tuple[str, str]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"anchor_id", "rec_id"}.issubset(reader.fieldnames):
            raise IngestionError(f"{path}: expected header anchor_id,rec_id")
        for row in reader:
            out.append((row["anchor_id"], row["rec_id"]))
    return out


def save_unlabeled(pairs: Iterable[tuple[str, str]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["anchor_id", "rec_id"])
        for a, b in pairs:
            writer.writerow([a, b])
