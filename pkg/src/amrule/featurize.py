"""Pairwise feature encoding with per-column provenance.

A product pair encodes to one flat vector laid out as three blocks: the
anchor's attributes, the recommendation's attributes, and one difference
column per shared attribute (numerical difference, or an inequality
indicator for categoricals).  Missing values encode as 0 with mask=False so
rule matching and tree induction can distinguish placeholders from data.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .catalog import CATEGORICAL, NUMERICAL, AttributeSchema, Product

ANCHOR = "anchor"
REC = "rec"
SHARED_DIFF = "shared_diff"


class KindConflictWarning(UserWarning):
    """Same attribute name with conflicting kinds across the two schemas."""


@dataclass(frozen=True)
class FeatureDescriptor:
    index: int
    attribute: str
    provenance: str  # ANCHOR | REC | SHARED_DIFF
    kind: str        # categorical | numerical

    def to_dict(self) -> dict:
        return {"index": self.index, "attribute": self.attribute,
                "provenance": self.provenance, "kind": self.kind}


@dataclass
class PairEncoding:
    values: np.ndarray   # float64
    mask: np.ndarray     # bool, True = value present
    descriptors: list[FeatureDescriptor]

    def __post_init__(self):
        assert len(self.values) == len(self.mask) == len(self.descriptors)


def shared_attributes(schema_a: AttributeSchema, schema_b: AttributeSchema) -> list[str]:
    """Attribute names common to both schemas with consistent kinds.

    Order follows schema_a.  A name whose kinds conflict is excluded and
    reported through a KindConflictWarning.
    """
    kinds_b = dict(schema_b.columns)
    shared = []
    for name, kind in schema_a.columns:
        if name not in kinds_b:
            continue
        if kinds_b[name] != kind:
            warnings.warn(
                f"attribute {name!r} has kind {kind} vs {kinds_b[name]}; excluded",
                KindConflictWarning, stacklevel=2)
            continue
        shared.append(name)
    return shared


class PairFeaturizer:
    """Fixed encoding layout for one (anchor schema, rec schema) pairing.

    Categorical values map to frequency-rank integer codes fitted on the
    weakly labeled dataset: 0 is the missing placeholder, 1 the most frequent
    value, and unseen values share the code one past the largest fitted rank.
    Numerical columns stay raw; standardization for the neural model is a
    separate transform (Standardizer).
    """

    def __init__(self, schema_a: AttributeSchema, schema_b: AttributeSchema):
        self.schema_a = schema_a
        self.schema_b = schema_b
        self.shared = shared_attributes(schema_a, schema_b)
        self.descriptors: list[FeatureDescriptor] = []
        idx = 0
        for name, kind in schema_a.columns:
            self.descriptors.append(FeatureDescriptor(idx, name, ANCHOR, kind))
            idx += 1
        for name, kind in schema_b.columns:
            self.descriptors.append(FeatureDescriptor(idx, name, REC, kind))
            idx += 1
        kinds_a = dict(schema_a.columns)
        for name in self.shared:
            self.descriptors.append(FeatureDescriptor(idx, name, SHARED_DIFF, kinds_a[name]))
            idx += 1
        self._by_key = {(d.provenance, d.attribute): d for d in self.descriptors}
        # (side, attr) -> {value: rank}; empty until fit_categories
        self._codes: dict[tuple[str, str], dict[str, int]] = {}

    @property
    def dim(self) -> int:
        return len(self.descriptors)

    def descriptor(self, provenance: str, attribute: str) -> FeatureDescriptor | None:
        return self._by_key.get((provenance, attribute))

    def fit_categories(self, pairs: Sequence[tuple[Product, Product]]) -> "PairFeaturizer":
        """Fit frequency-rank codes for categorical columns on labeled pairs."""
        counts: dict[tuple[str, str], dict[str, int]] = {}
        sides = ((ANCHOR, self.schema_a), (REC, self.schema_b))
        for anchor, rec in pairs:
            for (side, schema), product in zip(sides, (anchor, rec)):
                for name, kind in schema.columns:
                    if kind != CATEGORICAL:
                        continue
                    raw = product.attr(name)
                    if raw is None:
                        continue
                    bucket = counts.setdefault((side, name), {})
                    key = str(raw)
                    bucket[key] = bucket.get(key, 0) + 1
        self._codes = {}
        for key, bucket in counts.items():
            ordered = sorted(bucket.items(), key=lambda kv: (-kv[1], kv[0]))
            self._codes[key] = {value: rank for rank, (value, _) in enumerate(ordered, start=1)}
        return self

    def _code(self, side: str, name: str, raw) -> float:
        table = self._codes.get((side, name), {})
        code = table.get(str(raw))
        if code is None:
            code = len(table) + 1  # unseen value
        return float(code)

    def encode(self, anchor: Product, rec: Product) -> PairEncoding:
        values = np.zeros(self.dim, dtype=np.float64)
        mask = np.zeros(self.dim, dtype=bool)
        idx = 0
        for name, kind in self.schema_a.columns:
            raw = anchor.attr(name)
            if raw is not None:
                values[idx] = float(raw) if kind == NUMERICAL else self._code(ANCHOR, name, raw)
                mask[idx] = True
            idx += 1
        for name, kind in self.schema_b.columns:
            raw = rec.attr(name)
            if raw is not None:
                values[idx] = float(raw) if kind == NUMERICAL else self._code(REC, name, raw)
                mask[idx] = True
            idx += 1
        kinds_a = dict(self.schema_a.columns)
        for name in self.shared:
            ra, rb = anchor.attr(name), rec.attr(name)
            if ra is not None and rb is not None:
                if kinds_a[name] == NUMERICAL:
                    values[idx] = float(ra) - float(rb)
                else:
                    values[idx] = 0.0 if str(ra) == str(rb) else 1.0
                mask[idx] = True
            idx += 1
        return PairEncoding(values, mask, self.descriptors)

    # --- persistence -----------------------------------------------------

    def to_dict(self) -> dict:
        cats = {}
        for (side, name), table in sorted(self._codes.items()):
            ordered = sorted(table.items(), key=lambda kv: kv[1])
            cats.setdefault(side, {})[name] = [v for v, _ in ordered]
        return {"descriptors": [d.to_dict() for d in self.descriptors],
                "categories": cats}

    def load_categories(self, payload: dict) -> None:
        self._codes = {}
        for side, tables in payload.get("categories", {}).items():
            for name, ordered in tables.items():
                self._codes[(side, name)] = {v: r for r, v in enumerate(ordered, start=1)}


def encode_pair(anchor: Product, rec: Product, featurizer: PairFeaturizer) -> PairEncoding:
    return featurizer.encode(anchor, rec)


def save_encoding(featurizer: PairFeaturizer, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(featurizer.to_dict(), fh, indent=2, sort_keys=True)


class Standardizer:
    """Mean-0 / variance-1 scaling of numerical columns, fitted once on D_l."""

    def __init__(self, mean: np.ndarray | None = None, scale: np.ndarray | None = None):
        self.mean = mean
        self.scale = scale

    def fit(self, matrix: np.ndarray, descriptors: Sequence[FeatureDescriptor]) -> "Standardizer":
        numeric = np.array([d.kind == NUMERICAL for d in descriptors], dtype=bool)
        mean = matrix.mean(axis=0)
        std = matrix.std(axis=0)
        std[std == 0.0] = 1.0
        self.mean = np.where(numeric, mean, 0.0)
        self.scale = np.where(numeric, std, 1.0)
        return self

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        if self.mean is None:
            return matrix
        return (matrix - self.mean) / self.scale

    def to_dict(self) -> dict:
        if self.mean is None:
            return {}
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @staticmethod
    def from_dict(d: dict) -> "Standardizer":
        if not d:
            return Standardizer()
        return Standardizer(np.asarray(d["mean"], dtype=np.float64),
                            np.asarray(d["scale"], dtype=np.float64))
