"""Synthetic planted-rule benchmark generator.

Builds two product catalogs whose true compatibility is the conjunction of a
small set of planted rules, a co-purchase log whose high counts follow true
compatibility up to a configurable noise rate, and an unlabeled holdout pool
that mixes truly-compatible pairs, single-rule near misses, and random cross
pairs.  The planted rules are emitted alongside the data so a scripted
annotator can stand in for a domain expert and so rule recovery can be
measured.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .catalog import (
    AttributeSchema,
    Catalog,
    CoPurchaseRecord,
    Product,
    infer_schema,
    save_catalog,
    save_copurchase,
    save_unlabeled,
)


class SynthConfigError(ValueError):
    """Raised when the synthetic config is inconsistent."""


POWER_LEVELS = ["lithium-ion", "nicd", "nimh", "corded"]
POWER_WEIGHTS = [0.45, 0.25, 0.2, 0.1]
CONNECTOR_LEVELS = ["c1", "c2", "c3", "c4", "c5", "c6"]
COLOR_LEVELS = ["black", "white", "bronze", "nickel", "chrome", "copper", "brass", "steel"]
BRAND_LEVELS = ["voltedge", "ampro", "lumax", "gridcore", "brighton", "ferrox", "novalux", "zelta"]
SPARSE_NAMES = ["brand", "series", "finish", "trim", "coating", "liner"]
SPARSE_LEVELS = {
    "brand": BRAND_LEVELS,
    "series": ["alpha", "beta", "gamma", "delta", "omega", "sigma"],
    "finish": ["matte", "gloss", "satin", "brushed", "textured"],
    "trim": ["slim", "wide", "flush"],
    "coating": ["anodized", "painted", "raw"],
    "liner": ["foam", "felt", "none"],
}
KIT_LEVELS = ["standard", "pro"]
ANCHOR_FILLERS = ["width_mm", "height_mm", "mount_count", "rail_len", "port_count", "depth_mm"]
REC_FILLERS = ["voltage", "capacity_ah", "cells", "charge_min", "pack_count", "mass_g"]


@dataclass
class SynthConfig:
    seed: int = 0
    attributes: int = 12            # per-side attribute count
    sparse_attributes: int = 3      # leading names of SPARSE_NAMES, shared on both sides
    sparse_missing_rate: float = 0.6
    planted_rules: int = 5
    pairs: int = 5000               # co-purchase log size (half compatible)
    unlabeled_pairs: int = 6000
    noise: float = 0.2
    products_per_catalog: int = 1200
    families: int = 16
    brand_loyalty: float = 0.6      # chance a product carries its family brand
    kit_rate: float = 0.55          # chance a rec product ships a charge kit
    core_missing_rate: float = 0.35     # categorical rule attributes (power, connector, color)
    numeric_missing_rate: float = 0.15  # wattage pair columns
    filler_missing_rate: float = 0.05   # everything else
    # a slice of the catalog is poorly documented: most attributes missing
    # (descriptions stay complete), and pairs touching it never reach the
    # high co-purchase counts that qualify for the test split
    poor_doc_rate: float = 0.0
    poor_missing_rate: float = 0.75
    nu_true: tuple[int, int] = (6, 20)   # high count range for compatible pairs
    nu_false: tuple[int, int] = (3, 5)   # high count range for incompatible pairs
    nu_low: tuple[int, int] = (1, 2)
    unlabeled_mix: tuple[float, float, float] = (0.45, 0.25, 0.30)  # compatible / near-miss / random
    rules: list[dict] | None = None  # explicit planted rules, else the default roster

    @staticmethod
    def from_dict(d: dict) -> "SynthConfig":
        cfg = SynthConfig()
        for key, value in d.items():
            if not hasattr(cfg, key):
                raise SynthConfigError(f"unknown synth config key {key!r}")
            if isinstance(getattr(cfg, key), tuple):
                value = tuple(value)
            setattr(cfg, key, value)
        return cfg

    @staticmethod
    def from_file(path: str | Path) -> "SynthConfig":
        with open(path, encoding="utf-8") as fh:
            return SynthConfig.from_dict(json.load(fh))


@dataclass
class SynthResult:
    catalog_a: Catalog
    catalog_b: Catalog
    copurchase: list[CoPurchaseRecord]
    ground_truth_rules: list[dict]
    unlabeled: list[tuple[str, str]]
    # true (pre-masking) attribute values, keyed by product id
    true_attrs: dict[str, dict] = field(default_factory=dict)

    def write(self, outdir: str | Path) -> None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        save_catalog(self.catalog_a, outdir / "catalog_a.jsonl")
        save_catalog(self.catalog_b, outdir / "catalog_b.jsonl")
        save_copurchase(self.copurchase, outdir / "copurchase.csv")
        save_unlabeled(self.unlabeled, outdir / "unlabeled.csv")
        with open(outdir / "rules_truth.json", "w", encoding="utf-8") as fh:
            json.dump(self.ground_truth_rules, fh, indent=2, sort_keys=True)


def default_rule_roster(cfg: SynthConfig) -> list[dict]:
    roster = [
        {"kind": "exact_match", "attribute": "power_type"},
        {"kind": "range", "anchor_attribute": "max_wattage",
         "rec_attribute": "wattage", "direction": "ge"},
        {"kind": "contain", "attribute": "charge_kit", "side": "rec"},
        {"kind": "prompt", "attribute": "brand", "token": "same"},
        {"kind": "exact_match", "attribute": "connector"},
        {"kind": "exact_match", "attribute": "color"},
    ]
    if cfg.sparse_attributes < 1:
        roster = [r for r in roster if r["kind"] != "prompt"]
    return roster


def _attribute_roster(cfg: SynthConfig) -> tuple[list[str], list[str], list[str]]:
    if not 0 <= cfg.sparse_attributes <= len(SPARSE_NAMES):
        raise SynthConfigError(
            f"sparse_attributes must be in [0, {len(SPARSE_NAMES)}]")
    sparse = SPARSE_NAMES[:cfg.sparse_attributes]
    anchor = ["power_type", "connector", "color", "max_wattage", "weight_kg"] + sparse
    rec = ["power_type", "connector", "color", "wattage", "weight_kg", "charge_kit"] + sparse
    if cfg.attributes < max(len(anchor), len(rec)):
        raise SynthConfigError(
            f"attributes={cfg.attributes} too small; need at least {max(len(anchor), len(rec))}")
    anchor += ANCHOR_FILLERS[:cfg.attributes - len(anchor)]
    rec += REC_FILLERS[:cfg.attributes - len(rec)]
    if len(anchor) != cfg.attributes or len(rec) != cfg.attributes:
        raise SynthConfigError(
            f"cannot reach {cfg.attributes} attributes per side with the built-in roster")
    return anchor, rec, sparse


def _validate_rules(rules: list[dict], anchor_attrs: list[str], rec_attrs: list[str]) -> None:
    known = set(anchor_attrs) | set(rec_attrs)
    for rule in rules:
        kind = rule.get("kind")
        if kind == "range":
            refs = [rule.get("anchor_attribute"), rule.get("rec_attribute")]
        else:
            refs = [rule.get("attribute")]
        for attr in refs:
            if attr not in known:
                raise SynthConfigError(
                    f"planted rule references nonexistent attribute {attr!r}")


def rule_satisfied(rule: dict, anchor_true: dict, rec_true: dict) -> bool:
    """Evaluate one planted rule on the true (pre-masking) attribute values."""
    kind = rule["kind"]
    if kind == "exact_match":
        a = anchor_true.get(rule["attribute"])
        b = rec_true.get(rule["attribute"])
        return a is not None and b is not None and a == b
    if kind == "range":
        a = anchor_true.get(rule["anchor_attribute"])
        b = rec_true.get(rule["rec_attribute"])
        if a is None or b is None:
            return False
        return a >= b if rule["direction"] == "ge" else a <= b
    if kind == "contain":
        side = rec_true if rule.get("side", "rec") == "rec" else anchor_true
        return side.get(rule["attribute"]) is not None
    if kind == "prompt":
        a = anchor_true.get(rule["attribute"])
        b = rec_true.get(rule["attribute"])
        return a is not None and b is not None and a == b
    raise SynthConfigError(f"unknown planted rule kind {kind!r}")


def pair_compatible(rules: list[dict], anchor_true: dict, rec_true: dict) -> bool:
    return all(rule_satisfied(r, anchor_true, rec_true) for r in rules)


CORE_CATEGORICAL = ("power_type", "connector", "color")
NUMERIC_PAIR = ("max_wattage", "wattage")


def _missing_rate(attr: str, sparse: list[str], cfg: SynthConfig,
                  poor_doc: bool = False) -> float:
    if attr in sparse:
        return cfg.sparse_missing_rate  # designated sparse attrs stay at a flat rate
    if attr == "charge_kit":
        return 0.0  # absence of a kit is the value, not noise
    if poor_doc:
        return cfg.poor_missing_rate
    if attr in CORE_CATEGORICAL:
        return cfg.core_missing_rate
    if attr in NUMERIC_PAIR:
        return cfg.numeric_missing_rate
    return cfg.filler_missing_rate


def _describe_anchor(name: str, t: dict) -> str:
    parts = [f"The {name} is a {t['color']} {t['power_type']} fixture with socket {t['connector']}."]
    sparse_bits = []
    for attr in SPARSE_NAMES:
        if attr in t and t[attr] is not None:
            sparse_bits.append(f"{attr} {t[attr]}")
    if sparse_bits:
        parts.append("Made with " + ", ".join(sparse_bits) + ".")
    parts.append(f"Supports up to {int(t['max_wattage'])} watts.")
    return " ".join(parts)


def _describe_rec(name: str, t: dict) -> str:
    parts = [f"The {name} is a {t['power_type']} battery pack rated {int(t['wattage'])} "
             f"watts with socket {t['connector']}."]
    sparse_bits = []
    for attr in SPARSE_NAMES:
        if attr in t and t[attr] is not None:
            sparse_bits.append(f"{attr} {t[attr]}")
    if sparse_bits:
        parts.append("Made with " + ", ".join(sparse_bits) + ".")
    if t.get("charge_kit") is not None:
        parts.append(f"Ships with a {t['charge_kit']} charge kit.")
    return " ".join(parts)


def synth_generate(cfg: SynthConfig) -> SynthResult:
    """Generate catalogs, co-purchase log, unlabeled pool, and planted rules."""
    anchor_attrs, rec_attrs, sparse = _attribute_roster(cfg)
    rules = cfg.rules if cfg.rules is not None else default_rule_roster(cfg)
    if not 1 <= cfg.planted_rules <= len(rules):
        raise SynthConfigError(
            f"planted_rules={cfg.planted_rules} out of range [1, {len(rules)}]")
    rules = rules[:cfg.planted_rules]
    _validate_rules(rules, anchor_attrs, rec_attrs)

    rng = np.random.default_rng(cfg.seed)
    n = cfg.products_per_catalog
    fam_power = rng.choice(POWER_LEVELS, size=cfg.families, p=POWER_WEIGHTS)
    fam_conn = rng.choice(CONNECTOR_LEVELS, size=cfg.families)
    fam_brand = rng.choice(BRAND_LEVELS, size=cfg.families)

    def sparse_value(attr):
        if attr == "brand":
            return None  # assigned per family below
        return str(rng.choice(SPARSE_LEVELS[attr]))

    true_attrs: dict[str, dict] = {}
    well_documented: dict[str, bool] = {}
    products_a: list[Product] = []
    products_b: list[Product] = []
    fam_members_a: list[list[int]] = [[] for _ in range(cfg.families)]
    fam_members_b: list[list[int]] = [[] for _ in range(cfg.families)]

    for i in range(n):
        fam = i % cfg.families
        t = {
            "power_type": str(fam_power[fam]),
            "connector": str(fam_conn[fam]),
            "color": str(rng.choice(COLOR_LEVELS)),
            "max_wattage": float(rng.integers(60, 201)),
            "weight_kg": round(float(rng.uniform(0.2, 8.0)), 2),
        }
        for attr in sparse:
            t[attr] = (str(fam_brand[fam]) if rng.random() < cfg.brand_loyalty
                       else str(rng.choice(BRAND_LEVELS))) if attr == "brand" else sparse_value(attr)
        for attr in anchor_attrs:
            if attr not in t:
                t[attr] = float(rng.integers(1, 500))
        pid = f"a{i:04d}"
        name = f"fixture {i}"
        poor = rng.random() < cfg.poor_doc_rate
        public = {attr: (None if rng.random() < _missing_rate(attr, sparse, cfg, poor)
                         else t[attr]) for attr in anchor_attrs}
        products_a.append(Product(pid, "anchor_cat", name, public, _describe_anchor(name, t)))
        well_documented[pid] = not poor
        true_attrs[pid] = t
        fam_members_a[fam].append(i)

    for i in range(n):
        fam = i % cfg.families
        t = {
            "power_type": str(fam_power[fam]),
            "connector": str(fam_conn[fam]),
            "color": str(rng.choice(COLOR_LEVELS)),
            "wattage": float(rng.integers(40, 191)),
            "weight_kg": round(float(rng.uniform(0.1, 3.0)), 2),
            "charge_kit": str(rng.choice(KIT_LEVELS)) if rng.random() < cfg.kit_rate else None,
        }
        for attr in sparse:
            t[attr] = (str(fam_brand[fam]) if rng.random() < cfg.brand_loyalty
                       else str(rng.choice(BRAND_LEVELS))) if attr == "brand" else sparse_value(attr)
        for attr in rec_attrs:
            if attr not in t:
                t[attr] = float(rng.integers(1, 500))
        pid = f"b{i:04d}"
        name = f"pack {i}"
        poor = rng.random() < cfg.poor_doc_rate
        public = {attr: (None if rng.random() < _missing_rate(attr, sparse, cfg, poor)
                         else t[attr]) for attr in rec_attrs}
        products_b.append(Product(pid, "rec_cat", name, public, _describe_rec(name, t)))
        well_documented[pid] = not poor
        true_attrs[pid] = t
        fam_members_b[fam].append(i)

    def compat(ai: int, bi: int) -> bool:
        return pair_compatible(rules, true_attrs[f"a{ai:04d}"], true_attrs[f"b{bi:04d}"])

    def draw_in_family() -> tuple[int, int]:
        fam = int(rng.integers(cfg.families))
        ai = fam_members_a[fam][int(rng.integers(len(fam_members_a[fam])))]
        bi = fam_members_b[fam][int(rng.integers(len(fam_members_b[fam])))]
        return ai, bi

    def draw_random() -> tuple[int, int]:
        return int(rng.integers(n)), int(rng.integers(n))

    def draw_compatible(used: set, budget: int = 200000) -> tuple[int, int]:
        for _ in range(budget):
            ai, bi = draw_in_family()
            if (ai, bi) in used:
                continue
            if compat(ai, bi):
                return ai, bi
        raise SynthConfigError("could not sample enough compatible pairs; "
                               "increase products_per_catalog or relax rules")

    def draw_incompatible(used: set, budget: int = 200000) -> tuple[int, int]:
        for _ in range(budget):
            ai, bi = draw_in_family() if rng.random() < 0.5 else draw_random()
            if (ai, bi) in used:
                continue
            if not compat(ai, bi):
                return ai, bi
        raise SynthConfigError("could not sample enough incompatible pairs")

    def draw_near_miss(used: set, budget: int = 400000) -> tuple[int, int]:
        # an in-family pair violating exactly one planted rule
        for _ in range(budget):
            ai, bi = draw_in_family()
            if (ai, bi) in used:
                continue
            sat = [rule_satisfied(r, true_attrs[f"a{ai:04d}"], true_attrs[f"b{bi:04d}"])
                   for r in rules]
            if sat.count(False) == 1:
                return ai, bi
        raise SynthConfigError("could not sample enough near-miss pairs")

    # --- co-purchase log: half compatible, half incompatible -------------
    used: set[tuple[int, int]] = set()
    log: list[CoPurchaseRecord] = []
    n_compat = cfg.pairs // 2
    n_incompat = cfg.pairs - n_compat

    def nu_draw(lo_hi: tuple[int, int]) -> int:
        return int(rng.integers(lo_hi[0], lo_hi[1] + 1))

    for _ in range(n_compat):
        ai, bi = draw_compatible(used)
        used.add((ai, bi))
        high = rng.random() < (1.0 - cfg.noise)
        if high:
            # only pairs of well-documented products reach test-grade counts
            both_good = well_documented[f"a{ai:04d}"] and well_documented[f"b{bi:04d}"]
            nu = nu_draw(cfg.nu_true) if both_good else nu_draw(cfg.nu_false)
        else:
            nu = nu_draw(cfg.nu_low)
        log.append(CoPurchaseRecord(f"a{ai:04d}", f"b{bi:04d}", nu))
    for _ in range(n_incompat):
        ai, bi = draw_incompatible(used)
        used.add((ai, bi))
        high = rng.random() < cfg.noise
        nu = nu_draw(cfg.nu_false) if high else nu_draw(cfg.nu_low)
        log.append(CoPurchaseRecord(f"a{ai:04d}", f"b{bi:04d}", nu))

    # --- unlabeled holdout pool ------------------------------------------
    mix = cfg.unlabeled_mix
    if abs(sum(mix) - 1.0) > 1e-9:
        raise SynthConfigError("unlabeled_mix must sum to 1")
    n_u_compat = int(round(mix[0] * cfg.unlabeled_pairs))
    n_u_miss = int(round(mix[1] * cfg.unlabeled_pairs))
    n_u_rand = cfg.unlabeled_pairs - n_u_compat - n_u_miss
    unlabeled: list[tuple[str, str]] = []
    for _ in range(n_u_compat):
        ai, bi = draw_compatible(used)
        used.add((ai, bi))
        unlabeled.append((f"a{ai:04d}", f"b{bi:04d}"))
    for _ in range(n_u_miss):
        ai, bi = draw_near_miss(used)
        used.add((ai, bi))
        unlabeled.append((f"a{ai:04d}", f"b{bi:04d}"))
    for _ in range(n_u_rand):
        while True:
            ai, bi = draw_random()
            if (ai, bi) not in used:
                break
        used.add((ai, bi))
        unlabeled.append((f"a{ai:04d}", f"b{bi:04d}"))

    catalog_a = Catalog("anchor_cat", products_a, infer_schema(products_a, "anchor_cat"))
    catalog_b = Catalog("rec_cat", products_b, infer_schema(products_b, "rec_cat"))
    return SynthResult(catalog_a, catalog_b, log, rules, unlabeled, true_attrs)
