import json

import numpy as np
import pytest

from amrule.catalog import (
    Catalog,
    CoPurchaseRecord,
    EmptyPositiveError,
    IngestionError,
    LabeledPair,
    SplitError,
    build_weak_dataset,
    infer_schema,
    load_catalog,
    load_copurchase,
    save_catalog,
    save_copurchase,
    split_dataset,
)
from amrule.synth import SynthConfig, SynthConfigError, pair_compatible, synth_generate

from conftest import make_product


def two_catalogs(n=10):
    a = [make_product(f"a{i}", "ca", {"x": float(i)}) for i in range(n)]
    b = [make_product(f"b{i}", "cb", {"y": float(i)}) for i in range(n)]
    return (Catalog("ca", a, infer_schema(a, "ca")),
            Catalog("cb", b, infer_schema(b, "cb")))


def test_min_count_threshold_filter():
    cat_a, cat_b = two_catalogs()
    log = [CoPurchaseRecord("a0", "b0", 5), CoPurchaseRecord("a1", "b1", 1),
           CoPurchaseRecord("a2", "b2", 9)]
    pairs = build_weak_dataset(cat_a, cat_b, log, min_count=2, neg_ratio=0.0, seed=0)
    positives = [p for p in pairs if p.label == 1]
    assert len(positives) == 2
    assert {p.anchor_id for p in positives} == {"a0", "a2"}


def test_negatives_count_and_exclusion():
    cat_a, cat_b = two_catalogs()
    log = [CoPurchaseRecord("a0", "b0", 5), CoPurchaseRecord("a1", "b1", 7),
           CoPurchaseRecord("a2", "b2", 1)]
    pairs = build_weak_dataset(cat_a, cat_b, log, min_count=2, neg_ratio=1.0, seed=1)
    negatives = [p for p in pairs if p.label == -1]
    assert len(negatives) == 2
    log_keys = {(r.anchor_id, r.rec_id) for r in log}
    assert all((p.anchor_id, p.rec_id) not in log_keys for p in negatives)


def test_positive_set_matches_bruteforce_scan():
    # oracle: a plain scan over the synthetic log
    rng = np.random.default_rng(7)
    cat_a, cat_b = two_catalogs(25)
    log = []
    seen = set()
    while len(log) < 100:
        key = (f"a{rng.integers(25)}", f"b{rng.integers(25)}")
        if key not in seen:
            seen.add(key)
            log.append(CoPurchaseRecord(*key, int(rng.integers(1, 10))))
    expected = {(r.anchor_id, r.rec_id) for r in log if r.count >= 3}
    pairs = build_weak_dataset(cat_a, cat_b, log, min_count=3, neg_ratio=0.0, seed=0)
    assert {(p.anchor_id, p.rec_id) for p in pairs} == expected


def test_no_positive_error_and_shared_id_error():
    cat_a, cat_b = two_catalogs()
    with pytest.raises(EmptyPositiveError):
        build_weak_dataset(cat_a, cat_b, [CoPurchaseRecord("a0", "b0", 1)], min_count=5)
    clash = [make_product("a0", "cb", {"y": 1.0})]
    cat_clash = Catalog("cb", clash, infer_schema(clash, "cb"))
    with pytest.raises(IngestionError):
        build_weak_dataset(cat_a, cat_clash, [CoPurchaseRecord("a0", "a0", 5)])


def _pairs(n, pos_frac=0.5, count=None):
    out = []
    for i in range(n):
        label = 1 if i < n * pos_frac else -1
        out.append(LabeledPair(f"a{i}", f"b{i}", label,
                               count=count if label == 1 else None))
    return out


def test_split_sizes_match_paper_ratio():
    split = split_dataset(_pairs(1000), (0.7, 0.15, 0.15), seed=0)
    assert (len(split.train), len(split.validation), len(split.test)) == (700, 150, 150)


def test_split_deterministic_and_disjoint():
    pairs = _pairs(200)
    s1 = split_dataset(pairs, (0.7, 0.15, 0.15), seed=9)
    s2 = split_dataset(pairs, (0.7, 0.15, 0.15), seed=9)
    assert s1.as_dict() == s2.as_dict()
    buckets = [set(s1.train), set(s1.validation), set(s1.test)]
    assert sum(len(b) for b in buckets) == len(set().union(*buckets)) == 200


def test_split_stratification_within_5_points():
    pairs = _pairs(20)
    split = split_dataset(pairs, (0.5, 0.25, 0.25), seed=4)
    by_id = {p.pair_id: p for p in pairs}
    for ids in (split.train, split.validation, split.test):
        share = np.mean([by_id[i].label == 1 for i in ids])
        assert abs(share - 0.5) <= 0.05 + 1e-9


def test_split_min_count_test_gates_positives():
    pairs = [LabeledPair(f"a{i}", f"b{i}", 1, count=3 if i % 2 else 8) for i in range(40)]
    pairs += [LabeledPair(f"c{i}", f"d{i}", -1) for i in range(40)]
    split = split_dataset(pairs, (0.7, 0.15, 0.15), seed=0, min_count_test=6)
    by_id = {p.pair_id: p for p in pairs}
    test_pos = [by_id[i] for i in split.test if by_id[i].label == 1]
    assert test_pos and all(p.count >= 6 for p in test_pos)


def test_split_errors():
    with pytest.raises(SplitError):
        split_dataset(_pairs(5), (0.7, 0.15, 0.15), seed=0)
    with pytest.raises(SplitError):
        split_dataset(_pairs(100), (0.6, 0.15, 0.15), seed=0)


def test_ingestion_roundtrip_byte_identical(tmp_path):
    cfg = SynthConfig(seed=5, pairs=200, unlabeled_pairs=100,
                      products_per_catalog=200, families=6)
    result = synth_generate(cfg)
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_catalog(result.catalog_a, p1)
    reloaded = load_catalog(p1)
    save_catalog(reloaded, p2)
    assert p1.read_bytes() == p2.read_bytes()
    c1, c2 = tmp_path / "c1.csv", tmp_path / "c2.csv"
    save_copurchase(result.copurchase, c1)
    save_copurchase(load_copurchase(c1), c2)
    assert c1.read_bytes() == c2.read_bytes()


def test_catalog_file_errors(tmp_path):
    bad = tmp_path / "dup.jsonl"
    row = {"id": "x", "category": "c", "name": "x", "attributes": {}, "description": ""}
    bad.write_text(json.dumps(row) + "\n" + json.dumps(row) + "\n")
    with pytest.raises(IngestionError):
        load_catalog(bad)


def test_schema_inference_kinds_and_sparsity():
    products = [
        make_product("p1", "c", {"size": 3.0, "color": "red", "note": None}),
        make_product("p2", "c", {"size": 5.0, "color": None, "note": None}),
    ]
    schema = infer_schema(products, "c")
    kinds = dict(schema.columns)
    assert kinds["size"] == "numerical"
    assert kinds["color"] == "categorical"
    assert kinds["note"] == "categorical"  # nothing present, defaults categorical
    assert schema.sparsity["color"] == 0.5
    assert schema.sparsity["note"] == 1.0


# --- synthetic generator ----------------------------------------------------

def test_synth_noiseless_high_counts_satisfy_all_rules():
    cfg = SynthConfig(seed=2, pairs=300, unlabeled_pairs=100, noise=0.0,
                      products_per_catalog=300, families=6)
    res = synth_generate(cfg)
    high = [r for r in res.copurchase if r.count >= 3]
    assert high
    for r in high:
        assert pair_compatible(res.ground_truth_rules,
                               res.true_attrs[r.anchor_id], res.true_attrs[r.rec_id])


def test_synth_noise_fraction_of_positives():
    cfg = SynthConfig(seed=8, pairs=2000, unlabeled_pairs=100, noise=0.2,
                      products_per_catalog=600, families=10)
    res = synth_generate(cfg)
    positives = [r for r in res.copurchase if r.count >= 3]
    violating = sum(
        1 for r in positives
        if not pair_compatible(res.ground_truth_rules,
                               res.true_attrs[r.anchor_id], res.true_attrs[r.rec_id]))
    assert 900 <= len(positives) <= 1100
    assert abs(violating / len(positives) - 0.2) < 0.04


def test_synth_sparse_attribute_missing_rates():
    cfg = SynthConfig(seed=4, pairs=200, unlabeled_pairs=100,
                      sparse_attributes=3, sparse_missing_rate=0.6,
                      products_per_catalog=600, families=8)
    res = synth_generate(cfg)
    for attr in ("brand", "series", "finish"):
        for catalog in (res.catalog_a, res.catalog_b):
            rate = np.mean([p.attributes[attr] is None for p in catalog.products])
            assert abs(rate - 0.6) <= 0.05


def test_synth_rejects_unknown_rule_attribute():
    cfg = SynthConfig(seed=1, pairs=100, unlabeled_pairs=50,
                      rules=[{"kind": "exact_match", "attribute": "nonexistent"}],
                      planted_rules=1)
    with pytest.raises(SynthConfigError):
        synth_generate(cfg)


def test_synth_deterministic():
    cfg = dict(seed=6, pairs=150, unlabeled_pairs=80, products_per_catalog=200, families=6)
    r1 = synth_generate(SynthConfig(**cfg))
    r2 = synth_generate(SynthConfig(**cfg))
    assert [(r.anchor_id, r.rec_id, r.count) for r in r1.copurchase] == \
           [(r.anchor_id, r.rec_id, r.count) for r in r2.copurchase]
    assert r1.unlabeled == r2.unlabeled
    assert [p.attributes for p in r1.catalog_a.products] == \
           [p.attributes for p in r2.catalog_a.products]
