import numpy as np
import pytest

from amrule.catalog import AttributeSchema, infer_schema
from amrule.featurize import (
    ANCHOR,
    REC,
    SHARED_DIFF,
    KindConflictWarning,
    PairFeaturizer,
    Standardizer,
    shared_attributes,
)

from conftest import make_product


def schema(category, cols):
    return AttributeSchema(category=category, columns=cols,
                           sparsity={n: 0.0 for n, _ in cols})


def test_shared_attributes_intersection():
    sa = schema("a", [("brand", "categorical"), ("wattage", "numerical")])
    sb = schema("b", [("brand", "categorical"), ("voltage", "numerical")])
    assert shared_attributes(sa, sb) == ["brand"]


def test_shared_attributes_disjoint():
    sa = schema("a", [("x", "numerical")])
    sb = schema("b", [("y", "numerical")])
    assert shared_attributes(sa, sb) == []


def test_shared_attributes_kind_conflict_warns():
    sa = schema("a", [("color", "categorical")])
    sb = schema("b", [("color", "numerical")])
    with pytest.warns(KindConflictWarning):
        assert shared_attributes(sa, sb) == []


def build_featurizer():
    anchors = [
        make_product("a1", "ca", {"brand": "m", "wattage": 60.0}),
        make_product("a2", "ca", {"brand": "n", "wattage": 30.0}),
        make_product("a3", "ca", {"brand": "m", "wattage": None}),
    ]
    recs = [
        make_product("b1", "cb", {"brand": "m", "wattage": 40.0}),
        make_product("b2", "cb", {"brand": "o", "wattage": 75.0}),
    ]
    fz = PairFeaturizer(infer_schema(anchors, "ca"), infer_schema(recs, "cb"))
    fz.fit_categories([(anchors[0], recs[0]), (anchors[1], recs[1]),
                       (anchors[2], recs[0])])
    return fz, anchors, recs


def test_encode_numerical_diff():
    fz, anchors, recs = build_featurizer()
    enc = fz.encode(anchors[0], recs[0])  # wattage 60 vs 40
    d = fz.descriptor(SHARED_DIFF, "wattage")
    assert enc.values[d.index] == 20.0
    assert enc.mask[d.index]


def test_encode_categorical_diff_equal_and_different():
    fz, anchors, recs = build_featurizer()
    d = fz.descriptor(SHARED_DIFF, "brand")
    same = fz.encode(anchors[0], recs[0])   # m vs m
    diff = fz.encode(anchors[1], recs[0])   # n vs m
    assert same.values[d.index] == 0.0
    assert diff.values[d.index] == 1.0


def test_encode_missing_masks_column():
    fz, anchors, recs = build_featurizer()
    enc = fz.encode(anchors[2], recs[0])  # anchor wattage missing
    da = fz.descriptor(ANCHOR, "wattage")
    dd = fz.descriptor(SHARED_DIFF, "wattage")
    assert enc.values[da.index] == 0.0 and not enc.mask[da.index]
    assert enc.values[dd.index] == 0.0 and not enc.mask[dd.index]


def test_encode_is_pure():
    fz, anchors, recs = build_featurizer()
    e1 = fz.encode(anchors[0], recs[1])
    e2 = fz.encode(anchors[0], recs[1])
    assert np.array_equal(e1.values, e2.values)
    assert np.array_equal(e1.mask, e2.mask)


def test_descriptor_layout_bijection():
    fz, _, _ = build_featurizer()
    indices = [d.index for d in fz.descriptors]
    assert indices == list(range(fz.dim))
    blocks = [d.provenance for d in fz.descriptors]
    # anchor block, then rec block, then shared-diff block
    first_rec = blocks.index(REC)
    first_diff = blocks.index(SHARED_DIFF)
    assert all(b == ANCHOR for b in blocks[:first_rec])
    assert all(b == REC for b in blocks[first_rec:first_diff])
    assert all(b == SHARED_DIFF for b in blocks[first_diff:])


def test_swap_permutes_blocks_and_negates_numerical_diff():
    # identical schemas on both sides make the swap well-defined
    items = [
        make_product("p1", "c", {"brand": "m", "watt": 50.0}),
        make_product("p2", "c", {"brand": "n", "watt": 20.0}),
    ]
    sch = infer_schema(items, "c")
    fz = PairFeaturizer(sch, sch)
    fz.fit_categories([(items[0], items[1]), (items[1], items[0])])
    fwd = fz.encode(items[0], items[1])
    rev = fz.encode(items[1], items[0])
    n = len(sch.columns)
    assert np.array_equal(fwd.values[:n], rev.values[n:2 * n])
    assert np.array_equal(fwd.values[n:2 * n], rev.values[:n])
    d_watt = fz.descriptor(SHARED_DIFF, "watt")
    d_brand = fz.descriptor(SHARED_DIFF, "brand")
    assert fwd.values[d_watt.index] == -rev.values[d_watt.index]
    assert fwd.values[d_brand.index] == rev.values[d_brand.index]


def test_category_codes_frequency_rank_and_unseen():
    fz, anchors, recs = build_featurizer()
    # anchor brand counts: m=2, n=1 -> m rank 1, n rank 2
    assert fz._code(ANCHOR, "brand", "m") == 1.0
    assert fz._code(ANCHOR, "brand", "n") == 2.0
    assert fz._code(ANCHOR, "brand", "unseen-value") == 3.0


def test_encoding_roundtrip_through_dict():
    fz, anchors, recs = build_featurizer()
    payload = fz.to_dict()
    fz2 = PairFeaturizer(fz.schema_a, fz.schema_b)
    fz2.load_categories(payload)
    e1 = fz.encode(anchors[1], recs[1])
    e2 = fz2.encode(anchors[1], recs[1])
    assert np.array_equal(e1.values, e2.values)


def test_standardizer_numerical_only():
    fz, anchors, recs = build_featurizer()
    rows = [fz.encode(a, r).values for a in anchors for r in recs]
    X = np.stack(rows)
    std = Standardizer().fit(X, fz.descriptors)
    Z = std.transform(X)
    for d in fz.descriptors:
        col = Z[:, d.index]
        if d.kind == "numerical" and X[:, d.index].std() > 0:
            assert abs(col.mean()) < 1e-12
            assert abs(col.std() - 1.0) < 1e-12
        if d.kind == "categorical":
            assert np.array_equal(col, X[:, d.index])
    roundtrip = Standardizer.from_dict(std.to_dict())
    assert np.allclose(roundtrip.transform(X), Z)
