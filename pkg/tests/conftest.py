import warnings

import pytest

from amrule.catalog import AttributeSchema, Catalog, Product
from amrule.orchestrator import Run, RunConfig
from amrule.synth import SynthConfig, synth_generate

warnings.filterwarnings("ignore", message="only .* usable candidate rules")


def make_product(pid, category, attrs, description="", name=None):
    return Product(id=pid, category=category, name=name or pid,
                   attributes=attrs, description=description)


@pytest.fixture
def toy_catalogs():
    """Two tiny catalogs with shared and side-specific attributes."""
    anchors = [
        make_product("a1", "fixtures", {"brand": "m", "power": "li", "max_wattage": 100.0},
                     "The a1 fixture. brand m inside."),
        make_product("a2", "fixtures", {"brand": "n", "power": "ni", "max_wattage": 60.0},
                     "The a2 fixture. brand n inside."),
        make_product("a3", "fixtures", {"brand": None, "power": "li", "max_wattage": 80.0},
                     "The a3 fixture."),
    ]
    recs = [
        make_product("b1", "bulbs", {"brand": "m", "power": "li", "wattage": 40.0},
                     "The b1 bulb. brand m inside."),
        make_product("b2", "bulbs", {"brand": "n", "power": "ni", "wattage": 90.0},
                     "The b2 bulb. brand n inside."),
        make_product("b3", "bulbs", {"brand": "m", "power": None, "wattage": 55.0},
                     "The b3 bulb."),
    ]
    from amrule.catalog import infer_schema
    cat_a = Catalog("fixtures", anchors, infer_schema(anchors, "fixtures"))
    cat_b = Catalog("bulbs", recs, infer_schema(recs, "bulbs"))
    return cat_a, cat_b


SMALL_SYNTH = dict(seed=3, attributes=12, sparse_attributes=3, planted_rules=5,
                   pairs=900, unlabeled_pairs=900, noise=0.2,
                   products_per_catalog=400, families=8,
                   core_missing_rate=0.05, numeric_missing_rate=0.0,
                   unlabeled_mix=(0.55, 0.05, 0.40))

SMALL_RUN = dict(iterations=2, seed=2, budget=10, top_n=200, tree_depth=5,
                 threshold=0.7, cap=150, learning_rate=1e-3, epochs=12,
                 weight_decay=1e-5, hidden=(24, 12), neg_ratio=1.0)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """A fast planted benchmark for pipeline-level tests."""
    out = tmp_path_factory.mktemp("smallsynth")
    result = synth_generate(SynthConfig(**SMALL_SYNTH))
    result.write(out)
    return out, result


def small_run_config(data_dir, **overrides) -> RunConfig:
    cfg = dict(SMALL_RUN)
    cfg.update(
        catalog_a=str(data_dir / "catalog_a.jsonl"),
        catalog_b=str(data_dir / "catalog_b.jsonl"),
        copurchase=str(data_dir / "copurchase.csv"),
        unlabeled=str(data_dir / "unlabeled.csv"),
        truth_rules=str(data_dir / "rules_truth.json"),
        annotator="scripted",
    )
    cfg.update(overrides)
    return RunConfig(**cfg)


@pytest.fixture(scope="session")
def small_run(small_dataset, tmp_path_factory):
    data_dir, _ = small_dataset
    run_dir = tmp_path_factory.mktemp("smallrun")
    run = Run(small_run_config(data_dir), run_dir)
    run.run_all()
    return run
