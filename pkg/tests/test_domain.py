import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from motivpl.domain import (
    FACTORS,
    PLAY_STYLES,
    DataError,
    Dataset,
    Feature,
    FeatureKind,
    FeatureSchema,
    OutlierRule,
    PlayerRecord,
    SchemaError,
    clean,
    default_schema,
    load_csv,
    select_features,
    write_csv,
)
from motivpl.synth import corrupt, generate, linear_latents


def test_default_schema_layout():
    s = default_schema()
    assert len(s) == 30
    assert s.style_names == PLAY_STYLES
    assert len(s.metric_names) == 26
    assert s.factor_names == FACTORS
    binary = [s.names[i] for i in s.indices(FeatureKind.BINARY)]
    assert binary == ["Early Level 30", "Reached Level 30", "Season-Pass"]


def test_schema_rejects_duplicates_and_reserved_names():
    with pytest.raises(SchemaError):
        FeatureSchema((Feature("a"), Feature("a")))
    with pytest.raises(SchemaError):
        FeatureSchema((Feature("player_id"),))
    with pytest.raises(SchemaError):
        FeatureSchema((Feature("competence"),))


def test_schema_dict_roundtrip_and_fingerprint():
    s = default_schema()
    back = FeatureSchema.from_dict(s.to_dict())
    assert back == s
    assert back.fingerprint() == s.fingerprint()
    assert s.subset(["Level", "Elite"]).fingerprint() != s.fingerprint()
    with pytest.raises(SchemaError):
        FeatureSchema.from_dict({"features": [{"name": "a", "kind": "weird"}]})


def test_dataset_is_immutable_and_ids_unique(small_ds):
    with pytest.raises(ValueError):
        small_ds.X[0, 0] = 1.0
    with pytest.raises((ValueError, DataError)):
        Dataset(small_ds.schema, ("a",) * len(small_ds), small_ds.X, small_ds.Y)


def test_records_roundtrip(small_ds):
    back = Dataset.from_records(small_ds.schema, small_ds.records)
    assert back.identical(small_ds)
    assert isinstance(small_ds.records[0], PlayerRecord)


def test_csv_roundtrip_is_bit_exact(tmp_path, small_ds):
    X = small_ds.X.copy()
    X[3, 2] = math.nan
    ds = Dataset(small_ds.schema, small_ds.ids, X, small_ds.Y)
    p = tmp_path / "d.csv"
    write_csv(ds, p)
    back = load_csv(p, ds.schema)
    assert back.ids == ds.ids
    np.testing.assert_array_equal(back.X, ds.X)
    np.testing.assert_array_equal(back.Y, ds.Y)


def test_load_csv_errors(tmp_path, schema):
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "missing.csv", schema)
    bad = tmp_path / "bad.csv"
    bad.write_text("player_id,foo\np1,2\n")
    with pytest.raises(SchemaError):
        load_csv(bad, schema)


def test_load_csv_without_factor_columns(tmp_path, small_ds):
    p = tmp_path / "nofactors.csv"
    header = ["player_id", *small_ds.schema.names]
    rows = [",".join(header)] + [",".join([pid, *map(repr, x.tolist())]) for pid, x in zip(small_ds.ids, small_ds.X)]
    p.write_text("\n".join(rows) + "\n")
    ds = load_csv(p, small_ds.schema, require_factors=False)
    assert np.isnan(ds.Y).all()
    with pytest.raises(SchemaError):
        load_csv(p, small_ds.schema)


def test_unparseable_cells_become_missing_and_are_dropped(tmp_path, small_ds):
    p = tmp_path / "d.csv"
    write_csv(small_ds, p)
    lines = p.read_text().splitlines()
    cells = lines[5].split(",")
    cells[3] = "n/a"
    lines[5] = ",".join(cells)
    p.write_text("\n".join(lines) + "\n")
    ds = load_csv(p, small_ds.schema)
    assert math.isnan(ds.X[4, 2])  # line 5 is data row 4
    cleaned, log = clean(ds)
    assert dict(log.entries)[small_ds.ids[4]] == "missing"
    assert small_ds.ids[4] not in cleaned.ids


def test_cleaning_example_443_to_298():
    s = default_schema()
    raw = generate(443, s, linear_latents(s, seed=7))
    damaged, bad_ids = corrupt(raw, 145, seed=7)
    cleaned, log = clean(damaged, "iqr:1.5")
    assert len(cleaned) == 298
    assert sorted(log.dropped_ids) == sorted(bad_ids)
    assert {r.split(":")[0] for _, r in log.entries} <= {"missing", "outlier"}


def test_corrupted_flags_and_factors_are_logged(small_ds):
    X, Y = small_ds.X.copy(), small_ds.Y.copy()
    s = small_ds.schema
    X[0, s.indices(FeatureKind.BINARY)[0]] = 0.5
    X[1, s.indices(FeatureKind.EXCLUSIVE)] = 1.0
    Y[2, 0] = 7.0
    X[4, 0] = math.inf
    ds = Dataset(s, small_ds.ids, X, Y)
    _, log = clean(ds, "none")
    reasons = dict(log.entries)
    assert reasons[ds.ids[0]].startswith("corrupted")
    assert reasons[ds.ids[1]].startswith("corrupted")
    assert reasons[ds.ids[2]] == "corrupted: factor outside [1, 5]"
    assert reasons[ds.ids[4]] == "non-finite"


def test_clean_everything_dropped_raises(small_ds):
    ds = Dataset(small_ds.schema, small_ds.ids, np.full_like(small_ds.X, math.nan), small_ds.Y)
    with pytest.raises(DataError):
        clean(ds)


@pytest.mark.parametrize("text,expected", [("iqr:1.5", OutlierRule("iqr", 1.5)),
                                           ("zscore:3", OutlierRule("zscore", 3.0)),
                                           ("none", OutlierRule("none", 0.0))])
def test_outlier_rule_parse(text, expected):
    assert OutlierRule.parse(text) == expected


@pytest.mark.parametrize("text", ["iqr", "mad:2", "iqr:-1", "zscore:x"])
def test_outlier_rule_parse_rejects(text):
    with pytest.raises(ValueError):
        OutlierRule.parse(text)


@given(st.integers(0, 10_000), st.sampled_from(["iqr:1.5", "iqr:0.5", "zscore:2", "none"]))
def test_clean_is_idempotent(seed, rule):
    rng = np.random.default_rng(seed)
    s = FeatureSchema(tuple(Feature(f"x{i}") for i in range(3)))
    n = 30
    X = rng.standard_t(2, size=(n, 3))
    Y = rng.uniform(1, 5, size=(n, 4))
    ds = Dataset(s, tuple(f"p{i}" for i in range(n)), X, Y)
    try:
        once, _ = clean(ds, rule)
    except DataError:
        return
    twice, log2 = clean(once, rule)
    assert twice.identical(once)
    assert len(log2) == 0


def test_select_features(small_ds):
    styles = select_features(small_ds, "styles")
    metrics = select_features(small_ds, "game_metrics")
    assert styles.schema.names == PLAY_STYLES
    assert len(metrics.schema) == 26
    assert select_features(small_ds, "all") is small_ds
    with pytest.raises(ValueError):
        select_features(small_ds, "nonsense")
