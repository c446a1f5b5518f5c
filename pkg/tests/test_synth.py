import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import continuous_schema

from motivpl.domain import FeatureKind, default_schema, load_csv, write_csv
from motivpl.pairwise import transform
from motivpl.svm import LinearModel, TrainConfig, train_linear
from motivpl.synth import LatentSpec, corrupt, generate, linear_latents, oracle_pair_accuracy, radial_latents


def test_generated_values_respect_schema():
    s = default_schema()
    ds = generate(200, s, linear_latents(s, seed=0, noise_sigma=0.5))
    cont = s.indices(FeatureKind.CONTINUOUS)
    assert ((ds.X[:, cont] >= 0) & (ds.X[:, cont] <= 1)).all()
    assert np.isin(ds.X[:, s.indices(FeatureKind.BINARY)], (0.0, 1.0)).all()
    np.testing.assert_array_equal(ds.X[:, s.indices(FeatureKind.EXCLUSIVE)].sum(axis=1), 1.0)
    assert ((ds.Y >= 1) & (ds.Y <= 5)).all()


@given(st.integers(0, 10_000))
def test_noiseless_scores_follow_latent_order(seed):
    s = continuous_schema(3)
    spec = LatentSpec.linear((1.0, -2.0, 0.5), seed=seed)
    ds = generate(30, s, spec)
    u = spec.utility(ds.X)
    order = np.argsort(u, kind="stable")
    assert np.all(np.diff(ds.Y[order, 0]) >= 0)


def test_same_seed_same_data_and_csv_roundtrip(tmp_path):
    s = default_schema()
    a = generate(50, s, radial_latents(s, seed=4))
    b = generate(50, s, radial_latents(s, seed=4))
    assert a.identical(b)
    write_csv(a, tmp_path / "d.csv")
    assert load_csv(tmp_path / "d.csv", s).identical(a)
    assert not generate(50, s, radial_latents(s, seed=5)).identical(a)


def test_latent_scaling_targets_spread():
    s = default_schema()
    ds = generate(4000, s, radial_latents(s, seed=1, spread=1.5))
    u = radial_latents(s, seed=1, spread=1.5)[0].utility(ds.X)
    assert u.std() == pytest.approx(1.5, rel=0.1)
    assert abs(u.mean()) < 0.2
    v = linear_latents(s, seed=1, spread=1.5)[0].utility(ds.X)
    assert v.std() == pytest.approx(1.5, rel=0.1)


def test_table_latent_and_validation():
    s = continuous_schema(2)
    spec = LatentSpec("table", table=(3.0, 1.0, 2.0))
    ds = generate(3, s, spec)
    assert ds.Y[0, 0] > ds.Y[2, 0] > ds.Y[1, 0]
    with pytest.raises(ValueError):
        generate(4, s, spec)
    with pytest.raises(ValueError):
        LatentSpec("cubic")
    with pytest.raises(ValueError):
        LatentSpec.linear((1.0,), noise_sigma=-1)
    with pytest.raises(ValueError):
        generate(5, s, [spec, spec])


def test_corrupt_marks_distinct_records():
    s = default_schema()
    ds = generate(30, s, linear_latents(s))
    bad, ids = corrupt(ds, 10, seed=1)
    assert len(set(ids)) == 10
    rows = [ds.ids.index(i) for i in ids]
    changed = np.flatnonzero(~np.isclose(bad.X, ds.X, equal_nan=False).all(axis=1))
    assert sorted(changed.tolist()) == sorted(rows)
    with pytest.raises(ValueError):
        corrupt(ds, 31)


def test_oracle_accuracy_of_the_true_direction_is_one():
    s = continuous_schema(3)
    spec = LatentSpec.linear((1.0, 2.0, -1.0), seed=0)
    ds = generate(25, s, spec)
    assert oracle_pair_accuracy(LinearModel(np.array(spec.vector)), ds, spec) == 1.0
    assert oracle_pair_accuracy(LinearModel(-np.array(spec.vector)), ds, spec) == 0.0
    assert oracle_pair_accuracy(LinearModel(np.zeros(3)), ds, spec) == 0.5


def test_trained_linear_model_recovers_latent_order():
    s = continuous_schema(3)
    spec = LatentSpec.linear((1.0, 2.0, -1.0), seed=3, scale=2.0)
    ds = generate(40, s, spec)
    model = train_linear(transform(ds.X, ds.factor("competence"), 0.0), TrainConfig(c=5.0))
    assert oracle_pair_accuracy(model, ds, spec) > 0.97
