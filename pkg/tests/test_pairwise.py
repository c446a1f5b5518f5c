import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_force_pairs

from motivpl.pairwise import clear_preference, retention_stats, transform


def as_tuples(pds):
    return [(tuple(p.diff.tolist()), p.label, p.source) for p in pds]


@given(
    st.integers(2, 12).flatmap(lambda n: st.tuples(
        st.lists(st.sampled_from([1.0, 1.5, 2.0, 2.25, 3.5, 3.6, 4.0, 5.0, 0.0, -1.0]), min_size=n, max_size=n),
        st.lists(st.lists(st.floats(-5, 5), min_size=2, max_size=2), min_size=n, max_size=n),
    )),
    st.sampled_from([0.0, 0.05, 0.1, 0.3]),
)
def test_transform_matches_brute_force(data, pt):
    y, X = data
    ids = [f"p{i}" for i in range(len(y))]
    got = as_tuples(transform(np.array(X), np.array(y), pt, ids))
    assert got == brute_force_pairs(X, y, pt, ids)


def test_threshold_examples():
    assert bool(clear_preference(4.0, 3.5, 0.1))
    assert not bool(clear_preference(3.6, 3.5, 0.1))
    # equality at the threshold does not emit (strict rule)
    assert not bool(clear_preference(3.0, 2.0, 0.5))
    assert not bool(clear_preference(2.0, 2.0, 0.0))
    assert bool(clear_preference(2.0, 1.99, 0.0))


def test_nonpositive_lower_score_uses_plain_order():
    assert bool(clear_preference(0.5, 0.0, 0.3))
    assert bool(clear_preference(-0.5, -1.0, 0.3))
    assert not bool(clear_preference(0.0, 0.0, 0.3))


def test_mirrored_layout_and_labels():
    X = np.array([[0.0, 1.0], [2.0, 3.0], [5.0, 5.0]])
    pds = transform(X, np.array([1.0, 3.0, 2.0]), 0.1, ["a", "b", "c"])
    labels = pds.labels.tolist()
    assert labels == [1, -1] * (len(labels) // 2)
    d = pds.diffs
    np.testing.assert_array_equal(d[0::2], -d[1::2])
    assert [p.source for p in pds][:2] == [("b", "a"), ("a", "b")]


def test_ties_never_emit():
    pds = transform(np.eye(3), np.array([2.0, 2.0, 2.0]), 0.0)
    assert len(pds) == 0
    assert retention_stats(pds).kept_fraction == 0.0


@given(st.lists(st.floats(1, 5), min_size=2, max_size=15), st.lists(st.floats(0, 1), min_size=2, max_size=6))
def test_pair_count_monotone_in_pt(y, pts):
    X = np.zeros((len(y), 1))
    counts = [len(transform(X, np.array(y), pt)) for pt in sorted(pts)]
    assert counts == sorted(counts, reverse=True)


@given(st.lists(st.floats(1, 5), min_size=2, max_size=15, unique=True))
def test_retention_in_unit_interval_and_full_at_zero(y):
    n = len(y)
    pds = transform(np.zeros((n, 1)), np.array(y), 0.0)
    st_ = retention_stats(pds)
    assert st_.kept_fraction == 1.0
    assert st_.kept_pairs == n * (n - 1)


def test_transform_validates_inputs():
    with pytest.raises(ValueError):
        transform(np.zeros((3, 1)), np.array([1.0, 2.0]), 0.1)
    with pytest.raises(ValueError):
        transform(np.zeros((3, 1)), np.array([1.0, 2.0, np.nan]), 0.1)
    with pytest.raises(ValueError):
        transform(np.zeros((3, 1)), np.array([1.0, 2.0, 3.0]), -0.1)
    with pytest.raises(ValueError):
        transform(np.zeros((1, 1)), np.array([1.0]), 0.1)


def test_to_csv(tmp_path):
    pds = transform(np.array([[0.0], [1.0]]), np.array([1.0, 2.0]), 0.1, ["a", "b"])
    p = tmp_path / "pairs.csv"
    pds.to_csv(p)
    assert p.read_text().splitlines() == ["d0,label,id_i,id_j", "1.0,1,b,a", "-1.0,-1,a,b"]
