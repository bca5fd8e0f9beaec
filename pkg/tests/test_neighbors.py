import numpy as np
import pytest
from numpy.testing import assert_array_equal

from oracles import brute_knn, overlap_fraction, random_orthogonal
from pnka import pnka_scores
from pnka.errors import DataError, ShapeError, UnsupportedError
from pnka.neighbors import bin_by_score, knn, knn_indices, knn_overlap, neighbor_overlap


@pytest.mark.parametrize("metric", ["cosine", "l2"])
@pytest.mark.parametrize("block", [1, 5, 64])
def test_knn_matches_brute_force(rng, metric, block):
    x = rng.standard_normal((41, 6))
    assert_array_equal(knn_indices(x, 7, metric, block), brute_knn(x, 7, metric))


def test_knn_ties_go_to_lower_index():
    # Points 1..4 are all at distance 1 from point 0.
    x = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    assert knn_indices(x, 2, "l2")[0].tolist() == [1, 2]
    sets = knn(x, 4, "l2")
    assert sets[0].neighbors == (1, 2, 3, 4)
    for s in sets:
        assert s.point not in s.neighbors
        assert len(set(s.neighbors)) == s.k == 4


def test_knn_centered_flag_changes_cosine(rng):
    x = rng.standard_normal((30, 3)) + 5.0
    raw = knn_indices(x, 5)
    cen = knn_indices(x, 5, centered=True)
    assert_array_equal(cen, brute_knn(x - x.mean(0), 5))
    assert not np.array_equal(raw, cen)


def test_knn_errors(rng):
    x = rng.standard_normal((6, 2))
    with pytest.raises(ShapeError):
        knn_indices(x, 6)
    with pytest.raises(ShapeError):
        knn_indices(x, 0)
    with pytest.raises(UnsupportedError):
        knn_indices(x, 2, "manhattan")
    x[3] = 0.0
    with pytest.raises(DataError, match="row 3"):
        knn_indices(x, 2, "cosine")
    knn_indices(x, 2, "l2")


def test_neighbor_overlap_matches_set_oracle(rng):
    a = np.array([rng.permutation(50)[:8] for _ in range(20)])
    b = np.array([rng.permutation(50)[:8] for _ in range(20)])
    assert_array_equal(neighbor_overlap(a, b), overlap_fraction(a, b))
    assert_array_equal(neighbor_overlap(a, a), 1.0)


def test_overlap_is_one_under_rotation(rng):
    y = rng.standard_normal((80, 5))
    z = y @ random_orthogonal(5, rng)
    for metric in ("cosine", "l2"):
        rep = knn_overlap(y, z, 10, metric)
        assert_array_equal(rep.per_point_overlap, 1.0)


def test_overlap_report_invariants(rng):
    y = rng.standard_normal((120, 8))
    z = y + 0.7 * rng.standard_normal((120, 8))
    rep = knn_overlap(y, z, 10, bins=6)
    k = rep.k
    assert np.all(np.isclose(rep.per_point_overlap * k, np.round(rep.per_point_overlap * k)))
    assert sum(b.count for b in rep.binned) == 120
    assert rep.binned[-1].upper == 1.0
    assert -1.0 <= rep.spearman <= 1.0


def test_overlap_accepts_precomputed_scores(rng):
    y = rng.standard_normal((50, 4))
    z = y + rng.standard_normal((50, 4))
    s = pnka_scores(y, z)
    a = knn_overlap(y, z, 5, scores=s)
    b = knn_overlap(y, z, 5)
    assert a.spearman == b.spearman
    with pytest.raises(ShapeError):
        knn_overlap(y, z[:10], 5)


def test_bin_by_score_examples():
    bins = bin_by_score(np.array([0.0, 0.5, 1.0, np.nan]), np.array([0.0, 0.4, 1.0, 7.0]), bins=2)
    assert [(b.lower, b.upper, b.count) for b in bins] == [(0.0, 0.5, 1), (0.5, 1.0, 2)]
    assert bins[1].mean_overlap == pytest.approx(0.7)
    same = bin_by_score(np.ones(3), np.ones(3), bins=4)
    assert same[-1].count == 3 and np.isnan(same[0].mean_overlap)
