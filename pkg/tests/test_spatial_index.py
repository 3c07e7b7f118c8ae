import numpy
import pytest

import enan
from conftest import iris_like, oracle_knn


def as_pairs(neighbors):
    return [(distance, point_id) for point_id, distance in neighbors]


def test_single_point():
    index = enan.build_index([[1.0, 2.0]])
    assert index.point_count == 1
    assert enan.knn(index, [0.0, 0.0], 3).pairs() == [(0, float(numpy.sqrt(5.0)))]
    assert len(index.knn([1.0, 2.0], 1, exclude=0)) == 0


def test_one_dimensional_example():
    index = enan.build_index([[0.0], [1.0], [3.0]])
    assert enan.knn(index, [0.0], 2, exclude=0).pairs() == [(1, 1.0), (2, 3.0)]


def test_ties_go_to_lower_id():
    index = enan.build_index([[1.0], [-1.0], [1.0], [-1.0]])
    assert [point_id for point_id, _ in index.knn([0.0], 3)] == [0, 1, 2]
    assert enan.rth_neighbor(index, [0.0], 4) == (3, 1.0)


def test_rth_neighbor():
    index = enan.build_index([[0.0], [1.0], [3.0], [7.0]])
    assert enan.rth_neighbor(index, [0.0], 1, exclude=0) == (1, 1.0)
    assert enan.rth_neighbor(index, [0.0], 3, exclude=0) == (3, 7.0)
    assert enan.rth_neighbor(index, [2.0], 2) == (2, 1.0)
    with pytest.raises(enan.IndexQueryException):
        enan.rth_neighbor(index, [0.0], 4, exclude=0)


def test_k_larger_than_the_set_is_clipped():
    index = enan.build_index([[0.0], [1.0], [3.0]])
    assert len(index.knn([0.0], 10)) == 3
    assert len(index.knn([0.0], 10, exclude=1)) == 2


def test_matches_linear_scan_on_uniform_plane():
    rng = numpy.random.default_rng(0)
    points = rng.uniform(size=(1000, 2))
    index = enan.build_index(points)
    for query in rng.uniform(size=(100, 2)):
        assert as_pairs(index.knn(query, 10)) == oracle_knn(points, query, 10)


def test_matches_linear_scan_in_five_dimensions():
    rng = numpy.random.default_rng(1)
    points = rng.standard_normal((500, 5))
    index = enan.build_index(points)
    for query in rng.standard_normal((50, 5)):
        assert as_pairs(index.knn(query, 7)) == oracle_knn(points, query, 7)


@pytest.mark.parametrize('seed', range(40))
def test_random_instances_match_linear_scan(seed):
    rng = numpy.random.default_rng(seed)
    m = int(rng.integers(2, 200))
    d = int(rng.integers(1, 6))
    # Every other instance sits on a coarse integer grid, where distance ties are everywhere
    if seed % 2:
        points = rng.integers(0, 4, size=(m, d)).astype(float)
        queries = rng.integers(0, 4, size=(10, d)).astype(float)
    else:
        points = rng.standard_normal((m, d))
        queries = rng.standard_normal((10, d))
    index = enan.build_index(points)
    for k in (1, 2, 5, m):
        for query in queries:
            assert as_pairs(index.knn(query, k)) == oracle_knn(points, query, k)
    for i in range(0, m, max(1, m // 10)):
        assert as_pairs(index.knn(points[i], 3, exclude=i)) == oracle_knn(points, points[i], 3, exclude=i)


def test_brute_force_agrees_with_tree():
    rng = numpy.random.default_rng(2)
    points = rng.integers(0, 3, size=(60, 2)).astype(float)
    index = enan.build_index(points)
    for query in points[:10]:
        assert index.knn(query, 6).pairs() == enan.brute_force_knn(points, query, 6).pairs()


def test_prefix_property():
    rng = numpy.random.default_rng(3)
    points = rng.integers(0, 5, size=(80, 3)).astype(float)
    index = enan.build_index(points)
    query = numpy.array([2.0, 2.0, 2.0])
    longest = index.knn(query, 20).pairs()
    for k in range(1, 20):
        assert index.knn(query, k).pairs() == longest[:k]
    distances = [distance for _, distance in longest]
    assert distances == sorted(distances)


@pytest.mark.parametrize('integer', [False, True])
def test_batched_lists_match_single_queries(integer):
    rng = numpy.random.default_rng(4)
    points = rng.integers(0, 4, size=(150, 2)).astype(float) if integer else rng.standard_normal((150, 3))
    index = enan.build_index(points)
    ids, distances = index.knn_all(9)
    assert ids.shape == (150, 9)
    for i in range(150):
        expected = oracle_knn(points, points[i], 9, exclude=i)
        assert list(zip(distances[i].tolist(), ids[i].tolist())) == expected


def test_batched_lists_are_clipped():
    index = enan.build_index([[0.0], [1.0], [3.0]])
    ids, distances = index.knn_all(5)
    assert ids.tolist() == [[1, 2], [0, 2], [1, 0]]
    assert distances.tolist() == [[1.0, 3.0], [1.0, 2.0], [2.0, 3.0]]


def test_duplicates_are_each_others_nearest():
    index = enan.build_index([[0.0, 0.0], [5.0, 5.0], [0.0, 0.0], [9.0, 0.0]])
    assert index.rth_neighbor([0.0, 0.0], 1, exclude=0) == (2, 0.0)
    assert index.rth_neighbor([0.0, 0.0], 1, exclude=2) == (0, 0.0)
    ids, distances = index.knn_all(1)
    assert ids[:, 0].tolist() == [2, 3, 0, 1]
    assert distances[0, 0] == 0.0


def test_iris_shaped_index():
    dataset = iris_like()
    index = enan.build_index(dataset.points)
    assert index.point_count == 150
    assert index.dimension == 4


def test_bad_input():
    with pytest.raises(ValueError):
        enan.build_index([])
    with pytest.raises(ValueError):
        enan.build_index([[1.0, 2.0], [3.0]])
    index = enan.build_index([[1.0, 2.0], [3.0, 4.0]])
    with pytest.raises(enan.IndexQueryException):
        index.knn([1.0, 2.0, 3.0], 1)
    with pytest.raises(ValueError):
        index.knn([1.0, 2.0], 0)


def test_index_points_are_read_only():
    index = enan.build_index([[1.0], [2.0]])
    with pytest.raises(ValueError):
        index.points[0, 0] = 3.0


def test_many_small_instances_match_linear_scan():
    for seed in range(200):
        rng = numpy.random.default_rng(seed + 1000)
        m = int(rng.integers(2, 61))
        d = int(rng.integers(1, 4))
        if seed % 2:
            points = rng.integers(0, 3, size=(m, d)).astype(float)
            queries = rng.integers(0, 3, size=(3, d)).astype(float)
        else:
            points = rng.standard_normal((m, d))
            queries = rng.standard_normal((3, d))
        index = enan.build_index(points)
        for query in queries:
            for k in (1, 3, m):
                assert as_pairs(index.knn(query, k)) == oracle_knn(points, query, k)
        assert as_pairs(index.knn(points[-1], 2, exclude=m - 1)) == oracle_knn(points, points[-1], 2, exclude=m - 1)


def test_small_sets_are_scanned_without_the_tree():
    rng = numpy.random.default_rng(3)
    points = rng.integers(0, 3, size=(enan.spatial_index.LEAF_SIZE, 2)).astype(float)
    index = enan.build_index(points)
    index.tree = None
    for query in rng.integers(0, 3, size=(10, 2)).astype(float):
        assert as_pairs(index.knn(query, 5)) == oracle_knn(points, query, 5)
    assert as_pairs(index.knn(points[0], 3, exclude=0)) == oracle_knn(points, points[0], 3, exclude=0)
    assert index.rth_neighbor(points[0], 2, exclude=0) == oracle_knn(points, points[0], 2, exclude=0)[1][::-1]
