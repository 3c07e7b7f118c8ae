import math
import os
from fractions import Fraction

import numpy
import pytest

import enan

DATA_DIR = os.environ.get('ENAN_DATA_DIR', os.path.join(os.path.dirname(os.path.dirname(__file__)), 'data'))


# Linear-scan oracles
# These recompute everything with plain loops, without the tree, prefix sums or incremental updates.


def oracle_knn(points, query, k, exclude=None):
    """(distance, id) pairs of the k nearest points, ties to the lower id."""
    distances = numpy.sqrt(numpy.sum((numpy.asarray(points, dtype=float) - query) ** 2, axis=1))
    ordered = sorted((float(distance), i) for i, distance in enumerate(distances) if i != exclude)
    return ordered[:k]


def oracle_neighbor_ids(points, query, k, exclude=None):
    return [i for _, i in oracle_knn(points, query, k, exclude)]


def oracle_statistics(points, labels, n_classes, k):
    """Class-wise statistics by the full double sum over members and ranks."""
    numerators = [0] * n_classes
    denominators = [0] * n_classes
    for x in range(len(points)):
        neighbors = oracle_neighbor_ids(points, points[x], k, exclude=x)
        numerators[labels[x]] += sum(1 for j in neighbors if labels[j] == labels[x])
        denominators[labels[x]] += len(neighbors)
    return [Fraction(n, d) if d else Fraction(0) for n, d in zip(numerators, denominators)]


def oracle_enn(points, labels, n_classes, z, k):
    """
    ENN by physically appending z with every possible label and recomputing the statistics.

    :return: (predicted class, list over assumed classes of statistic vectors)
    """
    points = numpy.asarray(points, dtype=float)
    base = sum(oracle_statistics(points, labels, n_classes, k))
    augmented_points = numpy.vstack([points, z])
    assumed = []
    for label in range(n_classes):
        augmented_labels = list(labels) + [label]
        assumed.append(oracle_statistics(augmented_points, augmented_labels, n_classes, k))
    scores = [sum(row) - base for row in assumed]
    best = 0
    for label in range(1, n_classes):
        if scores[label] > scores[best]:
            best = label
    return best, assumed


def oracle_nan_count(points, query, nane):
    """Natural neighbor count of query after physically inserting it as the highest id."""
    points = numpy.asarray(points, dtype=float)
    augmented = numpy.vstack([points, query])
    query_id = len(points)
    count = 0
    for j in oracle_neighbor_ids(augmented, query, nane, exclude=query_id):
        if query_id in oracle_neighbor_ids(augmented, augmented[j], nane, exclude=j):
            count += 1
    return count


def oracle_nane(points, max_nane=64):
    """
    Straight simulation of the natural neighbor rounds with linear-scan lists.

    :return: (nane, list of natural neighbor sets, rounds log)
    """
    points = numpy.asarray(points, dtype=float)
    m = len(points)
    lists = [oracle_neighbor_ids(points, points[i], m - 1, exclude=i) for i in range(m)]
    cap = min(m - 1, max_nane)
    previous = m
    unchanged = 0
    log = []
    r = 0
    while True:
        r += 1
        sets = [set(neighbors[:r]) for neighbors in lists]
        zero = sum(1 for i in range(m) if not any(i in sets[j] for j in sets[i]))
        log.append(zero)
        if zero == 0:
            break
        unchanged = unchanged + 1 if zero == previous else 0
        previous = zero
        if unchanged >= math.ceil(math.sqrt(r)) or r >= cap:
            break
    sets = [set(neighbors[:r]) for neighbors in lists]
    nan_sets = [{j for j in sets[i] if i in sets[j]} for i in range(m)]
    return r, nan_sets, log


# Data helpers


def random_instance(seed, max_points=200, max_dimension=5, max_classes=3, integer=False):
    rng = numpy.random.default_rng(seed)
    m = int(rng.integers(8, max_points + 1))
    d = int(rng.integers(1, max_dimension + 1))
    n_classes = int(rng.integers(1, max_classes + 1))
    if integer:
        points = rng.integers(0, 6, size=(m, d)).astype(float)
    else:
        points = rng.standard_normal((m, d))
    labels = rng.integers(0, n_classes, size=m)
    labels[:n_classes] = numpy.arange(n_classes)
    return enan.Dataset(points, labels, tuple('c{}'.format(label) for label in range(n_classes)),
                        'random{}'.format(seed))


def iris_like(seed=0):
    """150 x 4, three classes of 50, shaped roughly like the classic iris measurements."""
    rng = numpy.random.default_rng(seed)
    centers = numpy.array([[5.0, 3.4, 1.5, 0.2], [5.9, 2.8, 4.3, 1.3], [6.6, 3.0, 5.6, 2.0]])
    spreads = numpy.array([[0.35, 0.38, 0.17, 0.1], [0.5, 0.3, 0.47, 0.2], [0.63, 0.32, 0.55, 0.27]])
    points = numpy.concatenate([center + spread * rng.standard_normal((50, 4))
                                for center, spread in zip(centers, spreads)])
    labels = numpy.repeat(numpy.arange(3), 50)
    return enan.Dataset(points, labels, ('setosa', 'versicolor', 'virginica'), 'iris')


def uci_path(name):
    return os.path.join(DATA_DIR, '{}.csv'.format(name))


def load_uci(name):
    path = uci_path(name)
    if not os.path.isfile(path):
        pytest.skip('{} not found; fetch it with scripts/download.py'.format(path))
    return enan.load_csv(path, name=name)


@pytest.fixture
def two_class_gaussians():
    return enan.make_gaussian_blobs(60, [(0.0, 0.0), (2.5, 1.0)], spread=1.0, seed=7)


@pytest.fixture
def separable_blobs():
    return enan.make_gaussian_blobs(40, [(0.0, 0.0), (50.0, 50.0)], spread=1.0, seed=3)
