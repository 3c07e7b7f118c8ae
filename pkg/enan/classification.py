import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy

from enan.data_io import stratified_kfold
from enan.natural_neighbor import compute_nane, num_natural_neighbors, sqrt_window, MAX_NANE
from enan.spatial_index import build_index, euclidean_distances

LOGGER = logging.getLogger(__name__)

"""
Extended nearest neighbor (ENN) classification and its natural-neighbor variant (ENaN).

Training keeps, for every training point, its ordered nearest neighbors (the weighted kNN graph) and the running count
of same-class neighbors along that list. A query is then classified by assuming each class in turn, working out how the
class-wise statistics of training + query would change, and picking the class with the largest total gain. Only points
whose neighbor list the query would enter are touched, so a prediction costs one pass over the training distances.
"""

FALLBACK_MODES = ('lambda', 'one')
BASE_MODES = ('at_k', 'at_lambda')


# Raised when a model is asked for something its graph cannot provide (rank or k beyond the stored depth)
class ModelStateException(Exception):
    pass


@dataclass(frozen=True)
class WeightedKnnGraph:
    """
    Training points as vertices, each with edges to its nearest neighbors weighted by distance.
    """
    ids: numpy.ndarray
    distances: numpy.ndarray
    labels: numpy.ndarray
    k_max: int

    @property
    def list_length(self):
        return self.ids.shape[1]

    @property
    def point_count(self):
        return self.ids.shape[0]


@dataclass(frozen=True)
class ClasswiseStats:
    prefix_hits: numpy.ndarray
    class_sizes: numpy.ndarray
    labels: numpy.ndarray

    @classmethod
    def from_graph(cls, graph, n_classes):
        hits = graph.labels[graph.ids] == graph.labels[:, None]
        prefix_hits = numpy.cumsum(hits, axis=1)
        prefix_hits.setflags(write=False)
        class_sizes = numpy.bincount(graph.labels, minlength=n_classes)
        return cls(prefix_hits, class_sizes, graph.labels)

    @property
    def n_classes(self):
        return len(self.class_sizes)

    def rank_hits(self, r):
        """
        Boolean per point: does its r-th neighbor share its class.
        """
        previous = self.prefix_hits[:, r - 2] if r > 1 else 0
        return (self.prefix_hits[:, r - 1] - previous) > 0

    def hit_sums(self, length):
        """
        Per class, the number of same-class neighbors among the first `length` neighbors of its members.
        """
        if length == 0:
            return numpy.zeros(self.n_classes, dtype=int)
        return numpy.bincount(self.labels, weights=self.prefix_hits[:, length - 1],
                              minlength=self.n_classes).astype(int)

    def statistic(self, k):
        """
        Generalized class-wise statistic T_i for every class as exact fractions. When lists are shorter than k the
        inner sums stop at the list length and so does the divisor.
        """
        length = min(k, self.prefix_hits.shape[1])
        sums = self.hit_sums(length)
        return [_ratio(int(sums[label]), int(self.class_sizes[label]) * length) for label in range(self.n_classes)]


@dataclass(frozen=True)
class EnnModel:
    index: object
    graph: WeightedKnnGraph
    stats: ClasswiseStats
    class_names: tuple
    # FeatureScaling the training points went through, applied to raw queries by the predict functions
    scaling: object = None

    @property
    def n_classes(self):
        return len(self.class_names)


@dataclass(frozen=True)
class FixedEnnModel(EnnModel):
    k: int = 1


@dataclass(frozen=True)
class EnanModel(EnnModel):
    nan_model: object = None

    @property
    def nane(self):
        return self.nan_model.nane


def _ratio(numerator, denominator):
    return Fraction(numerator, denominator) if denominator else Fraction(0)


def sqrt_k(training_size):
    """
    k = floor(sqrt(n)), at least 1.
    """
    return max(1, math.isqrt(training_size))


def build_graph(index, labels, k):
    """
    Weighted kNN graph over the indexed points with lists of length min(k, m - 1).
    """
    ids, distances = index.knn_all(k)
    if ids.shape[1] < k:
        LOGGER.warning('Neighbor lists truncated to {} (asked for {}).'.format(ids.shape[1], k))
    return WeightedKnnGraph(ids, distances, numpy.asarray(labels), k)


def indicator(point_id, r, graph):
    """
    1 if the point and its r-th nearest neighbor share a class, else 0.
    """
    if not 1 <= r <= graph.list_length:
        raise ModelStateException('Rank {} outside the stored neighbor list of length {}.'.format(
            r, graph.list_length))
    return int(graph.labels[point_id] == graph.labels[graph.ids[point_id, r - 1]])


def classwise_statistic(graph, k, stats=None):
    """
    The generalized class-wise statistic vector at neighborhood size k.

    :param graph: WeightedKnnGraph
    :param k: neighborhood size, 1 <= k <= graph.k_max
    :param stats: precomputed ClasswiseStats for the graph, built when absent
    :return: list of floats, one per class
    """
    if not 1 <= k <= graph.k_max:
        raise ModelStateException('k = {} outside [1, {}].'.format(k, graph.k_max))
    if stats is None:
        stats = ClasswiseStats.from_graph(graph, int(graph.labels.max()) + 1)
    return [float(value) for value in stats.statistic(k)]


def assumed_statistics(model, z, k):
    """
    Class-wise statistics of training + {z}, once per assumed class of z.

    Every training point x whose k-th neighbor lies farther than z takes z into its list (z loses ties): the old k-th
    neighbor drops out and z's indicator comes in. Points whose lists are shorter than k simply grow by one. z itself
    contributes the same-class count of its own nearest training points.

    :return: list over assumed classes j of lists over classes i of T_i^(j) as fractions
    """
    z = model.index.check_query(z)
    graph = model.graph
    stats = model.stats
    n_classes = model.n_classes
    m = graph.point_count
    length = min(k, graph.list_length)
    full = length == k

    z_distances = euclidean_distances(model.index.points, z)
    if full:
        entered = z_distances < graph.distances[:, k - 1]
        lost = entered & stats.rank_hits(k)
    else:
        entered = numpy.ones(m, dtype=bool)
        lost = numpy.zeros(m, dtype=bool)
    entered_per_class = numpy.bincount(graph.labels[entered], minlength=n_classes)
    lost_per_class = numpy.bincount(graph.labels[lost], minlength=n_classes)

    z_length = min(k, m)
    z_neighbors = model.index.knn(z, z_length)
    z_votes = numpy.bincount(graph.labels[z_neighbors.ids], minlength=n_classes)

    base_sums = stats.hit_sums(length)
    base_sizes = stats.class_sizes * length + (0 if full else stats.class_sizes)
    statistics = []
    for assumed in range(n_classes):
        row = []
        for label in range(n_classes):
            numerator = int(base_sums[label]) - int(lost_per_class[label])
            denominator = int(base_sizes[label])
            if label == assumed:
                numerator += int(entered_per_class[label]) + int(z_votes[label])
                denominator += z_length
            row.append(_ratio(numerator, denominator))
        statistics.append(row)
    return statistics


def class_scores(model, z, k, base='at_k'):
    """
    Total statistic gain sum_i (T_i^(j) - T_i) for every assumed class j.

    :param base: 'at_k' compares against the training statistics at k, 'at_lambda' against those at the graph depth
    """
    if base == 'at_k':
        reference = model.stats.statistic(k)
    elif base == 'at_lambda':
        reference = model.stats.statistic(model.graph.k_max)
    else:
        raise ValueError('Unknown base statistic mode {}, expected one of {}.'.format(base, BASE_MODES))
    baseline = sum(reference)
    return [sum(row) - baseline for row in assumed_statistics(model, z, k)]


def enn_predict(model, z, k, base='at_k'):
    """
    ENN decision for a single query: the class whose assumption raises the class-wise statistics the most. Equal
    scores go to the lowest class id.

    :param model: FixedEnnModel or EnanModel
    :param z: feature vector
    :param k: neighborhood size, 1 <= k <= graph depth
    :return: class id
    """
    if not 1 <= k <= model.graph.k_max:
        raise ModelStateException('k = {} outside [1, {}].'.format(k, model.graph.k_max))
    scores = class_scores(model, z, k, base)
    best = 0
    for label in range(1, len(scores)):
        if scores[label] > scores[best]:
            best = label
    return best


def knn_classify(index, labels, z, k, n_classes=None):
    """
    Majority label among the k nearest training points, ties to the lowest class id.
    """
    if not 1 <= k <= index.point_count:
        raise ValueError('k = {} outside [1, {}].'.format(k, index.point_count))
    neighbors = index.knn(z, k)
    labels = numpy.asarray(labels)
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    return int(numpy.argmax(numpy.bincount(labels[neighbors.ids], minlength=n_classes)))


def train_enan(dataset, stable_window=sqrt_window, max_nane=MAX_NANE):
    """
    Training stage: k-d tree, natural neighbor eigenvalue, weighted kNN graph at k = NaNE, class-wise statistics.

    The graph reuses the eigenvalue-deep neighbor lists produced by the search; they come from the same tree with the
    same ordering rule, so rebuilding them would give identical arrays.

    :param dataset: Dataset with at least 2 points
    :return: EnanModel
    """
    index = build_index(dataset.points)
    nan_model = compute_nane(index, len(dataset), stable_window=stable_window, max_nane=max_nane)
    graph = WeightedKnnGraph(nan_model.knn_ids, nan_model.knn_distances, dataset.labels, nan_model.nane)
    stats = ClasswiseStats.from_graph(graph, dataset.n_classes)
    LOGGER.info('Trained ENaN on {}: NaNE = {}, T = {}.'.format(
        dataset.name, nan_model.nane, ', '.join('{:.4f}'.format(float(t)) for t in stats.statistic(nan_model.nane))))
    return EnanModel(index=index, graph=graph, stats=stats, class_names=dataset.class_names, nan_model=nan_model)


def query_k(model, z, fallback='lambda', mode='mutual'):
    """
    The query's own neighborhood size: its natural neighbor count, or the fallback when it has none.
    """
    k = num_natural_neighbors(model.nan_model, model.index, z, mode)
    if k == 0:
        if fallback == 'lambda':
            return model.nane
        if fallback == 'one':
            return 1
        raise ValueError('Unknown fallback {}, expected one of {}.'.format(fallback, FALLBACK_MODES))
    # One-directional counts are not bounded by the eigenvalue
    return min(k, model.nane)


def predict_enan(model, queries, fallback='lambda', mode='mutual', base='at_k', return_k=False):
    """
    Testing stage: each query is classified by ENN at its own natural neighbor count.

    :param model: EnanModel
    :param queries: sequence of raw feature vectors
    :param fallback: 'lambda' or 'one', the k used for queries without natural neighbors
    :param mode: natural neighbor counting mode, see num_natural_neighbors()
    :param base: base statistic mode, see class_scores()
    :param return_k: also return the k used for every query
    :return: array of class ids (and array of k values)
    """
    labels = []
    ks = []
    for z in scale_queries(model, queries):
        k = query_k(model, z, fallback, mode)
        ks.append(k)
        labels.append(enn_predict(model, z, k, base))
    labels = numpy.array(labels, dtype=int)
    if return_k:
        return labels, numpy.array(ks, dtype=int)
    return labels


def train_enn_fixed(dataset, k):
    """
    Plain ENN with a fixed neighborhood size.

    :param dataset: Dataset
    :param k: 1 <= k < number of training points
    :return: FixedEnnModel
    """
    if k < 1:
        raise ValueError('k must be at least 1, got {}.'.format(k))
    if k >= len(dataset):
        raise ValueError('k = {} needs more than {} training points.'.format(k, len(dataset)))
    index = build_index(dataset.points)
    graph = build_graph(index, dataset.labels, k)
    stats = ClasswiseStats.from_graph(graph, dataset.n_classes)
    return FixedEnnModel(index=index, graph=graph, stats=stats, class_names=dataset.class_names, k=k)


def predict_enn_fixed(model, queries, base='at_k'):
    return numpy.array([enn_predict(model, z, model.k, base) for z in scale_queries(model, queries)], dtype=int)


def resolve_k(k, training_size):
    """
    Turn a k grid entry (an integer or 'sqrt') into a concrete neighborhood size for a training set.
    """
    if k == 'sqrt':
        return sqrt_k(training_size)
    return int(k)


def clamp_k(k, limit, where):
    """
    k capped at limit, the largest neighborhood the training data can supply. A cap is logged as a warning.
    """
    if k > limit:
        LOGGER.warning('k = {} is too large for {}, using k = {}.'.format(k, where, limit))
        return limit
    return k


def scale_queries(model, queries):
    """
    Raw query rows mapped into the space the model was trained in.
    """
    queries = numpy.atleast_2d(numpy.asarray(queries, dtype=float))
    if model.scaling is None:
        return queries
    return model.scaling.apply(queries)


def train_enn_cv(dataset, k_grid=(1, 3, 5, 'sqrt'), n_folds=10, seed=0):
    """
    ENN with k picked from the grid by stratified cross-validation on the training data, then retrained on all of it.
    Ties go to the grid entry listed first.

    :return: (FixedEnnModel, chosen grid entry)
    """
    n_folds = min(n_folds, len(dataset))
    plan = stratified_kfold(dataset, n_folds, seed)
    best_entry = None
    best_accuracy = -1.0
    for entry in k_grid:
        accuracies = []
        for train, test in plan.folds:
            k = clamp_k(resolve_k(entry, len(train)), len(train) - 1, 'an inner fold of ' + dataset.name)
            inner = train_enn_fixed(dataset.subset(train), k)
            predictions = predict_enn_fixed(inner, dataset.points[test])
            accuracies.append(numpy.mean(predictions == dataset.labels[test]))
        accuracy = float(numpy.mean(accuracies))
        LOGGER.info('Inner CV on {}: k = {} accuracy {:.4f}.'.format(dataset.name, entry, accuracy))
        if accuracy > best_accuracy:
            best_entry, best_accuracy = entry, accuracy
    k = clamp_k(resolve_k(best_entry, len(dataset)), len(dataset) - 1, dataset.name)
    return train_enn_fixed(dataset, k), best_entry
