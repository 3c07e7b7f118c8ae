import logging
from dataclasses import dataclass

import numpy
from scipy.spatial import cKDTree

LOGGER = logging.getLogger(__name__)

"""
Exact k-nearest-neighbor search over a fixed set of training points.

The heavy lifting is done by scipy's cKDTree built with median splits. The tree only proposes candidates: every
distance handed back to callers is recomputed with euclidean_distances() and results are ordered by (distance, id), so
ties always go to the lower point id and the answer is identical to a linear scan.
"""

LEAF_SIZE = 16
# Relative slack used to decide that two distances might be tied once float noise from the tree is accounted for
TIE_TOLERANCE = 1e-9


# Raised when a query cannot be answered (rank beyond the candidate count, wrong dimension)
class IndexQueryException(Exception):
    pass


@dataclass(frozen=True)
class NeighborList:
    """
    Ordered (point_id, distance) pairs, nondecreasing in distance.
    """
    ids: numpy.ndarray
    distances: numpy.ndarray

    def __len__(self):
        return len(self.ids)

    def __getitem__(self, position):
        return int(self.ids[position]), float(self.distances[position])

    def __iter__(self):
        for position in range(len(self.ids)):
            yield self[position]

    def pairs(self):
        return list(self)


def euclidean_distances(points, query):
    """
    Euclidean distance from query to every row of points. All distances in the package go through here, so the same
    pair of points always yields the same float regardless of which side asked.
    """
    return numpy.sqrt(numpy.sum((points - query) ** 2, axis=1))


def _ordered(ids, distances):
    order = numpy.lexsort((ids, distances))
    return ids[order], distances[order]


def brute_force_knn(points, query, k, exclude=None):
    """
    Linear scan k-nearest-neighbor search with the same ordering rules as SpatialIndex.knn().

    :param points: (m, d) array of training points
    :param query: feature vector of length d
    :param k: number of neighbors wanted
    :param exclude: optional point id to leave out
    :return: NeighborList
    """
    points = numpy.asarray(points, dtype=float)
    ids = numpy.arange(len(points))
    if exclude is not None:
        ids = ids[ids != exclude]
    distances = euclidean_distances(points[ids], numpy.asarray(query, dtype=float))
    ids, distances = _ordered(ids, distances)
    return NeighborList(ids[:k], distances[:k])


class SpatialIndex:
    """
    Immutable k-d tree over the training points. Queries never modify the index, so one instance can be shared by any
    number of readers.
    """

    def __init__(self, points):
        try:
            points = numpy.array(points, dtype=float)
        except ValueError:
            raise ValueError('All points must have the same dimension.')
        if points.ndim == 1 and points.size > 0:
            raise ValueError('Points must be given as a sequence of feature vectors.')
        if points.ndim != 2 or points.shape[0] == 0:
            raise ValueError('Cannot build an index over an empty point set.')
        if points.shape[1] == 0:
            raise ValueError('Points must have at least one dimension.')
        points.setflags(write=False)
        self.points = points
        self.tree = cKDTree(points, leafsize=LEAF_SIZE, balanced_tree=True, compact_nodes=True)

    @property
    def point_count(self):
        return self.points.shape[0]

    @property
    def dimension(self):
        return self.points.shape[1]

    def check_query(self, query):
        query = numpy.asarray(query, dtype=float)
        if query.ndim != 1 or query.shape[0] != self.dimension:
            raise IndexQueryException('Query has dimension {}, index has dimension {}.'.format(
                query.shape[-1] if query.ndim else 0, self.dimension))
        return query

    def knn(self, query, k, exclude=None):
        """
        The min(k, available) nearest training points to query, sorted by distance then by id.

        :param query: feature vector
        :param k: number of neighbors, at least 1
        :param exclude: optional point id which is never returned (self-exclusion is by id, not by zero distance)
        :return: NeighborList
        """
        query = self.check_query(query)
        if k < 1:
            raise ValueError('k must be at least 1, got {}.'.format(k))
        available = self.point_count - (0 if exclude is None else 1)
        k = min(k, available)
        if k <= 0:
            return NeighborList(numpy.empty(0, dtype=numpy.intp), numpy.empty(0))
        if self.point_count <= LEAF_SIZE:
            # The whole set is one leaf
            return brute_force_knn(self.points, query, k, exclude)

        fetch = min(k + 2, self.point_count)
        _, ids = self.tree.query(query, k=fetch)
        ids = numpy.atleast_1d(ids).astype(numpy.intp)
        if exclude is not None:
            ids = ids[ids != exclude]
        distances = euclidean_distances(self.points[ids], query)
        ids, distances = _ordered(ids, distances)

        if len(ids) > k and distances[k] <= distances[k - 1] * (1 + TIE_TOLERANCE) + TIE_TOLERANCE:
            # Points tied with the k-th neighbor may have been left out by the tree, widen to all of them
            radius = distances[k - 1] * (1 + 2 * TIE_TOLERANCE) + 2 * TIE_TOLERANCE
            ids = numpy.array(self.tree.query_ball_point(query, radius), dtype=numpy.intp)
            if exclude is not None:
                ids = ids[ids != exclude]
            distances = euclidean_distances(self.points[ids], query)
            ids, distances = _ordered(ids, distances)
        return NeighborList(ids[:k], distances[:k])

    def rth_neighbor(self, query, r, exclude=None):
        """
        The r-th (1-based) nearest neighbor of query as a (point_id, distance) pair.
        """
        neighbors = self.knn(query, r, exclude)
        if len(neighbors) < r:
            raise IndexQueryException('Asked for neighbor {} but only {} candidates exist.'.format(r, len(neighbors)))
        return neighbors[r - 1]

    def knn_all(self, k):
        """
        Self-excluded k-nearest-neighbor lists for every indexed point, in one batched tree query.

        :param k: list length; clipped to point_count - 1
        :return: (ids, distances), both of shape (point_count, min(k, point_count - 1))
        """
        m = self.point_count
        k = min(k, m - 1)
        if k < 1:
            return numpy.empty((m, 0), dtype=numpy.intp), numpy.empty((m, 0))
        fetch = min(k + 2, m)
        _, ids = self.tree.query(self.points, k=fetch)
        ids = ids.reshape(m, fetch).astype(numpy.intp)
        rows = numpy.arange(m)
        distances = numpy.sqrt(numpy.sum((self.points[ids] - self.points[:, None, :]) ** 2, axis=2))
        is_self = ids == rows[:, None]
        # Drop self by pushing it behind every real candidate
        distances[is_self] = numpy.inf
        order = numpy.lexsort((ids, distances), axis=1)
        ids = numpy.take_along_axis(ids, order, axis=1)
        distances = numpy.take_along_axis(distances, order, axis=1)

        valid = fetch - is_self.sum(axis=1)
        suspect = numpy.zeros(m, dtype=bool)
        if fetch > k:
            has_next = valid > k
            suspect[has_next] = distances[has_next, k] <= \
                distances[has_next, k - 1] * (1 + TIE_TOLERANCE) + TIE_TOLERANCE
        ids = ids[:, :k].copy()
        distances = distances[:, :k].copy()
        for row in numpy.flatnonzero(suspect):
            neighbors = self.knn(self.points[row], k, exclude=row)
            ids[row] = neighbors.ids
            distances[row] = neighbors.distances
        if suspect.any():
            LOGGER.info('Resolved {} boundary ties in batched neighbor lists.'.format(int(suspect.sum())))
        return ids, distances


def build_index(points):
    """
    Build an exact k-nearest-neighbor index over the training points.

    :param points: sequence of feature vectors with a shared dimension
    :return: SpatialIndex
    """
    index = SpatialIndex(points)
    LOGGER.info('Built k-d tree over {} points of dimension {}.'.format(index.point_count, index.dimension))
    return index


def knn(index, query, k, exclude=None):
    return index.knn(query, k, exclude)


def rth_neighbor(index, query, r, exclude=None):
    return index.rth_neighbor(query, r, exclude)
