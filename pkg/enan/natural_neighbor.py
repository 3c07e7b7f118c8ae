import logging
import math
import warnings
from dataclasses import dataclass

import numpy
import scipy.sparse

from enan.spatial_index import euclidean_distances

LOGGER = logging.getLogger(__name__)

"""
Natural neighbor search. Rounds r = 1, 2, ... grow every point's neighborhood by one rank; two points become natural
neighbors once each sits in the other's r nearest neighbors. The search stops at the Stable Searching State and the
round reached becomes the natural neighbor eigenvalue (NaNE, here `nane`), which later plays the part of k.
"""

MAX_NANE = 64
INITIAL_DEPTH = 8
QUERY_MODES = ('mutual', 'one_directional')


# Raised when the search cannot run at all (fewer than two points, mismatched index)
class NaturalNeighborException(Exception):
    pass


# Emitted when the search hits its round cap without reaching a stable state
class NaneCapWarning(UserWarning):
    pass


def sqrt_window(round_number):
    """
    Default stable-state window: the zero-neighbor count must stay put for ceil(sqrt(r)) rounds.
    """
    return math.ceil(math.sqrt(round_number))


@dataclass(frozen=True)
class NaturalNeighborModel:
    nane: int
    knn_ids: numpy.ndarray
    knn_distances: numpy.ndarray
    nan_sets: tuple
    rounds_log: tuple
    stable_fallback: bool = False
    capped: bool = False

    @property
    def nan_counts(self):
        return numpy.array([len(neighbors) for neighbors in self.nan_sets], dtype=int)

    @property
    def point_count(self):
        return len(self.nan_sets)


def _mutual_rounds(ids):
    """
    For every pair that appears in each other's lists, the first round at which they are mutual: max of the two ranks.

    :param ids: (m, depth) neighbor ids, row i ordered by distance from point i
    :return: csr matrix, entry (i, j) = round at which i and j become natural neighbors, absent if not within depth
    """
    m, depth = ids.shape
    rows = numpy.repeat(numpy.arange(m), depth)
    ranks = numpy.tile(numpy.arange(1, depth + 1), m)
    rank_matrix = scipy.sparse.csr_matrix((ranks, (rows, ids.ravel())), shape=(m, m))
    transposed = rank_matrix.transpose().tocsr()
    both = rank_matrix.multiply(transposed > 0)
    pair_rounds = both.maximum(transposed.multiply(rank_matrix > 0)).tocsr()
    pair_rounds.eliminate_zeros()
    return pair_rounds


def _first_mutual_round(pair_rounds):
    m = pair_rounds.shape[0]
    first = numpy.full(m, numpy.inf)
    lengths = numpy.diff(pair_rounds.indptr)
    nonempty = lengths > 0
    if nonempty.any():
        starts = pair_rounds.indptr[:-1][nonempty]
        first[nonempty] = numpy.minimum.reduceat(pair_rounds.data, starts)
    return first


def compute_nane(index, point_count=None, stable_window=sqrt_window, max_nane=MAX_NANE):
    """
    Run the natural neighbor search over every point of the index.

    A round ends the search when every point has at least one natural neighbor, or when the number of points without
    one has not changed for stable_window(r) consecutive rounds. Points that never find a partner (noise) keep a count
    of 0.

    :param index: SpatialIndex over the training points
    :param point_count: expected number of points, checked against the index
    :param stable_window: callable giving the stable-state window for round r
    :param max_nane: hard cap on the eigenvalue (further capped at m - 1)
    :return: NaturalNeighborModel
    """
    m = index.point_count
    if point_count is not None and point_count != m:
        raise NaturalNeighborException('Index holds {} points, expected {}.'.format(m, point_count))
    if m < 2:
        raise NaturalNeighborException('Natural neighbor search needs at least 2 points, got {}.'.format(m))

    cap = min(m - 1, max_nane)
    depth = min(cap, INITIAL_DEPTH)
    ids, distances = index.knn_all(depth)
    first_round = _first_mutual_round(_mutual_rounds(ids))

    rounds_log = []
    previous_zero_count = m
    unchanged = 0
    stable_fallback = False
    capped = False
    r = 0
    while True:
        r += 1
        if r > depth:
            depth = min(cap, depth * 2)
            LOGGER.info('Deepening neighbor lists to {} at round {}.'.format(depth, r))
            ids, distances = index.knn_all(depth)
            first_round = _first_mutual_round(_mutual_rounds(ids))
        zero_count = int(numpy.count_nonzero(first_round > r))
        rounds_log.append(zero_count)
        if zero_count == 0:
            break
        unchanged = unchanged + 1 if zero_count == previous_zero_count else 0
        previous_zero_count = zero_count
        if unchanged >= stable_window(r):
            stable_fallback = True
            LOGGER.info('Stable searching state reached at round {} with {} points lacking natural neighbors.'
                        .format(r, zero_count))
            break
        if r >= cap:
            capped = True
            message = 'Natural neighbor search stopped at the cap of {} rounds with {} points lacking natural ' \
                      'neighbors.'.format(cap, zero_count)
            LOGGER.warning(message)
            warnings.warn(message, NaneCapWarning)
            break

    nane = r
    ids = numpy.ascontiguousarray(ids[:, :nane])
    distances = numpy.ascontiguousarray(distances[:, :nane])
    pair_rounds = _mutual_rounds(ids)
    nan_sets = tuple(
        frozenset(int(j) for j in pair_rounds.indices[pair_rounds.indptr[i]:pair_rounds.indptr[i + 1]])
        for i in range(m)
    )
    ids.setflags(write=False)
    distances.setflags(write=False)
    LOGGER.info('Natural neighbor eigenvalue {} for {} points.'.format(nane, m))
    return NaturalNeighborModel(nane=nane, knn_ids=ids, knn_distances=distances, nan_sets=nan_sets,
                                rounds_log=tuple(rounds_log), stable_fallback=stable_fallback, capped=capped)


def num_natural_neighbors(model, index, query, mode='mutual'):
    """
    Natural neighbor count of an unseen query at the trained eigenvalue.

    In 'mutual' mode a training point j counts when j is among the query's nane nearest training points and the query
    would enter j's nane nearest neighbors if it were inserted. The query loses distance ties, so it enters only when
    strictly closer than j's current nane-th neighbor. 'one_directional' drops the first condition.

    :param model: NaturalNeighborModel trained on the index's points
    :param index: SpatialIndex
    :param query: feature vector
    :param mode: 'mutual' or 'one_directional'
    :return: int
    """
    query = index.check_query(query)
    radius = model.knn_distances[:, model.nane - 1]
    if mode == 'mutual':
        neighbors = index.knn(query, model.nane)
        return int(numpy.count_nonzero(neighbors.distances < radius[neighbors.ids]))
    if mode == 'one_directional':
        return int(numpy.count_nonzero(euclidean_distances(index.points, query) < radius))
    raise ValueError('Unknown natural neighbor mode {}, expected one of {}.'.format(mode, QUERY_MODES))


def nan_edges(model):
    """
    Undirected natural neighbor edges as (i, j, distance) with i < j, ordered by i then j.
    """
    edges = []
    for i, neighbors in enumerate(model.nan_sets):
        row_ids = model.knn_ids[i]
        for j in sorted(neighbors):
            if j <= i:
                continue
            rank = int(numpy.flatnonzero(row_ids == j)[0])
            edges.append((i, j, float(model.knn_distances[i, rank])))
    return edges
