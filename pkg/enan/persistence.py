import logging
import os

import numpy

from enan.data_io import FeatureScaling
from enan.classification import ClasswiseStats, EnanModel, FixedEnnModel, WeightedKnnGraph
from enan.natural_neighbor import NaturalNeighborModel
from enan.spatial_index import build_index

LOGGER = logging.getLogger(__name__)

"""
Saves a trained model to a compressed numpy .npz archive and loads it back, ready to predict without retraining.
Only the k-d tree is rebuilt on load (from the stored training points); every statistic comes from the file.

Layout of format version 1:
    format_version  int, 1
    kind            'enan' or 'enn'
    k_max           graph depth (NaNE for enan, k for enn)
    points          (m, d) float training points
    labels          (m,) int class ids
    class_names     (C,) str original label strings
    knn_ids         (m, L) int neighbor ids, L = min(k_max, m - 1)
    knn_distances   (m, L) float neighbor distances
    prefix_hits     (m, L) int running same-class counts along each list
    nan_edges       (E, 2) int natural neighbor pairs i < j (enan only)
    rounds_log      (R,) int points without natural neighbors after each round (enan only)
    flags           (2,) bool stable-state fallback used, cap reached (enan only)
    feature_min     (d,) float column minimum of the raw training data (models trained on min-max scaled data only)
    feature_span    (d,) float column max - min, paired with feature_min
"""

FORMAT_VERSION = 1


# Raised when a file is not a model dump this version can read
class ModelFormatException(Exception):
    pass


def save_model(model, path):
    """
    :param model: EnanModel or FixedEnnModel
    :param path: destination, conventionally ending in .npz
    """
    LOGGER.info('Saving ' + path)
    if len(os.path.dirname(path)) > 0:
        os.makedirs(os.path.dirname(path), exist_ok=True)
    arrays = {
        'format_version': numpy.array(FORMAT_VERSION),
        'k_max': numpy.array(model.graph.k_max),
        'points': model.index.points,
        'labels': model.graph.labels,
        'class_names': numpy.array(model.class_names, dtype=str),
        'knn_ids': model.graph.ids,
        'knn_distances': model.graph.distances,
        'prefix_hits': model.stats.prefix_hits,
    }
    if model.scaling is not None:
        arrays['feature_min'] = model.scaling.low
        arrays['feature_span'] = model.scaling.span
    if isinstance(model, EnanModel):
        nan_model = model.nan_model
        edges = [(i, j) for i, neighbors in enumerate(nan_model.nan_sets) for j in neighbors if i < j]
        arrays['kind'] = numpy.array('enan')
        arrays['nan_edges'] = numpy.array(edges, dtype=numpy.int64).reshape(-1, 2)
        arrays['rounds_log'] = numpy.array(nan_model.rounds_log, dtype=numpy.int64)
        arrays['flags'] = numpy.array([nan_model.stable_fallback, nan_model.capped])
    elif isinstance(model, FixedEnnModel):
        arrays['kind'] = numpy.array('enn')
    else:
        raise ValueError('Cannot save a model of type {}.'.format(type(model).__name__))
    with open(path, 'wb') as model_file:
        numpy.savez_compressed(model_file, **arrays)


def load_model(path):
    """
    :param path: file written by save_model()
    :return: EnanModel or FixedEnnModel
    """
    LOGGER.info('Loading ' + path)
    try:
        archive = numpy.load(path, allow_pickle=False)
    except (OSError, ValueError) as e:
        raise ModelFormatException('Could not read model file {}: {}'.format(path, e))
    with archive:
        try:
            version = int(archive['format_version'])
            if version != FORMAT_VERSION:
                raise ModelFormatException('Model file {} has format version {}, expected {}.'.format(
                    path, version, FORMAT_VERSION))
            kind = str(archive['kind'])
            k_max = int(archive['k_max'])
            points = archive['points']
            labels = archive['labels']
            class_names = tuple(str(name) for name in archive['class_names'])
            ids = archive['knn_ids']
            distances = archive['knn_distances']
            prefix_hits = archive['prefix_hits']
            scaling = None
            if 'feature_min' in archive.files:
                try:
                    scaling = FeatureScaling(archive['feature_min'], archive['feature_span'])
                except ValueError as e:
                    raise ModelFormatException('Model file {} has an invalid feature scaling: {}'.format(path, e))
            if kind == 'enan':
                nan_edges = archive['nan_edges']
                rounds_log = tuple(int(count) for count in archive['rounds_log'])
                stable_fallback, capped = (bool(flag) for flag in archive['flags'])
        except KeyError as e:
            raise ModelFormatException('Model file {} is missing {}.'.format(path, e))

    index = build_index(points)
    graph = WeightedKnnGraph(ids, distances, labels, k_max)
    stats = ClasswiseStats(prefix_hits, numpy.bincount(labels, minlength=len(class_names)), labels)
    if kind == 'enn':
        return FixedEnnModel(index=index, graph=graph, stats=stats, class_names=class_names, k=k_max,
                             scaling=scaling)
    if kind != 'enan':
        raise ModelFormatException('Unknown model kind {} in {}.'.format(kind, path))
    neighbor_sets = [set() for _ in range(len(points))]
    for i, j in nan_edges:
        neighbor_sets[i].add(int(j))
        neighbor_sets[j].add(int(i))
    nan_model = NaturalNeighborModel(nane=k_max, knn_ids=ids, knn_distances=distances,
                                     nan_sets=tuple(frozenset(neighbors) for neighbors in neighbor_sets),
                                     rounds_log=rounds_log, stable_fallback=stable_fallback, capped=capped)
    return EnanModel(index=index, graph=graph, stats=stats, class_names=class_names, nan_model=nan_model,
                     scaling=scaling)
