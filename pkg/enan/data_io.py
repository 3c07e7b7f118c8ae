import csv
import io
import logging
import os
from dataclasses import dataclass

import numpy

LOGGER = logging.getLogger(__name__)

"""
Labeled datasets in UCI-style CSV form: loading with positional error reporting, writing back out, min-max scaling,
deterministic stratified folds and a couple of synthetic shapes for graph exports.
"""

MISSING_VALUES = {'', '?', 'na', 'nan', 'null', 'none'}


# Raised for any problem reading a dataset file. Row and column are 1-based positions in the file, when known.
class DatasetFormatException(Exception):
    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        position = []
        if row is not None:
            position.append('row {}'.format(row))
        if column is not None:
            position.append('column {}'.format(column))
        if position:
            message = '{} ({})'.format(message, ', '.join(position))
        super().__init__(message)


@dataclass(frozen=True)
class Dataset:
    points: numpy.ndarray
    labels: numpy.ndarray
    class_names: tuple
    name: str = 'dataset'

    def __post_init__(self):
        object.__setattr__(self, 'points', numpy.asarray(self.points, dtype=float))
        object.__setattr__(self, 'labels', numpy.asarray(self.labels, dtype=int))
        object.__setattr__(self, 'class_names', tuple(self.class_names))
        if self.points.ndim != 2 or self.points.shape[1] < 1:
            raise ValueError('Dataset points must be an (n, d) array with d >= 1.')
        if len(self.labels) != len(self.points):
            raise ValueError('Dataset has {} points but {} labels.'.format(len(self.points), len(self.labels)))
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise ValueError('Label ids must lie in [0, {}).'.format(len(self.class_names)))
        if not numpy.isfinite(self.points).all():
            raise ValueError('Dataset contains non-finite feature values.')
        self.points.setflags(write=False)
        self.labels.setflags(write=False)

    def __len__(self):
        return len(self.points)

    @property
    def dimension(self):
        return self.points.shape[1]

    @property
    def n_classes(self):
        return len(self.class_names)

    def label_names(self, label_ids):
        return [self.class_names[label] for label in label_ids]

    def subset(self, indices):
        """
        Rows at the given indices. The class table is kept whole so label ids stay comparable across folds.
        """
        indices = numpy.asarray(indices, dtype=numpy.intp)
        return Dataset(numpy.array(self.points[indices]), numpy.array(self.labels[indices]), self.class_names,
                       self.name)


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple
    seed: int
    n_folds: int
    fold_of: numpy.ndarray


def _resolve_label_column(label_column, header, n_columns):
    if label_column in (None, 'last'):
        return n_columns - 1
    if label_column == 'first':
        return 0
    if isinstance(label_column, str):
        try:
            label_column = int(label_column)
        except ValueError:
            if header is None:
                raise DatasetFormatException('Label column "{}" given by name but the file has no header.'
                                             .format(label_column))
            names = [name.strip() for name in header]
            if label_column not in names:
                raise DatasetFormatException('Label column "{}" not found in header.'.format(label_column), row=1)
            return names.index(label_column)
    if not -n_columns <= label_column < n_columns:
        raise DatasetFormatException('Label column {} out of range for {} columns.'.format(label_column, n_columns))
    return label_column % n_columns


def _line_of(content, offset):
    return content.count(b'\n', 0, offset) + 1


def _read_rows(content, path):
    """
    Decode raw file bytes as UTF-8 CSV. Returns (line number, cells) for every nonblank row.
    """
    if b'\x00' in content:
        raise DatasetFormatException('{} contains a NUL byte.'.format(path),
                                     row=_line_of(content, content.index(b'\x00')))
    try:
        text = content.decode('utf-8-sig')
    except UnicodeDecodeError as e:
        raise DatasetFormatException('{} is not UTF-8 text: {}.'.format(path, e.reason),
                                     row=_line_of(content, e.start))
    reader = csv.reader(io.StringIO(text, newline=''))
    rows = []
    try:
        for row in reader:
            if any(cell.strip() for cell in row):
                rows.append((reader.line_num, row))
    except csv.Error as e:
        raise DatasetFormatException('Malformed CSV in {}: {}.'.format(path, e), row=reader.line_num)
    return rows


def load_csv(path, label_column='last', has_header=False, name=None):
    """
    Load a comma-separated dataset. Label strings are mapped to dense ids in order of first appearance.

    :param path: path of the CSV file
    :param label_column: column index (0-based, negative allowed), 'first', 'last', or a header name
    :param has_header: whether the first row holds column names
    :param name: dataset name, defaults to the file name without extension
    :return: Dataset
    """
    if name is None:
        name = os.path.splitext(os.path.basename(path))[0]
    try:
        with open(path, 'rb') as csv_file:
            content = csv_file.read()
    except OSError as e:
        raise DatasetFormatException('Could not read {}: {}'.format(path, e.strerror or e))
    rows = _read_rows(content, path)

    header = None
    if has_header and rows:
        header = rows.pop(0)[1]
    if not rows:
        raise DatasetFormatException('{} contains no data rows.'.format(path))

    n_columns = len(rows[0][1]) if header is None else len(header)
    if n_columns < 2:
        raise DatasetFormatException('Need at least one feature column and one label column.', row=rows[0][0])
    label_index = _resolve_label_column(label_column, header, n_columns)
    feature_columns = [column for column in range(n_columns) if column != label_index]

    points = numpy.empty((len(rows), n_columns - 1))
    labels = numpy.empty(len(rows), dtype=int)
    label_ids = {}
    for position, (line_number, row) in enumerate(rows):
        if len(row) != n_columns:
            raise DatasetFormatException('Expected {} columns, found {}.'.format(n_columns, len(row)),
                                         row=line_number)
        for feature, column in enumerate(feature_columns):
            cell = row[column].strip()
            if cell.lower() in MISSING_VALUES:
                raise DatasetFormatException('Missing value.', row=line_number, column=column + 1)
            try:
                value = float(cell)
            except ValueError:
                raise DatasetFormatException('Non-numeric feature cell "{}".'.format(cell), row=line_number,
                                             column=column + 1)
            if not numpy.isfinite(value):
                raise DatasetFormatException('Non-finite feature cell "{}".'.format(cell), row=line_number,
                                             column=column + 1)
            points[position, feature] = value
        label = row[label_index].strip()
        if label.lower() in MISSING_VALUES:
            raise DatasetFormatException('Missing label.', row=line_number, column=label_index + 1)
        labels[position] = label_ids.setdefault(label, len(label_ids))

    dataset = Dataset(points, labels, tuple(label_ids), name)
    LOGGER.info('Loaded {}: {} points, {} features, {} classes.'.format(name, len(dataset), dataset.dimension,
                                                                          dataset.n_classes))
    return dataset


def save_csv(dataset, path, header=True):
    """
    Write a dataset as CSV, features first and the original label string last. Floats are written with repr() so
    load_csv() reads back exactly the same values.
    """
    if len(os.path.dirname(path)) > 0:
        os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as csv_file:
        writer = csv.writer(csv_file)
        if header:
            writer.writerow(['f{}'.format(column + 1) for column in range(dataset.dimension)] + ['label'])
        for point, label in zip(dataset.points, dataset.labels):
            writer.writerow([repr(float(value)) for value in point] + [dataset.class_names[label]])
    LOGGER.info('Saved ' + path)


def stratified_kfold(dataset, n_folds, seed):
    """
    Seeded stratified folds. Each class is shuffled and dealt round-robin over the folds, continuing from the fold
    where the previous class stopped, so per-class fold counts differ by at most one and so do fold sizes.

    :param dataset: Dataset
    :param n_folds: number of folds, at least 2
    :param seed: shuffle seed
    :return: FoldPlan
    """
    if n_folds < 2:
        raise ValueError('n_folds must be at least 2, got {}.'.format(n_folds))
    if n_folds > len(dataset):
        raise ValueError('n_folds ({}) exceeds the dataset size ({}).'.format(n_folds, len(dataset)))
    rng = numpy.random.default_rng(seed)
    fold_of = numpy.empty(len(dataset), dtype=int)
    offset = 0
    for label in range(dataset.n_classes):
        members = rng.permutation(numpy.flatnonzero(dataset.labels == label))
        fold_of[members] = (offset + numpy.arange(len(members))) % n_folds
        offset = (offset + len(members)) % n_folds
    folds = []
    for fold in range(n_folds):
        test = numpy.flatnonzero(fold_of == fold)
        train = numpy.flatnonzero(fold_of != fold)
        test.setflags(write=False)
        train.setflags(write=False)
        folds.append((train, test))
    fold_of.setflags(write=False)
    return FoldPlan(tuple(folds), seed, n_folds, fold_of)


def export_fold_plan(plan, path):
    """
    Audit file with one "row_index,fold_id" line per dataset row.
    """
    if len(os.path.dirname(path)) > 0:
        os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, 'w', newline='') as plan_file:
        writer = csv.writer(plan_file)
        writer.writerow(['row_index', 'fold_id'])
        for row, fold in enumerate(plan.fold_of):
            writer.writerow([row, int(fold)])


@dataclass(frozen=True)
class FeatureScaling:
    """
    Per-column min-max parameters fitted on one set of points, reusable for any other points in the same space.
    Constant columns (span 0) map to 0.
    """
    low: numpy.ndarray
    span: numpy.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'low', numpy.asarray(self.low, dtype=float))
        object.__setattr__(self, 'span', numpy.asarray(self.span, dtype=float))
        if self.low.ndim != 1 or self.low.shape != self.span.shape:
            raise ValueError('Scaling needs matching 1-d low and span arrays.')
        if (self.span < 0).any() or not numpy.isfinite(self.low).all() or not numpy.isfinite(self.span).all():
            raise ValueError('Scaling spans must be finite and nonnegative.')

    @property
    def dimension(self):
        return len(self.low)

    def apply(self, points):
        points = numpy.atleast_2d(numpy.asarray(points, dtype=float))
        if points.shape[1] != self.dimension:
            raise ValueError('Points have dimension {}, scaling was fitted on dimension {}.'.format(
                points.shape[1], self.dimension))
        scaled = numpy.zeros_like(points)
        varying = self.span > 0
        scaled[:, varying] = (points[:, varying] - self.low[varying]) / self.span[varying]
        return scaled


def fit_minmax(dataset):
    """
    :param dataset: Dataset with at least one point
    :return: FeatureScaling mapping the dataset's columns onto [0, 1]
    """
    if len(dataset) == 0:
        raise ValueError('Cannot normalize an empty dataset.')
    low = dataset.points.min(axis=0)
    return FeatureScaling(low, dataset.points.max(axis=0) - low)


def minmax_normalize(dataset, scaling=None):
    """
    Map every feature column to [0, 1] independently, or apply a scaling fitted elsewhere (for a test fold, with the
    training fold's parameters).
    """
    if scaling is None:
        scaling = fit_minmax(dataset)
    return Dataset(scaling.apply(dataset.points), numpy.array(dataset.labels), dataset.class_names, dataset.name)


def make_gaussian_blobs(n_per_class, centers, spread=1.0, seed=0, name='blobs'):
    """
    Isotropic Gaussian clusters, one class per center.
    """
    rng = numpy.random.default_rng(seed)
    centers = numpy.atleast_2d(numpy.asarray(centers, dtype=float))
    points = numpy.concatenate([center + spread * rng.standard_normal((n_per_class, centers.shape[1]))
                                for center in centers])
    labels = numpy.repeat(numpy.arange(len(centers)), n_per_class)
    return Dataset(points, labels, tuple('c{}'.format(label) for label in range(len(centers))), name)


def make_rings(n_per_ring, radii=(1.0, 3.0), noise=0.1, seed=0, name='rings'):
    """
    Concentric noisy circles in the plane, one class per ring.
    """
    rng = numpy.random.default_rng(seed)
    rings = []
    for radius in radii:
        angles = rng.uniform(0, 2 * numpy.pi, n_per_ring)
        ring = numpy.column_stack([numpy.cos(angles), numpy.sin(angles)]) * radius
        rings.append(ring + noise * rng.standard_normal(ring.shape))
    labels = numpy.repeat(numpy.arange(len(radii)), n_per_ring)
    return Dataset(numpy.concatenate(rings), labels, tuple('r{}'.format(label) for label in range(len(radii))), name)
