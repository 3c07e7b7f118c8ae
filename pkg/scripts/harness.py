import configparser
import csv
import logging
import multiprocessing
import os
import time
from dataclasses import dataclass, field
from datetime import datetime

import numpy

import enan

logging.basicConfig(level=logging.WARN, format="%(asctime)s %(levelname)s: %(message)s", datefmt="%Y-%m-%d  %H:%M:%S")
LOGGER = logging.getLogger(__name__)

"""
Evaluation engine: stratified cross-validation benchmarks over datasets and methods, accuracy-vs-k sweeps, natural
neighbor graph exports, and the report files behind them.

Each (dataset, method, fold) cell is an independent job. Jobs only read the shared dataset and fold plan and return
their own outcome, so they can be farmed out to a multiprocessing pool; aggregation happens afterwards in the parent.
Randomness enters only through the fold shuffle.
"""

METHODS = ('knn', 'enn', 'enan', 'enn-cv')
DEFAULT_K_GRID = (1, 3, 5, 'sqrt')
DEFAULT_METHODS = ('enn', 'enan')


# Raised for configs that cannot be read or describe an impossible experiment, and for datasets that fail to load
class ExperimentConfigException(Exception):
    pass


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    path: str
    label_column: object = 'last'
    header: bool = False

    def load(self):
        try:
            return enan.load_csv(self.path, label_column=self.label_column, has_header=self.header, name=self.name)
        except enan.DatasetFormatException as e:
            raise ExperimentConfigException('Failed to load dataset {}: {}'.format(self.name, e))


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple
    methods: tuple = DEFAULT_METHODS
    k_grid: tuple = DEFAULT_K_GRID
    n_folds: int = 10
    seed: int = 0
    normalize: bool = False
    output: str = 'results'

    def __post_init__(self):
        if len(self.datasets) == 0:
            raise ExperimentConfigException('The experiment needs at least one dataset.')
        if len(self.methods) == 0:
            raise ExperimentConfigException('The experiment needs at least one method.')
        unknown = [method for method in self.methods if method not in METHODS]
        if unknown:
            raise ExperimentConfigException('Unknown methods {}, expected some of {}.'.format(unknown, METHODS))
        if self.n_folds < 2:
            raise ExperimentConfigException('folds must be at least 2, got {}.'.format(self.n_folds))


@dataclass(frozen=True)
class MethodCell:
    """
    One column of the report: a method family plus its k grid entry where it has one.
    """
    family: str
    k: object = None
    k_grid: tuple = DEFAULT_K_GRID
    inner_folds: int = 10

    @property
    def label(self):
        names = {'knn': 'KNN', 'enn': 'ENN', 'enan': 'ENaN', 'enn-cv': 'ENN-CV'}
        if self.k is None:
            return names[self.family]
        return '{} k={}'.format(names[self.family], self.k)

    @property
    def slug(self):
        if self.k is None:
            return self.family
        return '{}-k{}'.format(self.family, self.k)


@dataclass
class FoldOutcome:
    dataset: str
    method: str
    fold: int
    accuracy: float = None
    rows: list = field(default_factory=list)
    runtime: float = 0.0
    error: str = None


@dataclass
class CellResult:
    dataset: str
    method: str
    fold_accuracies: list
    runtime: float
    valid: bool = True

    @property
    def mean(self):
        return 100 * float(numpy.mean(self.fold_accuracies))

    @property
    def std(self):
        return 100 * float(numpy.std(self.fold_accuracies))


@dataclass
class EvalReport:
    datasets: list
    methods: list
    cells: dict

    def cell(self, dataset, method):
        return self.cells[(dataset, method.slug)]

    def overall(self, method):
        """
        Unweighted mean over datasets of the rounded cell values, so the row agrees with the printed columns.
        Returns None when no dataset produced a valid cell.
        """
        cells = [self.cell(dataset, method) for dataset in self.datasets]
        cells = [cell for cell in cells if cell.valid]
        if not cells:
            return None
        mean = float(numpy.mean([round(cell.mean, 2) for cell in cells]))
        std = float(numpy.mean([round(cell.std, 2) for cell in cells]))
        return mean, std


def _parse_bool(value):
    return str(value).strip().lower() in ('1', 'yes', 'true', 'on')


def parse_k_grid(text):
    grid = []
    for entry in str(text).split(','):
        entry = entry.strip()
        if not entry:
            continue
        if entry == 'sqrt':
            grid.append('sqrt')
            continue
        try:
            k = int(entry)
        except ValueError:
            raise ExperimentConfigException('Bad k grid entry "{}", expected an integer or sqrt.'.format(entry))
        if k < 1:
            raise ExperimentConfigException('k grid entries must be at least 1, got {}.'.format(k))
        grid.append(k)
    if not grid:
        raise ExperimentConfigException('The k grid is empty.')
    return tuple(grid)


def load_experiment_config(path):
    """
    Reads an experiment config:

        [experiment]
        methods = enn, enan
        k_grid = 1, 3, 5, sqrt
        folds = 10
        seed = 0
        normalize = no
        output = results

        [dataset:iris]
        path = data/iris.csv
        label_column = last
        header = no

    Relative dataset paths are resolved against the config file's directory.

    :param path: config file path
    :return: ExperimentConfig
    """
    if not os.path.isfile(path):
        raise ExperimentConfigException('Config file not found: {}'.format(path))
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as e:
        raise ExperimentConfigException('Could not parse config file {}: {}'.format(path, e))
    base_dir = os.path.dirname(os.path.abspath(path))
    experiment = parser['experiment'] if parser.has_section('experiment') else {}
    datasets = []
    for section in parser.sections():
        if not section.startswith('dataset:'):
            continue
        block = parser[section]
        if 'path' not in block:
            raise ExperimentConfigException('Section [{}] in {} has no path.'.format(section, path))
        dataset_path = block['path']
        if not os.path.isabs(dataset_path):
            dataset_path = os.path.join(base_dir, dataset_path)
        datasets.append(DatasetSpec(name=section.split(':', 1)[1].strip(), path=dataset_path,
                                    label_column=block.get('label_column', 'last').strip(),
                                    header=_parse_bool(block.get('header', 'no'))))
    methods = tuple(method.strip() for method in experiment.get('methods', ', '.join(DEFAULT_METHODS)).split(',')
                    if method.strip())
    try:
        n_folds = int(experiment.get('folds', 10))
        seed = int(experiment.get('seed', 0))
    except ValueError as e:
        raise ExperimentConfigException('Bad number in {}: {}'.format(path, e))
    return ExperimentConfig(
        datasets=tuple(datasets),
        methods=methods,
        k_grid=parse_k_grid(experiment.get('k_grid', '1, 3, 5, sqrt')),
        n_folds=n_folds,
        seed=seed,
        normalize=_parse_bool(experiment.get('normalize', 'no')),
        output=experiment.get('output', 'results'),
    )


def expand_methods(methods, k_grid, n_folds=10):
    cells = []
    for family in methods:
        if family in ('knn', 'enn'):
            cells.extend(MethodCell(family, k) for k in k_grid)
        else:
            cells.append(MethodCell(family, k_grid=tuple(k_grid), inner_folds=n_folds))
    return cells


def fit_and_predict(cell, train, test_points, seed=0):
    """
    Train one method on a training split and label the test points.

    :return: (predicted class ids, neighborhood size used per test point)
    """
    if cell.family == 'knn':
        k = enan.clamp_k(enan.resolve_k(cell.k, len(train)), len(train), 'a training fold of ' + train.name)
        index = enan.build_index(train.points)
        predictions = [enan.knn_classify(index, train.labels, z, k, train.n_classes) for z in test_points]
        return numpy.array(predictions, dtype=int), numpy.full(len(test_points), k)
    if cell.family == 'enn':
        k = enan.clamp_k(enan.resolve_k(cell.k, len(train)), len(train) - 1, 'a training fold of ' + train.name)
        model = enan.train_enn_fixed(train, k)
        return enan.predict_enn_fixed(model, test_points), numpy.full(len(test_points), k)
    if cell.family == 'enan':
        model = enan.train_enan(train)
        return enan.predict_enan(model, test_points, return_k=True)
    if cell.family == 'enn-cv':
        model, entry = enan.train_enn_cv(train, cell.k_grid, cell.inner_folds, seed)
        LOGGER.info('Inner cross-validation on {} picked k = {} ({}).'.format(train.name, model.k, entry))
        return enan.predict_enn_fixed(model, test_points), numpy.full(len(test_points), model.k)
    raise ValueError('Unknown method {}.'.format(cell.family))


def evaluate_fold(job_args):
    """
    Runs one (dataset, method, fold) cell. Failures are caught and reported in the outcome so one bad cell does not
    stop the run. Arguments are packed in a tuple for multiprocessing. With normalize set, the min-max scaling is
    fitted on the training fold alone and applied to both sides.
    """
    dataset, cell, fold, train_index, test_index, seed, normalize = job_args
    start = time.perf_counter()
    outcome = FoldOutcome(dataset.name, cell.slug, fold)
    try:
        train = dataset.subset(train_index)
        test_points = dataset.points[test_index]
        if normalize:
            scaling = enan.fit_minmax(train)
            train = enan.minmax_normalize(train, scaling)
            test_points = scaling.apply(test_points)
        predictions, ks = fit_and_predict(cell, train, test_points, seed)
        truth = dataset.labels[test_index]
        outcome.accuracy = float(numpy.mean(predictions == truth))
        outcome.rows = [(int(row), dataset.class_names[true_label], dataset.class_names[predicted], int(k))
                        for row, true_label, predicted, k in zip(test_index, truth, predictions, ks)]
    except Exception as e:
        outcome.error = '{}: {}'.format(type(e).__name__, e)
        LOGGER.warning('Cell {} / {} fold {} failed: {}'.format(dataset.name, cell.slug, fold, outcome.error))
    outcome.runtime = time.perf_counter() - start
    return outcome


def run_jobs(jobs, number_of_worker_processes=1):
    if number_of_worker_processes <= 1:
        return [evaluate_fold(job) for job in jobs]
    pool = multiprocessing.Pool(number_of_worker_processes)
    outcomes = pool.map(evaluate_fold, jobs)
    pool.close()
    pool.join()
    return outcomes


def write_predictions(outcome, out_dir):
    path = os.path.join(out_dir, 'predictions_{}_{}_{}.csv'.format(outcome.dataset, outcome.method, outcome.fold))
    with open(path, 'w', newline='') as predictions_file:
        writer = csv.writer(predictions_file)
        writer.writerow(['row_index', 'true_label', 'predicted_label', 'k'])
        writer.writerows(outcome.rows)
    return path


def aggregate(outcomes, dataset_names, cells):
    grouped = {}
    for outcome in outcomes:
        grouped.setdefault((outcome.dataset, outcome.method), []).append(outcome)
    results = {}
    for dataset_name in dataset_names:
        for cell in cells:
            group = sorted(grouped.get((dataset_name, cell.slug), []), key=lambda outcome: outcome.fold)
            valid = len(group) > 0 and all(outcome.error is None for outcome in group)
            results[(dataset_name, cell.slug)] = CellResult(
                dataset=dataset_name,
                method=cell.label,
                fold_accuracies=[outcome.accuracy for outcome in group if outcome.error is None],
                runtime=sum(outcome.runtime for outcome in group),
                valid=valid)
            if not valid:
                LOGGER.warning('Cell {} / {} marked invalid.'.format(dataset_name, cell.label))
    return EvalReport(list(dataset_names), list(cells), results)


def run_benchmark(config, number_of_worker_processes=1):
    """
    Cross-validated accuracy of every configured method on every configured dataset.

    Writes the fold plans, one prediction dump per (dataset, method, fold), and the report files into config.output.

    :param config: ExperimentConfig
    :param number_of_worker_processes: size of the process pool, 1 runs in-process
    :return: EvalReport
    """
    datasets = [spec.load() for spec in config.datasets]

    os.makedirs(config.output, exist_ok=True)
    cells = expand_methods(config.methods, config.k_grid, config.n_folds)
    jobs = []
    for dataset in datasets:
        plan = enan.stratified_kfold(dataset, config.n_folds, config.seed)
        enan.export_fold_plan(plan, os.path.join(config.output, 'folds_{}.csv'.format(dataset.name)))
        for cell in cells:
            for fold, (train_index, test_index) in enumerate(plan.folds):
                jobs.append((dataset, cell, fold, train_index, test_index, config.seed, config.normalize))
    LOGGER.info('Running {} benchmark jobs.'.format(len(jobs)))

    outcomes = run_jobs(jobs, number_of_worker_processes)
    for outcome in outcomes:
        if outcome.error is None:
            write_predictions(outcome, config.output)
    report = aggregate(outcomes, [dataset.name for dataset in datasets], cells)
    write_report(report, config.output)
    return report


def _format_cell(cell):
    if not cell.valid:
        return 'invalid'
    return '{:.2f}±{:.2f}%'.format(cell.mean, cell.std)


def write_report(report, out_dir):
    """
    report.txt is a results table: datasets as rows, methods as columns, an OVERALL row.
    Only its first line carries a timestamp. report.csv holds the same numbers plus the raw per-fold accuracies and
    runtime.csv the wall time per cell.
    """
    os.makedirs(out_dir, exist_ok=True)
    header = ['Data sets'] + [method.label for method in report.methods]
    rows = []
    for dataset in report.datasets:
        rows.append([dataset] + [_format_cell(report.cell(dataset, method)) for method in report.methods])
    overall_row = ['OVERALL']
    for method in report.methods:
        overall = report.overall(method)
        overall_row.append('invalid' if overall is None else '{:.2f}±{:.2f}%'.format(*overall))
    rows.append(overall_row)
    widths = [max(len(row[column]) for row in [header] + rows) for column in range(len(header))]

    with open(os.path.join(out_dir, 'report.txt'), 'w', encoding='utf-8') as report_file:
        report_file.write('# generated {}\n'.format(datetime.now().strftime('%Y-%m-%d %H:%M:%S')))
        for row in [header] + rows:
            report_file.write('  '.join(value.ljust(width) for value, width in zip(row, widths)).rstrip() + '\n')

    with open(os.path.join(out_dir, 'report.csv'), 'w', newline='') as csv_file:
        writer = csv.writer(csv_file)
        writer.writerow(['dataset', 'method', 'mean', 'std', 'fold_accuracies'])
        for dataset in report.datasets:
            for method in report.methods:
                cell = report.cell(dataset, method)
                if cell.valid:
                    writer.writerow([dataset, method.label, '{:.2f}'.format(cell.mean), '{:.2f}'.format(cell.std),
                                     ' '.join('{:.4f}'.format(100 * accuracy) for accuracy in cell.fold_accuracies)])
                else:
                    writer.writerow([dataset, method.label, 'nan', 'nan', ''])
        for method in report.methods:
            overall = report.overall(method)
            if overall is None:
                writer.writerow(['OVERALL', method.label, 'nan', 'nan', ''])
            else:
                writer.writerow(['OVERALL', method.label, '{:.2f}'.format(overall[0]), '{:.2f}'.format(overall[1]),
                                 ''])

    with open(os.path.join(out_dir, 'runtime.csv'), 'w', newline='') as csv_file:
        writer = csv.writer(csv_file)
        writer.writerow(['dataset', 'method', 'seconds'])
        for dataset in report.datasets:
            for method in report.methods:
                writer.writerow([dataset, method.label, '{:.3f}'.format(report.cell(dataset, method).runtime)])
    LOGGER.info('Saved report to ' + out_dir)


def sweep_k(dataset, method, k_range, n_folds=10, seed=0, number_of_worker_processes=1, out_dir=None,
            normalize=False):
    """
    Cross-validated accuracy of knn or enn for each k in k_range, on the same folds run_benchmark() would use.

    :param dataset: Dataset
    :param method: 'knn' or 'enn'
    :param k_range: nonempty sequence of integers
    :param out_dir: when given, the series is written to sweep_<dataset>.csv there
    :param normalize: min-max scale each training fold, as run_benchmark() does
    :return: list of (k, mean accuracy %, std %)
    """
    if method not in ('knn', 'enn'):
        raise ValueError('sweep_k supports knn and enn, got {}.'.format(method))
    k_range = [int(k) for k in k_range]
    if not k_range:
        raise ValueError('k_range is empty.')
    plan = enan.stratified_kfold(dataset, n_folds, seed)
    smallest_train = min(len(train) for train, _ in plan.folds)
    if max(k_range) >= smallest_train:
        raise ValueError('Largest k ({}) must be below the smallest training fold size ({}).'.format(
            max(k_range), smallest_train))
    cells = [MethodCell(method, k) for k in k_range]
    jobs = [(dataset, cell, fold, train, test, seed, normalize)
            for cell in cells for fold, (train, test) in enumerate(plan.folds)]
    report = aggregate(run_jobs(jobs, number_of_worker_processes), [dataset.name], cells)
    series = []
    for cell in cells:
        result = report.cell(dataset.name, cell)
        series.append((cell.k, result.mean, result.std) if result.valid else (cell.k, float('nan'), float('nan')))
    if out_dir is not None:
        write_sweep(series, dataset.name, method, n_folds, seed, out_dir)
    return series


def write_sweep(series, dataset_name, method, n_folds, seed, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, 'sweep_{}.csv'.format(dataset_name))
    with open(path, 'w', newline='') as sweep_file:
        sweep_file.write('# {} accuracy by k, {}-fold stratified cross-validation, seed {}\n'.format(
            method, n_folds, seed))
        writer = csv.writer(sweep_file)
        writer.writerow(['k', 'mean', 'std'])
        for k, mean, std in series:
            writer.writerow([k, '{:.2f}'.format(mean), '{:.2f}'.format(std)])
    LOGGER.info('Saved ' + path)
    return path


def export_nan_artifacts(model, out_dir, prefix='nan'):
    """
    Plot-ready files for a trained natural neighbor model:
        <prefix>_edges.txt   "i j distance" per undirected natural neighbor edge
        <prefix>_counts.txt  "i count" per training point
        <prefix>_meta.txt    "nane <value>"

    :param model: EnanModel or NaturalNeighborModel
    :return: list of written paths
    """
    nan_model = getattr(model, 'nan_model', model)
    os.makedirs(out_dir, exist_ok=True)
    edges_path = os.path.join(out_dir, '{}_edges.txt'.format(prefix))
    counts_path = os.path.join(out_dir, '{}_counts.txt'.format(prefix))
    meta_path = os.path.join(out_dir, '{}_meta.txt'.format(prefix))
    with open(edges_path, 'w') as edges_file:
        for i, j, distance in enan.nan_edges(nan_model):
            edges_file.write('{} {} {!r}\n'.format(i, j, distance))
    with open(counts_path, 'w') as counts_file:
        for i, count in enumerate(nan_model.nan_counts):
            counts_file.write('{} {}\n'.format(i, int(count)))
    with open(meta_path, 'w') as meta_file:
        meta_file.write('nane {}\n'.format(nan_model.nane))
    LOGGER.info('Saved natural neighbor graph to ' + out_dir)
    return [edges_path, counts_path, meta_path]
