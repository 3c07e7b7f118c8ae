import argparse
import csv
import logging
import multiprocessing
import os
import sys
from dataclasses import replace
from datetime import datetime

import numpy

import enan
import harness

logging.basicConfig(level=logging.WARN, format="%(asctime)s %(levelname)s: %(message)s", datefmt="%Y-%m-%d  %H:%M:%S")
LOGGER = logging.getLogger(__name__)

"""
Command line front end for the natural neighbor classification toolkit.

    bench         run a cross-validation benchmark from a config file
    sweep         accuracy over a range of k for knn or enn
    train         train ENaN (or fixed-k ENN) on a CSV and save the model
    predict       label a CSV with a saved model
    export-graph  write the natural neighbor graph of a dataset as plot-ready text files

Run from the repository root with the root on PYTHONPATH, e.g. PYTHONPATH=. python scripts/classify.py bench -h
"""

HANDLED_ERRORS = (enan.DatasetFormatException, enan.ModelFormatException, enan.ModelStateException,
                  enan.NaturalNeighborException, enan.IndexQueryException, harness.ExperimentConfigException,
                  OSError, ValueError)


def main():
    sys.exit(cli_main(sys.argv[1:]))


def cli_main(argv):
    """
    :param argv: arguments without the program name
    :return: exit status, 0 on success
    """
    try:
        options = get_options(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    LOGGER.setLevel(options.verbose)
    logging.getLogger('enan').setLevel(options.verbose)
    logging.getLogger('harness').setLevel(options.verbose)
    start_time = datetime.now()
    LOGGER.info('Starting time: ' + str(start_time))
    try:
        options.handler(options)
    except HANDLED_ERRORS as e:
        LOGGER.error(str(e).splitlines()[0] if str(e) else type(e).__name__)
        return 1
    end_time = datetime.now()
    LOGGER.info('End time: ' + str(end_time))
    elapsed_time = end_time - start_time
    LOGGER.info('Elapsed time: ' + str(elapsed_time))
    return 0


def get_worker_count(choice):
    if choice == "single":
        return 1
    elif choice == "all":
        return multiprocessing.cpu_count()
    return max(1, multiprocessing.cpu_count() - 1)


def argument_groups(parser):
    parser._action_groups.pop()
    return parser.add_argument_group('Required arguments'), parser.add_argument_group('Optional arguments')


def add_verbose_option(optional):
    optional.add_argument(
        '-v', '--verbose',
        help='Increase output verbosity',
        action='store_const',
        const=logging.INFO,
        default=logging.WARN
    )


def add_dataset_options(required, optional, data_required=True, normalize=True):
    (required if data_required else optional).add_argument(
        '--data',
        help='Path of the CSV dataset.',
        required=data_required
    )
    optional.add_argument(
        '--label_column',
        help='Label column: an index (0-based, negative counts from the end), first, last, or a header name. '
             'Defaults to last.',
        default='last'
    )
    optional.add_argument(
        '--header',
        help='The CSV has a header row.',
        action='store_true'
    )
    if normalize:
        optional.add_argument(
            '--normalize',
            help='Min-max scale every feature column to [0, 1] before use. Off by default (raw features).',
            action='store_true'
        )


def add_cv_options(optional):
    optional.add_argument(
        '--folds',
        help='Number of cross-validation folds. Default: 10',
        type=int
    )
    optional.add_argument(
        '--seed',
        help='Seed of the fold shuffle. Default: 0',
        type=int
    )
    optional.add_argument(
        '--multiprocessing',
        help='Number of processes to use in multiprocessing. Options: single, all_but_one, all. Defaults to '
             'single.',
        choices=["single", "all_but_one", "all"],
        default="single",
    )


def get_options(argv):
    """
    Parses command line arguments. Each subcommand stores its handler in options.handler.

    Required arguments:
        bench: config
        sweep, train: data (train also model)
        predict: data, model
        export-graph: output, plus data unless synthetic is given

    Run this with the -h (help) argument for more detailed information. (python classify.py bench -h)

    :return:
    """
    parser = argparse.ArgumentParser(description='Natural neighbor classification toolkit.')
    subparsers = parser.add_subparsers(dest='command', required=True)

    bench = subparsers.add_parser('bench', help='Run a cross-validation benchmark from a config file.')
    required, optional = argument_groups(bench)
    required.add_argument(
        '--config',
        help='Path of the experiment config file.',
        required=True
    )
    optional.add_argument(
        '--output',
        help='Directory for reports and prediction dumps. Overrides the config file.'
    )
    optional.add_argument(
        '--normalize',
        help='Min-max scale features. Overrides the config file.',
        action='store_true'
    )
    add_cv_options(optional)
    add_verbose_option(optional)
    bench.set_defaults(handler=run_bench)

    sweep = subparsers.add_parser('sweep', help='Accuracy over a range of k.')
    required, optional = argument_groups(sweep)
    add_dataset_options(required, optional)
    optional.add_argument(
        '--method',
        help='Classifier to sweep. Options: knn, enn.',
        choices=['knn', 'enn'],
        default='enn'
    )
    optional.add_argument(
        '--k',
        help='Values of k to evaluate, e.g. 1 3 5 7. Overrides --k_min/--k_max.',
        nargs='+',
        type=int
    )
    optional.add_argument('--k_min', help='Smallest k. Default: 1', type=int, default=1)
    optional.add_argument('--k_max', help='Largest k. Default: 25', type=int, default=25)
    optional.add_argument('--output', help='Directory for sweep_<dataset>.csv. Default: results', default='results')
    add_cv_options(optional)
    add_verbose_option(optional)
    sweep.set_defaults(handler=run_sweep)

    train = subparsers.add_parser('train', help='Train a model and save it.')
    required, optional = argument_groups(train)
    add_dataset_options(required, optional)
    required.add_argument(
        '--model',
        help='Where to save the model (.npz).',
        required=True
    )
    optional.add_argument(
        '--method',
        help='enan (default, no neighborhood parameter) or enn (fixed k, see --k).',
        choices=['enan', 'enn'],
        default='enan'
    )
    optional.add_argument(
        '--k',
        help='Neighborhood size for --method enn: an integer or sqrt. Default: sqrt',
        default='sqrt'
    )
    add_verbose_option(optional)
    train.set_defaults(handler=run_train)

    predict = subparsers.add_parser('predict', help='Label a CSV with a saved model.')
    required, optional = argument_groups(predict)
    add_dataset_options(required, optional, normalize=False)
    required.add_argument(
        '--model',
        help='Path of a model saved by the train command.',
        required=True
    )
    optional.add_argument(
        '--unlabeled',
        help='Every column of the CSV is a feature (no label column).',
        action='store_true'
    )
    optional.add_argument(
        '--fallback',
        help='k for ENaN queries without natural neighbors. Options: lambda, one. Default: lambda',
        choices=list(enan.classification.FALLBACK_MODES),
        default='lambda'
    )
    optional.add_argument(
        '--mode',
        help='How ENaN counts a query\'s natural neighbors. Options: mutual, one_directional. Default: mutual',
        choices=list(enan.natural_neighbor.QUERY_MODES),
        default='mutual'
    )
    optional.add_argument(
        '--output',
        help='Where to write predictions (CSV). If not supplied, predictions are printed.'
    )
    add_verbose_option(optional)
    predict.set_defaults(handler=run_predict)

    export = subparsers.add_parser('export-graph', help='Export the natural neighbor graph of a dataset.')
    required, optional = argument_groups(export)
    add_dataset_options(required, optional, data_required=False)
    optional.add_argument(
        '--synthetic',
        help='Use a generated dataset instead of --data. Options: blobs, rings.',
        choices=['blobs', 'rings']
    )
    optional.add_argument('--seed', help='Seed for --synthetic. Default: 0', type=int, default=0)
    required.add_argument(
        '--output',
        help='Directory for the exported files.',
        required=True
    )
    add_verbose_option(optional)
    export.set_defaults(handler=run_export)

    return parser.parse_args(argv)


def load_dataset(options):
    return enan.load_csv(options.data, label_column=options.label_column, has_header=options.header)


def run_bench(options):
    config = harness.load_experiment_config(options.config)
    overrides = {}
    if options.folds is not None:
        overrides['n_folds'] = options.folds
    if options.seed is not None:
        overrides['seed'] = options.seed
    if options.normalize:
        overrides['normalize'] = True
    if options.output:
        overrides['output'] = options.output
    config = replace(config, **overrides)
    report = harness.run_benchmark(config, get_worker_count(options.multiprocessing))
    with open(os.path.join(config.output, 'report.txt'), encoding='utf-8') as report_file:
        print(report_file.read(), end='')
    return report


def run_sweep(options):
    dataset = load_dataset(options)
    k_range = options.k if options.k else range(options.k_min, options.k_max + 1)
    folds = options.folds if options.folds is not None else 10
    seed = options.seed if options.seed is not None else 0
    series = harness.sweep_k(dataset, options.method, k_range, folds, seed,
                             get_worker_count(options.multiprocessing), out_dir=options.output,
                             normalize=options.normalize)
    for k, mean, std in series:
        print('{}\t{:.2f}±{:.2f}%'.format(k, mean, std))


def run_train(options):
    dataset = load_dataset(options)
    scaling = None
    if options.normalize:
        scaling = enan.fit_minmax(dataset)
        dataset = enan.minmax_normalize(dataset, scaling)
    if options.method == 'enan':
        model = enan.train_enan(dataset)
    else:
        k = options.k if options.k == 'sqrt' else int(options.k)
        model = enan.train_enn_fixed(dataset, enan.resolve_k(k, len(dataset)))
    enan.save_model(replace(model, scaling=scaling), options.model)


def run_predict(options):
    model = enan.load_model(options.model)
    if options.unlabeled:
        points = load_feature_rows(options.data, options.header)
        truth = None
    else:
        dataset = enan.load_csv(options.data, label_column=options.label_column, has_header=options.header)
        points = dataset.points
        truth = dataset.label_names(dataset.labels)
    if model.scaling is not None:
        LOGGER.info('Applying the min-max scaling saved with the model.')
    if isinstance(model, enan.EnanModel):
        predictions, ks = enan.predict_enan(model, points, fallback=options.fallback, mode=options.mode,
                                            return_k=True)
    else:
        predictions = enan.predict_enn_fixed(model, points)
        ks = numpy.full(len(predictions), model.k)
    names = [model.class_names[label] for label in predictions]
    if truth is not None:
        accuracy = numpy.mean([predicted == true for predicted, true in zip(names, truth)])
        LOGGER.info('Accuracy against the label column: {:.2f}%'.format(100 * accuracy))
    rows = [(row, name, int(k)) for row, (name, k) in enumerate(zip(names, ks))]
    if options.output:
        if len(os.path.dirname(options.output)) > 0:
            os.makedirs(os.path.dirname(options.output), exist_ok=True)
        with open(options.output, 'w', newline='') as output_file:
            writer = csv.writer(output_file)
            writer.writerow(['row_index', 'predicted_label', 'k'])
            writer.writerows(rows)
    else:
        for row, name, k in rows:
            print('{},{},{}'.format(row, name, k))


def load_feature_rows(path, header):
    try:
        return numpy.loadtxt(path, delimiter=',', skiprows=1 if header else 0, ndmin=2)
    except ValueError as e:
        raise enan.DatasetFormatException('Could not read features from {}: {}'.format(path, e))


def run_export(options):
    if options.synthetic == 'blobs':
        dataset = enan.make_gaussian_blobs(100, [(0, 0), (6, 0), (3, 5)], seed=options.seed)
    elif options.synthetic == 'rings':
        dataset = enan.make_rings(150, seed=options.seed)
    elif options.data:
        dataset = load_dataset(options)
        if options.normalize:
            dataset = enan.minmax_normalize(dataset)
    else:
        raise ValueError('export-graph needs --data or --synthetic.')
    model = enan.train_enan(dataset)
    harness.export_nan_artifacts(model, options.output)
    enan.save_csv(dataset, os.path.join(options.output, '{}_points.csv'.format(dataset.name)))


if __name__ == '__main__':
    main()
