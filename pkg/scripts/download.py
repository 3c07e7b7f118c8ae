import argparse
import csv
import logging
import os
import re
from datetime import datetime

import requests

logging.basicConfig(level=logging.WARN, format="%(asctime)s %(levelname)s: %(message)s", datefmt="%Y-%m-%d  %H:%M:%S")
LOGGER = logging.getLogger(__name__)

"""
Fetches the UCI benchmark datasets and converts each one to the CSV layout the toolkit expects: no header, numeric
features first, class label in the last column. The library itself never downloads anything; run this once, then
point experiment configs at the files under --path.

Datasets marked manual are listed with their source page only. They need a step this script doesn't do (spreadsheet
export, decompression, a subset) and should be converted by hand to the same layout.
"""

UCI = 'https://archive.ics.uci.edu/ml/machine-learning-databases/'
DEFAULT_PATH = 'data/{dataset}.csv'

# url, delimiter (None = whitespace), label column in the raw file, raw columns to drop, header lines to skip
DATASETS = {
    'iris': {'url': UCI + 'iris/iris.data', 'delimiter': ',', 'label': -1, 'drop': [], 'skip': 0},
    'wine': {'url': UCI + 'wine/wine.data', 'delimiter': ',', 'label': 0, 'drop': [], 'skip': 0},
    'haberman': {'url': UCI + 'haberman/haberman.data', 'delimiter': ',', 'label': -1, 'drop': [], 'skip': 0},
    'ecoli': {'url': UCI + 'ecoli/ecoli.data', 'delimiter': None, 'label': -1, 'drop': [0], 'skip': 0},
    'cancer': {'url': UCI + 'breast-cancer-wisconsin/wdbc.data', 'delimiter': ',', 'label': 1, 'drop': [0],
               'skip': 0},
    'glass': {'url': UCI + 'glass/glass.data', 'delimiter': ',', 'label': -1, 'drop': [0], 'skip': 0},
    'sonar': {'url': UCI + 'undocumented/connectionist-bench/sonar/sonar.all-data', 'delimiter': ',', 'label': -1,
              'drop': [], 'skip': 0},
    'segment': {'url': UCI + 'statlog/segment/segment.dat', 'delimiter': None, 'label': -1, 'drop': [], 'skip': 0},
    'segment_train': {'url': UCI + 'image/segmentation.data', 'delimiter': ',', 'label': 0, 'drop': [], 'skip': 5},
    'libras': {'url': UCI + 'libras/movement_libras.data', 'delimiter': ',', 'label': -1, 'drop': [], 'skip': 0},
    'vehicle': {'url': UCI + 'statlog/vehicle/', 'manual': True},
    'letter': {'url': UCI + 'letter-recognition/', 'manual': True},
    'pageblocks': {'url': UCI + 'page-blocks/', 'manual': True},
    'knowledge': {'url': UCI + '00257/', 'manual': True},
    'diabetes': {'url': 'https://archive.ics.uci.edu/dataset/34/diabetes', 'manual': True},
}


def main():
    options = get_options()
    LOGGER.setLevel(options.verbose)
    start_time = datetime.now()
    LOGGER.info('Starting time: ' + str(start_time))
    if len(options.datasets) == 1 and options.datasets[0] == 'all':
        chosen_datasets = list(DATASETS)
    else:
        chosen_datasets = options.datasets
    path = options.path if options.path else DEFAULT_PATH
    download_datasets(path, chosen_datasets, options.overwrite)
    end_time = datetime.now()
    LOGGER.info('End time: ' + str(end_time))
    elapsed_time = end_time - start_time
    LOGGER.info('Elapsed time: ' + str(elapsed_time))


def get_options():
    """
    Gets command line arguments and returns them.

    Required arguments: datasets
    Optional arguments: path, overwrite, verbose

    Run this with the -h (help) argument for more detailed information. (python download.py -h)

    :return:
    """
    parser = argparse.ArgumentParser()
    parser._action_groups.pop()
    required = parser.add_argument_group('Required arguments')
    optional = parser.add_argument_group('Optional arguments')
    required.add_argument(
        '--datasets',
        help='Choose which datasets to download.',
        choices=list(DATASETS) + ['all'],
        nargs='*',
        required=True
    )
    optional.add_argument(
        '--path',
        help='Where to save the converted files. Default: data/{dataset}.csv'
    )
    optional.add_argument(
        '-o', '--overwrite',
        action='store_true',
        help='Download again even if the converted file already exists.'
    )
    optional.add_argument(
        '-v', '--verbose',
        help='Increase output verbosity',
        action='store_const',
        const=logging.INFO,
        default=logging.WARN
    )
    return parser.parse_args()


def download_datasets(path, datasets, overwrite=False):
    for dataset in datasets:
        source = DATASETS[dataset]
        destination = path.format(dataset=dataset)
        if source.get('manual'):
            LOGGER.warning('{} must be fetched by hand from {} and saved as {} (label in the last column).'.format(
                dataset, source['url'], destination))
            continue
        if os.path.isfile(destination) and not overwrite:
            LOGGER.info('{} already present at {}.'.format(dataset, destination))
            continue
        LOGGER.info('Downloading {} dataset.'.format(dataset))
        raw_destination = destination + '.raw'
        if try_to_download(source['url'], raw_destination):
            rows = convert_rows(read_raw_rows(raw_destination, source['delimiter'], source['skip']),
                                source['label'], source['drop'])
            write_rows(rows, destination)
            os.remove(raw_destination)
            LOGGER.info('Saved {} rows of {} to {}.'.format(len(rows), dataset, destination))


def try_to_download(url, destination):
    destination_dir = os.path.dirname(destination)
    if len(destination_dir) > 0:
        os.makedirs(destination_dir, exist_ok=True)
    LOGGER.info('Downloading {} ...'.format(url))
    remaining_download_tries = 2
    while remaining_download_tries > 0:
        try:
            with requests.get(url, stream=True, headers={'User-Agent': 'Mozilla/5.0'}, timeout=60) as r:
                r.raise_for_status()
                with open(destination, 'wb') as f:
                    for chunk in r.iter_content(chunk_size=8192):
                        f.write(chunk)
            return True
        except Exception as e:
            LOGGER.info(repr(e))
            remaining_download_tries -= 1
            continue
    LOGGER.warning('Download failed.')
    return False


def read_raw_rows(path, delimiter, skip):
    rows = []
    with open(path) as raw_file:
        for line_number, line in enumerate(raw_file):
            if line_number < skip or not line.strip():
                continue
            if delimiter is None:
                rows.append(re.split(r'\s+', line.strip()))
            else:
                rows.append([cell.strip() for cell in line.strip().split(delimiter)])
    return rows


def convert_rows(rows, label, drop):
    """
    Moves the label column last and removes id/name columns.

    :param rows: raw rows as lists of strings
    :param label: raw index of the label column
    :param drop: raw indices of columns to discard
    :return: converted rows
    """
    converted = []
    for row in rows:
        label_index = label % len(row)
        dropped = {column % len(row) for column in drop}
        features = [cell for column, cell in enumerate(row) if column != label_index and column not in dropped]
        converted.append(features + [row[label_index]])
    return converted


def write_rows(rows, destination):
    with open(destination, 'w', newline='') as csv_file:
        csv.writer(csv_file).writerows(rows)


if __name__ == '__main__':
    main()
