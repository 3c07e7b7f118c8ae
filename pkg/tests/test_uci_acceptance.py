"""
Benchmarks on the real UCI files. Every test skips unless the dataset has been fetched into data/ (or
$ENAN_DATA_DIR) with scripts/download.py.
"""
import numpy
import pytest

import enan
import harness
from conftest import load_uci, uci_path

# Reference ENaN accuracies under 10-fold cross-validation
ENAN_REFERENCE = {
    'iris': 95.33,
    'wine': 71.76,
    'haberman': 71.82,
    'ecoli': 79.79,
    'cancer': 92.80,
    'knowledge': 89.58,
}


def benchmark(names, methods, out_dir, seed=0, k_grid=(1, 3, 5, 'sqrt')):
    for name in names:
        load_uci(name)
    config = harness.ExperimentConfig(
        datasets=tuple(harness.DatasetSpec(name, uci_path(name)) for name in names),
        methods=methods, k_grid=k_grid, n_folds=10, seed=seed, output=str(out_dir))
    return harness.run_benchmark(config)


def test_iris_shape():
    dataset = load_uci('iris')
    assert (len(dataset), dataset.dimension, dataset.n_classes) == (150, 4, 3)


def test_iris_enan_accuracy(tmp_path):
    report = benchmark(['iris'], ('enan',), tmp_path)
    assert 90 <= report.cell('iris', report.methods[0]).mean <= 99


@pytest.mark.slow
@pytest.mark.parametrize('name', sorted(ENAN_REFERENCE))
def test_enan_close_to_reference(tmp_path, name):
    report = benchmark([name], ('enan',), tmp_path)
    assert abs(report.cell(name, report.methods[0]).mean - ENAN_REFERENCE[name]) <= 5


@pytest.mark.slow
def test_enan_keeps_up_with_best_fixed_k(tmp_path):
    names = sorted(ENAN_REFERENCE)
    enan_means = []
    fixed_means = {}
    for seed in range(5):
        report = benchmark(names, ('enn', 'enan'), tmp_path / str(seed), seed=seed)
        for method in report.methods:
            mean = float(numpy.mean([report.cell(name, method).mean for name in names]))
            if method.family == 'enan':
                enan_means.append(mean)
            else:
                fixed_means.setdefault(method.label, []).append(mean)
    best_fixed = max(float(numpy.mean(means)) for means in fixed_means.values())
    assert float(numpy.mean(enan_means)) >= best_fixed - 2


def test_iris_accuracy_depends_on_k():
    series = harness.sweep_k(load_uci('iris'), 'enn', range(1, 26), n_folds=10, seed=0)
    means = [mean for _, mean, _ in series]
    assert max(means) - min(means) > 0


def test_iris_sweep_matches_benchmark(tmp_path):
    report = benchmark(['iris'], ('knn',), tmp_path, k_grid=(1,))
    (_, mean, std), = harness.sweep_k(load_uci('iris'), 'knn', [1], n_folds=10, seed=0)
    cell = report.cell('iris', report.methods[0])
    assert (mean, std) == (cell.mean, cell.std)


def test_iris_eigenvalue_and_statistics():
    dataset = load_uci('iris')
    model = enan.train_enan(dataset)
    assert 2 <= model.nane <= 30
    assert all(0.0 <= value <= 1.0 for value in enan.classwise_statistic(model.graph, model.nane, model.stats))
