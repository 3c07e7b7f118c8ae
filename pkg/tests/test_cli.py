import csv
import logging

import numpy

import classify
import enan
from conftest import iris_like


def save(dataset, path, header=False):
    enan.save_csv(dataset, str(path), header=header)
    return str(path)


def read_rows(path):
    with open(str(path), newline='') as csv_file:
        return list(csv.reader(csv_file))


def test_bench_with_missing_config(tmp_path, caplog):
    missing = str(tmp_path / 'missing.ini')
    with caplog.at_level(logging.ERROR):
        assert classify.cli_main(['bench', '--config', missing]) != 0
    assert missing in caplog.text


def test_bad_arguments():
    assert classify.cli_main(['bench', '--no-such-flag']) == 2
    assert classify.cli_main([]) == 2
    assert classify.cli_main(['train', '--data', 'x.csv']) == 2


def test_bench_prints_report(tmp_path, capsys, separable_blobs, two_class_gaussians):
    save(separable_blobs, tmp_path / 'a.csv')
    save(two_class_gaussians, tmp_path / 'b.csv')
    config = tmp_path / 'experiment.ini'
    config.write_text('[experiment]\nmethods = enn, enan\nk_grid = 1, sqrt\nfolds = 5\n\n'
                      '[dataset:a]\npath = a.csv\n\n[dataset:b]\npath = b.csv\n')
    out_dir = tmp_path / 'out'
    assert classify.cli_main(['bench', '--config', str(config), '--output', str(out_dir), '--seed', '2']) == 0
    lines = (out_dir / 'report.txt').read_text(encoding='utf-8').splitlines()
    assert [line.split()[0] for line in lines[2:]] == ['a', 'b', 'OVERALL']
    assert 'OVERALL' in capsys.readouterr().out
    assert (out_dir / 'folds_a.csv').is_file()


def test_train_then_predict(tmp_path):
    dataset = iris_like()
    data = save(dataset, tmp_path / 'iris.csv')
    model_path = tmp_path / 'model.npz'
    predictions_path = tmp_path / 'predictions.csv'
    assert classify.cli_main(['train', '--data', data, '--model', str(model_path)]) == 0
    assert classify.cli_main(['predict', '--data', data, '--model', str(model_path),
                              '--output', str(predictions_path)]) == 0

    rows = read_rows(predictions_path)
    assert rows[0] == ['row_index', 'predicted_label', 'k']
    expected, ks = enan.predict_enan(enan.train_enan(enan.load_csv(data)), dataset.points, return_k=True)
    assert [row[1] for row in rows[1:]] == dataset.label_names(expected)
    assert [int(row[2]) for row in rows[1:]] == ks.tolist()
    assert [int(row[0]) for row in rows[1:]] == list(range(150))


def test_predict_unlabeled_rows(tmp_path, capsys, two_class_gaussians):
    data = save(two_class_gaussians, tmp_path / 'train.csv')
    model_path = str(tmp_path / 'enn.npz')
    assert classify.cli_main(['train', '--data', data, '--model', model_path, '--method', 'enn', '--k', '3']) == 0
    queries = tmp_path / 'queries.csv'
    numpy.savetxt(str(queries), [[0.0, 0.0], [2.5, 1.0]], delimiter=',')
    capsys.readouterr()
    assert classify.cli_main(['predict', '--data', str(queries), '--unlabeled', '--model', model_path]) == 0
    printed = capsys.readouterr().out.splitlines()
    assert len(printed) == 2
    assert printed[0].startswith('0,c0,3')
    assert printed[1].startswith('1,c1,3')


def test_predict_with_bad_model(tmp_path, two_class_gaussians):
    data = save(two_class_gaussians, tmp_path / 'train.csv')
    garbage = tmp_path / 'model.npz'
    garbage.write_bytes(b'nope')
    assert classify.cli_main(['predict', '--data', data, '--model', str(garbage)]) == 1


def test_sweep_command(tmp_path, separable_blobs):
    data = save(separable_blobs, tmp_path / 'blobs.csv')
    out_dir = tmp_path / 'sweep'
    assert classify.cli_main(['sweep', '--data', data, '--method', 'knn', '--k', '1', '3',
                              '--folds', '4', '--output', str(out_dir)]) == 0
    lines = (out_dir / 'sweep_blobs.csv').read_text().splitlines()
    assert lines[1:] == ['k,mean,std', '1,100.00,0.00', '3,100.00,0.00']


def test_export_graph_command(tmp_path):
    assert classify.cli_main(['export-graph', '--synthetic', 'rings', '--output', str(tmp_path)]) == 0
    counts = (tmp_path / 'nan_counts.txt').read_text().splitlines()
    assert len(counts) == 300
    assert (tmp_path / 'nan_meta.txt').read_text().startswith('nane ')
    assert (tmp_path / 'rings_points.csv').is_file()


def test_export_graph_needs_input(tmp_path):
    assert classify.cli_main(['export-graph', '--output', str(tmp_path)]) == 1


def test_normalized_train_then_predict_raw_rows(tmp_path):
    dataset = iris_like(seed=1)
    data = save(dataset, tmp_path / 'iris.csv', header=True)
    model_path = tmp_path / 'scaled.npz'
    predictions_path = tmp_path / 'predictions.csv'
    assert classify.cli_main(['train', '--data', data, '--header', '--normalize', '--model', str(model_path)]) == 0
    model = enan.load_model(str(model_path))
    assert model.index.points.min() == 0.0
    assert model.index.points.max() == 1.0
    assert classify.cli_main(['predict', '--data', data, '--header', '--model', str(model_path),
                              '--output', str(predictions_path)]) == 0

    loaded = enan.load_csv(data, has_header=True)
    scaling = enan.fit_minmax(loaded)
    expected = enan.predict_enan(enan.train_enan(enan.minmax_normalize(loaded, scaling)),
                                 scaling.apply(loaded.points))
    predicted = [row[1] for row in read_rows(predictions_path)[1:]]
    assert predicted == dataset.label_names(expected)
    assert numpy.mean([name == true for name, true in zip(predicted, dataset.label_names(dataset.labels))]) >= 0.9


def test_predict_has_no_normalize_flag():
    assert classify.cli_main(['predict', '--data', 'x.csv', '--model', 'm.npz', '--normalize']) == 2


def test_nul_byte_in_training_data(tmp_path, caplog):
    data = tmp_path / 'nul.csv'
    data.write_bytes(b'1.0,2.0,A\n3.0,4\x00.0,B\n')
    with caplog.at_level(logging.ERROR):
        assert classify.cli_main(['train', '--data', str(data), '--model', str(tmp_path / 'm.npz')]) == 1
    assert 'row 2' in caplog.text
