#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import io
import json
import pathlib
import sys

import numpy as np
import pytest

from stationsim.cli import (EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_PARSE, main)
from stationsim.forest import load_model, predict
from stationsim.station import (StationIdentifier, StationPair,
                                canonical_order, format_pair,
                                read_ground_truth)

FIXTURE = pathlib.Path(__file__).parent / 'data' / 'fixture_city.osm'


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    userdir = tmp_path / 'userconfig'
    userdir.mkdir()
    monkeypatch.setenv('STATIONSIM_CONFIGDIR', str(userdir))
    monkeypatch.delenv('STATIONSIM_THREADS', raising=False)


def run(*argv):
    return main(['-q', '--threads', '1'] + [str(a) for a in argv])


@pytest.fixture
def gt_file(tmp_path):
    path = tmp_path / 'gt.tsv'
    assert run('build-gt', FIXTURE, path) == EXIT_OK
    return path


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / 'small.cfg'
    path.write_text('[forest]\nn_trees = 5\n'
                    '[evaluation]\nrepetitions = 1\ntrain_fraction = 0.5\n',
                    encoding='utf-8')
    return path


def test_build_gt(tmp_path, capsys):
    out = tmp_path / 'gt.tsv'
    stats = tmp_path / 'stats.json'
    hist = tmp_path / 'hist.csv'
    assert run('build-gt', FIXTURE, out, '--stats', stats,
               '--histogram', hist) == EXIT_OK
    gt = read_ground_truth(out)
    assert len(gt) == 22 and gt.n_similar == 14
    text = capsys.readouterr().out
    assert 'pairs (K)                  22' in text
    assert 'similar pairs within 50 m: 42.9%' in text
    data = json.loads(stats.read_text(encoding='utf-8'))
    assert data['K'] == 22 and data['N'] == 14 and data['G'] == 6
    assert hist.read_text(encoding='utf-8').startswith(
        'bin_start,bin_end,count\n0,10,6\n')


def test_build_gt_spicing(tmp_path, gt_file):
    zero = tmp_path / 'zero.tsv'
    assert run('build-gt', FIXTURE, zero, '--spice', 0) == EXIT_OK
    assert zero.read_bytes() == gt_file.read_bytes()
    spiced = tmp_path / 'spiced.tsv'
    assert run('--seed', 3, 'build-gt', FIXTURE, spiced,
               '--spice', 1) == EXIT_OK
    gt = read_ground_truth(spiced)
    assert gt.n_not_similar > 8
    # the same seed gives the same file
    again = tmp_path / 'again.tsv'
    run('--seed', 3, 'build-gt', FIXTURE, again, '--spice', 1)
    assert again.read_bytes() == spiced.read_bytes()


def test_build_gt_spiced_statistics(tmp_path, capsys):
    out = tmp_path / 'spiced.tsv'
    stats = tmp_path / 'stats.json'
    assert run('--seed', 3, 'build-gt', FIXTURE, out, '--spice', 1,
               '--stats', stats) == EXIT_OK
    gt = read_ground_truth(out)
    data = json.loads(stats.read_text(encoding='utf-8'))
    assert data['K'] == len(gt) > 22
    assert data['K_neg'] == gt.n_not_similar
    assert data['K_pos'] == gt.n_similar
    assert data['K_neg'] + data['K_pos'] == data['K']
    assert f'pairs (K)                  {len(gt)}' in capsys.readouterr().out


def test_build_gt_radius(tmp_path):
    out = tmp_path / 'gt.tsv'
    assert run('build-gt', FIXTURE, out, '--radius', 100) == EXIT_OK
    assert len(read_ground_truth(out)) == 13


def test_missing_input(tmp_path):
    out = tmp_path / 'gt.tsv'
    assert run('build-gt', tmp_path / 'missing.osm', out) == EXIT_IO
    assert not out.exists()


def test_malformed_osm(tmp_path):
    bad = tmp_path / 'bad.osm'
    bad.write_text('<osm><node id="1"></osm>', encoding='utf-8')
    out = tmp_path / 'gt.tsv'
    assert run('build-gt', bad, out) == EXIT_PARSE
    assert not out.exists()


def test_evaluate(tmp_path, gt_file, capsys):
    def evaluate(report_dir):
        return run('evaluate', gt_file, '--classifiers', 'P,PEQ',
                   '--thresholds', 'P=100', '--no-spice', '--repetitions', 2,
                   '--train-fraction', 0.5, '--report-dir', report_dir)

    assert evaluate(tmp_path / 'a') == EXIT_OK
    assert evaluate(tmp_path / 'b') == EXIT_OK
    a = json.loads((tmp_path / 'a' / 'report.json').read_text('utf-8'))
    b = json.loads((tmp_path / 'b' / 'report.json').read_text('utf-8'))
    assert a['report'] == b['report']
    results = {r['name']: r for r in a['report']['results']}
    assert results['P']['thresholds'] == [100.0]
    assert all(m['precision'] == 1.0
               for m in results['P']['repetitions'])
    assert a['report']['config']['spicing'] is None
    assert 'PEQ' in capsys.readouterr().out


def test_evaluate_malformed_ground_truth(tmp_path):
    bad = tmp_path / 'bad.tsv'
    bad.write_text('a\t1\t2\n', encoding='utf-8')
    assert run('evaluate', bad, '--classifiers', 'P') == EXIT_PARSE


def test_unknown_classifier(gt_file):
    with pytest.raises(SystemExit) as e:
        run('evaluate', gt_file, '--classifiers', 'P,XYZ')
    assert e.value.code == 2


def test_usage_errors():
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(['build-gt', str(FIXTURE), 'x', '--spice', '1.5'])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(['--version'])
    assert e.value.code == 0


def test_print_config(tmp_path, small_config, capsys):
    assert main(['--config', str(small_config), '--print-config']) == EXIT_OK
    out = capsys.readouterr().out
    assert str(small_config) in out
    assert 'n_trees = 5' in out
    assert main(['--config', str(tmp_path / 'missing.cfg'),
                 '--print-config']) == EXIT_CONFIG


def test_sysinfo(capsys):
    assert main(['--sysinfo']) == EXIT_OK
    assert 'stationsim' in capsys.readouterr().out


def test_train_and_classify(tmp_path, gt_file, capsys, monkeypatch):
    model_path = tmp_path / 'model.zip'
    assert run('train', gt_file, model_path, '--trees', 40, '--top-k', 30,
               '--importances', 3) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith('40 trees, 36 features, training accuracy ')
    accuracy = float(out.splitlines()[0].rsplit(' ', 1)[1])
    assert accuracy >= 0.9
    assert len(out.splitlines()) == 4
    model = load_model(model_path)
    assert len(model.trees) == 40

    gt = read_ground_truth(gt_file)
    rows = [format_pair(p, with_class=False) for p in gt.pairs[:3]]
    swapped = format_pair(gt[0].swapped(), with_class=False)
    text = '\n'.join(rows + ['not\ta\tpair', swapped]) + '\n'
    monkeypatch.setattr(sys, 'stdin', io.StringIO(text))
    assert run('classify', model_path) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 5
    for line, pair in zip(lines[:3], gt.pairs[:3]):
        fields = line.split('\t')
        assert len(fields) == 8
        cls, p = predict(model, model.schema.extract(pair))
        assert fields[6] == str(int(cls))
        assert fields[7] == f'{p:.6f}'
    assert lines[3].startswith('not\ta\tpair\tERROR\t')
    # side order does not matter
    assert lines[4].split('\t')[6:] == lines[0].split('\t')[6:]


def test_classify_file_output(tmp_path, gt_file):
    model_path = tmp_path / 'model.zip'
    assert run('train', gt_file, model_path, '--trees', 5,
               '--top-k', 20) == EXIT_OK
    a = StationIdentifier('Rathaus', 48.1, 7.8)
    b = StationIdentifier('Rathaus', 48.1001, 7.8)
    pairs = tmp_path / 'pairs.tsv'
    pairs.write_text(format_pair(StationPair(a, b), with_class=False) + '\n',
                     encoding='utf-8')
    out = tmp_path / 'classified.tsv'
    assert run('classify', model_path, pairs, '-o', out) == EXIT_OK
    fields = out.read_text(encoding='utf-8').rstrip('\n').split('\t')
    assert fields[6] in ('0', '1')
    assert 0 <= float(fields[7]) <= 1
    model = load_model(model_path)
    _, p = predict(model, model.schema.extract(
        canonical_order(StationPair(a, b))))
    assert float(fields[7]) == pytest.approx(p, abs=1e-6)


def test_classify_corrupt_model(tmp_path):
    model_path = tmp_path / 'model.zip'
    model_path.write_bytes(b'PK\x03\x04 definitely not a model')
    pairs = tmp_path / 'pairs.tsv'
    pairs.write_text('', encoding='utf-8')
    assert run('classify', model_path, pairs) == EXIT_PARSE


def test_sweep(tmp_path, gt_file, capsys):
    csv = tmp_path / 'sweep.csv'
    plot = tmp_path / 'sweep.png'
    assert run('sweep', gt_file, '--classifier', 'p', '--no-spice',
               '--csv', csv, '--plot', plot) == EXIT_OK
    rows = np.loadtxt(csv, delimiter=',', skiprows=1)
    assert rows.shape[1] == 4
    assert plot.stat().st_size > 0
    assert capsys.readouterr().out.startswith('P: t=')


def test_sweep_forest(tmp_path, gt_file, small_config):
    csv = tmp_path / 'rf.csv'
    assert run('--config', small_config, 'sweep', gt_file, '--classifier',
               'RF', '--values', '5,10', '--no-spice', '--csv',
               csv) == EXIT_OK
    rows = np.loadtxt(csv, delimiter=',', skiprows=1)
    np.testing.assert_array_equal(rows[:, 0], [5, 10])
    assert run('--config', small_config, 'sweep', gt_file, '--classifier',
               'RF', '--no-spice', '--csv', csv) == EXIT_CONFIG


def test_export_features(tmp_path, gt_file):
    out = tmp_path / 'features.tsv'
    assert run('export-features', gt_file, out, '--top-k', 10,
               '--n-grids', 3) == EXIT_OK
    lines = out.read_text(encoding='utf-8').splitlines()
    assert len(lines) == 23
    header = lines[0].split('\t')
    assert len(header) == 2 + 6 + 10 + 1
    assert header[-1] == 'class'


def test_config_errors(tmp_path, gt_file):
    bad = tmp_path / 'bad.cfg'
    bad.write_text('[forest]\nn_trees = 0\n', encoding='utf-8')
    assert run('--config', bad, 'train', gt_file,
               tmp_path / 'model.zip') == EXIT_CONFIG
    assert not (tmp_path / 'model.zip').exists()
    assert run('--config', tmp_path / 'missing.cfg', 'evaluate',
               gt_file) == EXIT_CONFIG
