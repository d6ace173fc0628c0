#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import os

import pytest

from stationsim.evaluation import DEFAULT_CLASSIFIERS, DEFAULT_STRING_GRID
from stationsim.geometry import GridSpec
from stationsim.station import ConfigError
from stationsim.utils.config import load_config, pipeline_config, print_config


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    """No user config file and no thread override from the environment"""
    userdir = tmp_path / 'userconfig'
    userdir.mkdir()
    monkeypatch.setenv('STATIONSIM_CONFIGDIR', str(userdir))
    monkeypatch.delenv('STATIONSIM_THREADS', raising=False)
    return userdir


def test_defaults():
    cfg = pipeline_config(load_config())
    assert cfg.seed == 0
    assert cfg.n_jobs == -1
    assert cfg.radius == 1000 and cfg.same_name_radius == 250
    assert 'railway=tram_stop' in cfg.station_tags
    assert cfg.label_attributes[0] == 'name'
    assert cfg.grid == GridSpec(256, 2)
    assert cfg.top_k == 2500
    assert cfg.forest.n_trees == 100 and cfg.forest.max_depth is None
    assert cfg.spicing.p == 0.5 and cfg.spicing.n_fakes == 5
    exp = cfg.experiment
    assert exp.classifiers == DEFAULT_CLASSIFIERS
    assert exp.string_grid == DEFAULT_STRING_GRID
    assert exp.train_fraction == 0.2 and exp.repetitions == 5
    assert exp.thresholds == {}
    assert exp.active_rules is None
    assert os.path.isabs(cfg.report_dir)
    assert cfg.rules_file is None


def test_user_and_extra_files(isolated, tmp_path):
    (isolated / 'stationsimrc').write_text('[osm]\nradius = 500\n'
                                           '[general]\nseed = 3\n',
                                           encoding='utf-8')
    cfg = pipeline_config(load_config())
    assert cfg.radius == 500 and cfg.seed == 3
    # the seed reaches every seeded component
    assert cfg.spicing.seed == cfg.forest.seed == cfg.experiment.seed == 3
    extra = tmp_path / 'run.cfg'
    extra.write_text('[osm]\nradius = 800\n', encoding='utf-8')
    cfg = pipeline_config(load_config([str(extra)]))
    assert cfg.radius == 800 and cfg.seed == 3


def test_missing_and_broken_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config([str(tmp_path / 'nope.cfg')])
    broken = tmp_path / 'broken.cfg'
    broken.write_text('radius = 5\n', encoding='utf-8')
    with pytest.raises(ConfigError):
        load_config([str(broken)])


def test_configdir_must_exist(monkeypatch, tmp_path):
    monkeypatch.setenv('STATIONSIM_CONFIGDIR', str(tmp_path / 'missing'))
    with pytest.raises(ConfigError):
        load_config()


def test_overrides():
    cfg = pipeline_config(load_config(), {
        'general.seed': 7,
        'features.top_k': 10,
        'features.n_grids': 3,
        'evaluation.classifiers': ['P', 'ed', 'P+ED'],
        'evaluation.thresholds': 'P+ED=100:0.8, ED=0.85',
        'forest.max_features': '0.5',
        'forest.max_depth': '4',
        'spicing.p': None,
    })
    assert cfg.seed == 7 and cfg.top_k == 10
    assert cfg.grid.n_grids == 3
    assert cfg.experiment.classifiers == ('P', 'ED', 'P+ED')
    assert cfg.experiment.thresholds == {'P+ED': (100.0, 0.8),
                                         'ED': (0.85,)}
    assert cfg.forest.max_features == 0.5 and cfg.forest.max_depth == 4
    assert cfg.spicing.p == 0.5


def test_overrides_leave_config_untouched():
    config = load_config()
    pipeline_config(config, {'general.seed': 9})
    assert config.get('general', 'seed') == '0'


def test_threads_precedence(monkeypatch):
    config = load_config()
    monkeypatch.setenv('STATIONSIM_THREADS', '3')
    assert pipeline_config(config).n_jobs == 3
    # a command line flag beats the environment
    assert pipeline_config(config, {'general.threads': 2}).n_jobs == 2
    assert pipeline_config(config, {'general.threads': 0}).n_jobs == -1
    monkeypatch.setenv('STATIONSIM_THREADS', '-1')
    with pytest.raises(ConfigError):
        pipeline_config(config)
    monkeypatch.setenv('STATIONSIM_THREADS', 'many')
    with pytest.raises(ConfigError):
        pipeline_config(config)


@pytest.mark.parametrize('key, value', [
    ('forest.n_trees', 0),
    ('forest.max_features', 'half'),
    ('evaluation.thresholds', 'P100'),
    ('evaluation.thresholds', 'ED=1.5'),
    ('evaluation.classifiers', 'P, XYZ'),
    ('evaluation.voting', 'majority'),
    ('evaluation.train_fraction', 1),
    ('evaluation.bts_fallback', 'never'),
    ('spicing.p', 2),
    ('osm.station_tags', 'railway'),
    ('osm.label_attributes', ''),
    ('osm.radius', 0),
    ('features.top_k', 0),
    ('features.n_grids', 'two'),
    ('general.seed', -1),
])
def test_invalid_values(key, value):
    with pytest.raises(ConfigError):
        pipeline_config(load_config(), {key: value})


def test_normalization_rules(tmp_path):
    cfg = pipeline_config(load_config(), {'evaluation.normalize': 'yes'})
    assert cfg.experiment.active_rules is not None
    rules = tmp_path / 'rules.tsv'
    rules.write_text('platz\tpl\n', encoding='utf-8')
    cfg = pipeline_config(load_config(), {
        'evaluation.normalize': 'true', 'evaluation.rules_file': str(rules)})
    assert cfg.experiment.active_rules.rules == (('platz', 'pl'),)
    assert cfg.rules_file == str(rules)
    with pytest.raises(ConfigError):
        pipeline_config(load_config(), {
            'evaluation.normalize': 'true',
            'evaluation.rules_file': str(tmp_path / 'missing.tsv')})


def test_print_config(capsys):
    print_config(load_config())
    out = capsys.readouterr().out
    assert 'FILES USED:' in out
    assert '[general]' in out
    assert 'stationsimrc' in out
