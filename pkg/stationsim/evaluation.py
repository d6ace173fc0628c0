#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""Experiment harness: splits, metrics, threshold sweeps and reports.

Every repetition r of an experiment with seed s splits the ground truth with
``default_rng([s, r])``; all classifiers of the run see the same splits.
Thresholds that are not configured are chosen by a sweep on the test set of
repetition 0 and then kept for all repetitions.
"""

import dataclasses
import itertools
import json
import logging
import math
import os
import time
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
from tqdm import tqdm

from . import labels
from .classifiers import (NAIVE, POSITION, TRAINED, ThresholdedMeasure,
                          Voting, classify_leq, make_measure,
                          parse_classifier, vote)
from .common import atomic_open, check_open_unit
from .features import FeatureSchema, build_vocabulary
from .forest import ForestParams, train_forest
from .geometry import GridSpec, haversine
from .osm import SpicingConfig, spice
from .station import ConfigError, Provenance
from .utils.misc import indent, repetition_rng
from .utils.sysinfo import get_sys_dict

logger = logging.getLogger(__name__)

DEFAULT_STRING_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20)) + (0.99,)
DEFAULT_DISTANCE_GRID = tuple(5.0 * i for i in range(1, 41)) + (250.0, 500.0,
                                                                 1000.0)
DEFAULT_CLASSIFIERS = ('PEQ', 'LEQ', 'P', 'ED', 'PED', 'J', 'JW', 'JAC', 'BTS',
                       'TFIDF', 'P+ED', 'P+PED', 'P+J', 'P+JW', 'P+JAC',
                       'P+BTS', 'P+TFIDF', 'RF')
FOREST_PARAMETERS = ('top_k', 'n_grids')


@dataclasses.dataclass(frozen=True)
class Confusion:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        for name in ('tp', 'tn', 'fp', 'fn'):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise ValueError(f'{name} must be a non-negative integer. '
                                 f'Is {value}')
            object.__setattr__(self, name, int(value))

    @classmethod
    def from_predictions(cls, y_true, y_pred):
        y_true = np.asarray(y_true, dtype=bool)
        y_pred = np.asarray(y_pred, dtype=bool)
        if y_true.shape != y_pred.shape:
            raise ValueError(f'Shape mismatch: {y_true.shape} vs '
                             f'{y_pred.shape}')
        return cls(tp=int(np.sum(y_true & y_pred)),
                   tn=int(np.sum(~y_true & ~y_pred)),
                   fp=int(np.sum(~y_true & y_pred)),
                   fn=int(np.sum(y_true & ~y_pred)))

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn


@dataclasses.dataclass(frozen=True)
class Metrics:
    """Precision, recall and F1. A metric with a zero denominator is 0 and
    flagged as undefined."""
    precision: float
    recall: float
    f1: float
    precision_defined: bool = True
    recall_defined: bool = True

    def as_dict(self):
        return dataclasses.asdict(self)


def metrics(c):
    precision_defined = c.tp + c.fp > 0
    recall_defined = c.tp + c.fn > 0
    precision = c.tp / (c.tp + c.fp) if precision_defined else 0.0
    recall = c.tp / (c.tp + c.fn) if recall_defined else 0.0
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
    return Metrics(precision, recall, f1, precision_defined, recall_defined)


def split(gt, fraction, seed):
    """Uniform random split of the pairs into floor(n·fraction) training and
    the remaining test pairs, both in ground truth order.

    `seed` is anything :func:`numpy.random.default_rng` accepts.
    """
    fraction = check_open_unit('fraction', fraction)
    n = len(gt)
    if n == 0:
        raise ValueError('Cannot split an empty ground truth')
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = math.floor(n * fraction)
    train = np.sort(perm[:n_train])
    test = np.sort(perm[n_train:])
    return gt.subset(train), gt.subset(test)


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """What to evaluate and how.

    `thresholds` maps classifier names to one threshold per measure of the
    classifier, e.g. ``{'P+ED': (100.0, 0.8)}``. Classifiers without
    configured thresholds are swept over `distance_grid` (P) and
    `string_grid` (label measures). `spicing` None evaluates the ground truth
    as given.
    """
    classifiers: Tuple[str, ...] = DEFAULT_CLASSIFIERS
    thresholds: Mapping[str, Tuple[float, ...]] = dataclasses.field(
        default_factory=dict)
    train_fraction: float = 0.2
    repetitions: int = 5
    seed: int = 0
    normalize: bool = False
    rules: Optional[labels.NormalizationRules] = None
    spicing: Optional[SpicingConfig] = SpicingConfig()
    string_grid: Tuple[float, ...] = DEFAULT_STRING_GRID
    distance_grid: Tuple[float, ...] = DEFAULT_DISTANCE_GRID
    voting: Voting = Voting.Soft
    bts_mode: str = 'permutations'
    bts_limit: int = labels.BTS_LIMIT
    peq_epsilon: float = 1.0
    forest: ForestParams = ForestParams()
    top_k: int = 2500
    grid: GridSpec = GridSpec()
    n_jobs: int = 1

    def __post_init__(self):
        try:
            self._validate()
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def _validate(self):
        check_open_unit('train_fraction', self.train_fraction)
        if int(self.repetitions) != self.repetitions or self.repetitions < 1:
            raise ValueError(f'repetitions must be an integer >= 1. '
                             f'Is {self.repetitions}')
        if int(self.top_k) != self.top_k or self.top_k < 1:
            raise ValueError(f'top_k must be an integer >= 1. '
                             f'Is {self.top_k}')
        if self.bts_mode not in labels.BTS_MODES:
            raise ValueError(f'bts_mode should be one of {labels.BTS_MODES}. '
                             f'Is {self.bts_mode}')
        if not self.classifiers:
            raise ValueError('No classifiers configured')
        names = tuple(c.strip().upper() for c in self.classifiers)
        parts = {name: parse_classifier(name) for name in names}
        object.__setattr__(self, 'classifiers', names)
        object.__setattr__(self, 'voting', Voting(self.voting))
        if self.normalize and self.rules is None:
            object.__setattr__(self, 'rules', labels.default_rules())
        if not self.string_grid or not self.distance_grid:
            raise ValueError('Threshold grids must not be empty')
        for t in self.string_grid:
            check_open_unit('string threshold', t)
        for d in self.distance_grid:
            if not d > 0:
                raise ValueError(f'Distance thresholds must be > 0. Is {d}')
        object.__setattr__(self, 'string_grid',
                           tuple(sorted(set(map(float, self.string_grid)))))
        object.__setattr__(self, 'distance_grid',
                           tuple(sorted(set(map(float, self.distance_grid)))))
        thresholds = {}
        for name, values in self.thresholds.items():
            name = name.strip().upper()
            if name not in parts:
                raise ValueError(f'Thresholds given for {name}, which is not '
                                 f'an evaluated classifier')
            values = tuple(float(v) for v in np.atleast_1d(values))
            if name in NAIVE or name == 'RF' or \
               len(values) != len(parts[name]):
                raise ValueError(f'{name} takes {len(parts[name])} '
                                 f'threshold(s), got {len(values)}')
            for part, value in zip(parts[name], values):
                ThresholdedMeasure(make_measure(part, tfidf=_NO_TFIDF), value)
            thresholds[name] = values
        object.__setattr__(self, 'thresholds', thresholds)

    @property
    def active_rules(self):
        return self.rules if self.normalize else None

    def echo(self):
        """Result relevant settings as plain data"""
        return {
            'classifiers': list(self.classifiers),
            'thresholds': {k: list(v) for k, v in self.thresholds.items()},
            'train_fraction': self.train_fraction,
            'repetitions': self.repetitions,
            'seed': self.seed,
            'normalize': self.normalize,
            'normalization_rules': (len(self.rules) if self.normalize
                                    else None),
            'spicing': (None if self.spicing is None else
                        dataclasses.asdict(self.spicing)),
            'string_grid': list(self.string_grid),
            'distance_grid': list(self.distance_grid),
            'voting': self.voting.value,
            'bts_mode': self.bts_mode,
            'bts_limit': self.bts_limit,
            'peq_epsilon': self.peq_epsilon,
            'forest': dataclasses.asdict(self.forest),
            'top_k': self.top_k,
            'grid': dataclasses.asdict(self.grid),
        }


# placeholder model to validate TFIDF thresholds before training
_NO_TFIDF = labels.TfidfModel(1, {})


@dataclasses.dataclass(frozen=True)
class SweepResult:
    """Metrics per grid point.

    `rows` has one row per grid point with the columns `columns`: the
    threshold value(s) followed by precision, recall and f1. `best` is the
    first row with maximal F1.
    """
    columns: Tuple[str, ...]
    rows: np.ndarray

    @property
    def best_index(self):
        return int(np.argmax(self.rows[:, -1]))

    @property
    def best(self):
        return dict(zip(self.columns, self.rows[self.best_index].tolist()))

    @property
    def best_thresholds(self):
        return tuple(self.rows[self.best_index, :-3].tolist())


def _threshold_columns(names):
    if len(names) == 1:
        return ('t',)
    return tuple(f't_{n}' for n in names)


def raw_values(measure, pairs):
    """Raw measure values of `pairs` as array"""
    if measure.is_position:
        a = np.array([(p.a.lat, p.a.lon) for p in pairs], dtype=float)
        b = np.array([(p.b.lat, p.b.lon) for p in pairs], dtype=float)
        if not len(a):
            return np.zeros(0)
        return haversine(a[:, 0], a[:, 1], b[:, 0], b[:, 1])
    return np.array([measure.raw(p.a, p.b) for p in pairs], dtype=float)


def _confusion_row(y_true, y_pred):
    m = metrics(Confusion.from_predictions(y_true, y_pred))
    return [m.precision, m.recall, m.f1]


def sweep(gt, measure, grid, raw=None):
    """Evaluate the thresholded `measure` at every threshold of `grid`.

    Parameters
    ----------
    gt : GroundTruth
        Evaluated pairs
    measure : Measure
    grid : sequence of float
        Thresholds, evaluated in ascending order. Ties in F1 go to the
        smaller threshold.
    raw : ndarray, optional
        Precomputed raw values of `measure` on `gt`
    """
    return sweep_combined(gt, [measure], [grid], raw=None if raw is None
                          else [raw])


def sweep_combined(gt, measures, grids, mode=Voting.Soft, raw=None):
    """Evaluate a voting classifier on the Cartesian product of `grids`.

    Grid points are visited in lexicographic order of the sorted grids, so F1
    ties go to the smallest threshold of the first measure, then the second.
    """
    if len(measures) != len(grids) or not measures:
        raise ValueError('Need one grid per measure')
    grids = [sorted(set(float(t) for t in g)) for g in grids]
    if not all(grids):
        raise ValueError('Threshold grids must not be empty')
    if raw is None:
        raw = [raw_values(m, gt.pairs) for m in measures]
    y_true = np.array(gt.classes(), dtype=bool)
    # rescaled scores per measure and threshold
    scores = [[ThresholdedMeasure(m, t).score_raw(r) for t in g]
              for m, g, r in zip(measures, grids, raw)]
    rows = []
    for idx in itertools.product(*(range(len(g)) for g in grids)):
        s = [scores[k][i] for k, i in enumerate(idx)]
        y_pred = vote(s, mode) if len(y_true) else np.zeros(0, dtype=bool)
        rows.append([grids[k][i] for k, i in enumerate(idx)] +
                    _confusion_row(y_true, y_pred))
    columns = _threshold_columns([m.name for m in measures]) + (
        'precision', 'recall', 'f1')
    return SweepResult(columns, np.array(rows, dtype=float))


def _train_corpus(train, rules):
    corpus = train.labels()
    if rules is not None:
        corpus = [labels.normalize(s, rules) for s in corpus]
    return corpus


def _measures(parts, train, config):
    """Measures of a classifier, TFIDF trained on the training labels"""
    tfidf = None
    if any(p in TRAINED for p in parts):
        if len(train) == 0:
            raise ConfigError('TFIDF needs training pairs but the training '
                              'split is empty')
        tfidf = labels.tfidf_train(_train_corpus(train, config.active_rules))
    return [make_measure(p, tfidf=tfidf, rules=config.active_rules,
                         bts_mode=config.bts_mode, bts_limit=config.bts_limit)
            for p in parts]


def _grid_for(measure, config):
    return config.distance_grid if measure.is_position else config.string_grid


def sweep_classifier(name, train, test, config):
    """Sweep classifier `name` on `test` over the configured grids"""
    parts = parse_classifier(name)
    if parts[0] in NAIVE or parts[0] == 'RF':
        raise ValueError(f'{name} has no thresholds to sweep')
    measures = _measures(parts, train, config)
    return sweep_combined(test, measures,
                          [_grid_for(m, config) for m in measures],
                          config.voting)


def _forest_predictions(train, test, config, top_k, n_grids, seed):
    if len(train) == 0:
        raise ConfigError('RF needs training pairs but the training split is '
                          'empty')
    rules = config.active_rules
    vocab = build_vocabulary(_train_corpus(train, rules), top_k)
    grid = GridSpec(config.grid.base_resolution, n_grids)
    schema = FeatureSchema(vocab, grid, rules)
    params = dataclasses.replace(config.forest, seed=seed)
    model = train_forest(schema.matrix(train.pairs), train.classes(), params,
                         schema, n_jobs=config.n_jobs)
    return model.predict(schema.matrix(test.pairs)).astype(bool)


def _predictions(name, parts, thresholds, train, test, config, forest_seed):
    if name == 'LEQ':
        rules = config.active_rules
        if rules is None:
            return np.array([classify_leq(p.a, p.b) for p in test], dtype=bool)
        return np.array([labels.normalize(p.a.label, rules) ==
                         labels.normalize(p.b.label, rules) for p in test],
                        dtype=bool)
    if name == 'PEQ':
        return raw_values(make_measure(POSITION), test.pairs) < \
            config.peq_epsilon
    if name == 'RF':
        return _forest_predictions(train, test, config, config.top_k,
                                   config.grid.n_grids, forest_seed)
    measures = _measures(parts, train, config)
    scores = [ThresholdedMeasure(m, t).score_raw(raw_values(m, test.pairs))
              for m, t in zip(measures, thresholds)]
    if not len(test):
        return np.zeros(0, dtype=bool)
    return vote(scores, config.voting)


@dataclasses.dataclass
class ClassifierResult:
    name: str
    thresholds: Tuple[float, ...]
    repetitions: List[Metrics]

    def mean(self):
        """Metrics averaged over the repetitions"""
        p = float(np.mean([m.precision for m in self.repetitions]))
        r = float(np.mean([m.recall for m in self.repetitions]))
        f = float(np.mean([m.f1 for m in self.repetitions]))
        return Metrics(p, r, f,
                       all(m.precision_defined for m in self.repetitions),
                       all(m.recall_defined for m in self.repetitions))

    def as_dict(self):
        return {'name': self.name, 'thresholds': list(self.thresholds),
                'mean': self.mean().as_dict(),
                'repetitions': [m.as_dict() for m in self.repetitions]}


@dataclasses.dataclass
class Report:
    config: dict
    dataset: dict
    results: List[ClassifierResult]
    sweeps: Dict[str, SweepResult] = dataclasses.field(default_factory=dict)
    elapsed: float = 0.0

    def body(self):
        """Everything that is determined by the inputs and the seed"""
        return {'config': self.config, 'dataset': self.dataset,
                'results': [r.as_dict() for r in self.results]}

    def body_json(self):
        return json.dumps(self.body(), indent=2, ensure_ascii=False)

    def to_json(self):
        return json.dumps({'report': self.body(),
                           'elapsed_seconds': self.elapsed,
                           'environment': get_sys_dict()},
                          indent=2, ensure_ascii=False)

    def render(self):
        lines = [f"{len(self.results)} classifiers, "
                 f"{self.config['repetitions']} repetitions, "
                 f"{self.dataset['pairs']} pairs "
                 f"({self.dataset['similar']} similar)", '',
                 f"{'classifier':<12}{'threshold(s)':<20}{'precision':>10}"
                 f"{'recall':>10}{'f1':>10}"]
        for res in self.results:
            m = res.mean()
            t = ', '.join(f'{v:g}' for v in res.thresholds) or '-'
            lines.append(f'{res.name:<12}{t:<20}{m.precision:>10.4f}'
                         f'{m.recall:>10.4f}{m.f1:>10.4f}')
            if len(res.repetitions) > 1:
                reps = '\n'.join(
                    f'rep {i}: {r.precision:.4f} {r.recall:.4f} {r.f1:.4f}'
                    for i, r in enumerate(res.repetitions))
                lines.append(indent(reps, shift=1, width=2))
        return '\n'.join(lines) + '\n'


def _dataset_summary(gt):
    provenance = {p.value: 0 for p in Provenance}
    for pair in gt:
        provenance[pair.provenance.value] += 1
    return {'pairs': len(gt), 'similar': gt.n_similar,
            'not_similar': gt.n_not_similar, 'provenance': provenance}


def _is_spiced(gt):
    return any(p.provenance is not Provenance.Original for p in gt)


def prepare_ground_truth(gt, config, progress=False):
    """Spice `gt` as configured. Ground truth that already holds spiced pairs
    is used as given."""
    if config.spicing is None:
        return gt
    if _is_spiced(gt):
        logger.warning('Ground truth is already spiced; not spicing again')
        return gt
    return spice(gt, config.spicing, progress=progress)


def run_experiment(gt, config, progress=False):
    """Evaluate all configured classifiers over `config.repetitions` splits.

    Returns a :class:`Report` with per repetition and averaged metrics; the
    averaged metrics are the means of the per repetition metrics.
    """
    start = time.perf_counter()
    gt = prepare_ground_truth(gt, config, progress)
    if len(gt) == 0:
        raise ValueError('Cannot evaluate an empty ground truth')
    names = config.classifiers
    parts = {name: parse_classifier(name) for name in names}
    thresholds = dict(config.thresholds)
    results = {name: ClassifierResult(name, (), []) for name in names}
    sweeps = {}
    for rep in tqdm(range(config.repetitions), desc='repetitions',
                    disable=not progress):
        rng = repetition_rng(config.seed, rep)
        train, test = split(gt, config.train_fraction, rng)
        forest_seed = int(rng.integers(2**63))
        y_true = np.array(test.classes(), dtype=bool)
        for name in names:
            if name not in thresholds and name not in NAIVE and name != 'RF':
                # chosen once on the first split, then fixed
                sweeps[name] = sweep_classifier(name, train, test, config)
                thresholds[name] = sweeps[name].best_thresholds
                logger.info(f'{name}: best thresholds '
                            f'{thresholds[name]} (F1 '
                            f'{sweeps[name].best["f1"]:.4f})')
            y_pred = _predictions(name, parts[name], thresholds.get(name, ()),
                                  train, test, config, forest_seed)
            m = metrics(Confusion.from_predictions(y_true, y_pred))
            results[name].repetitions.append(m)
            results[name].thresholds = tuple(thresholds.get(name, ()))
            logger.debug(f'repetition {rep} {name}: P={m.precision:.4f} '
                         f'R={m.recall:.4f} F1={m.f1:.4f}')
    return Report(config=config.echo(), dataset=_dataset_summary(gt),
                  results=[results[n] for n in names], sweeps=sweeps,
                  elapsed=time.perf_counter() - start)


def sweep_forest(gt, values, parameter, config, progress=False):
    """Train and evaluate one forest per value of `parameter` (``top_k`` or
    ``n_grids``) on the same splits, averaged over the repetitions."""
    if parameter not in FOREST_PARAMETERS:
        raise ValueError(f'parameter should be one of {FOREST_PARAMETERS}. '
                         f'Is {parameter}')
    values = sorted(set(int(v) for v in values))
    if not values or values[0] < 1:
        raise ValueError(f'{parameter} values must be integers >= 1')
    gt = prepare_ground_truth(gt, config, progress)
    scores = np.zeros((len(values), 3))
    for rep in tqdm(range(config.repetitions), desc='repetitions',
                    disable=not progress):
        rng = repetition_rng(config.seed, rep)
        train, test = split(gt, config.train_fraction, rng)
        forest_seed = int(rng.integers(2**63))
        y_true = np.array(test.classes(), dtype=bool)
        for i, value in enumerate(values):
            top_k = value if parameter == 'top_k' else config.top_k
            n_grids = value if parameter == 'n_grids' else config.grid.n_grids
            y_pred = _forest_predictions(train, test, config, top_k, n_grids,
                                         forest_seed)
            scores[i] += _confusion_row(y_true, y_pred)
    scores /= config.repetitions
    rows = np.column_stack([np.array(values, dtype=float), scores])
    return SweepResult((parameter, 'precision', 'recall', 'f1'), rows)


def write_sweep_csv(table, path):
    """Write a sweep table as CSV with a header row"""
    with atomic_open(path) as f:
        f.write(','.join(table.columns) + '\n')
        for row in table.rows:
            f.write(','.join(repr(float(v)) for v in row) + '\n')


def sweep_filename(name):
    return 'sweep_' + name.replace('+', '_') + '.csv'


def write_report(report, directory):
    """Write report.json, report.txt and one CSV per sweep to `directory`"""
    os.makedirs(directory, exist_ok=True)
    with atomic_open(os.path.join(directory, 'report.json')) as f:
        f.write(report.to_json() + '\n')
    with atomic_open(os.path.join(directory, 'report.txt')) as f:
        f.write(report.render())
    for name, table in report.sweeps.items():
        write_sweep_csv(table, os.path.join(directory, sweep_filename(name)))
    logger.info(f'Wrote report to {directory}')


@dataclasses.dataclass(frozen=True)
class DistanceHistogram:
    edges: np.ndarray
    counts: np.ndarray
    n_beyond: int
    fraction_within_50m: float


def similar_distance_histogram(gt, bin_width=10.0, max_distance=1000.0):
    """Histogram of the distances of the similar pairs in `gt`.

    Distances above `max_distance` are counted in `n_beyond`.
    """
    if not bin_width > 0 or not max_distance > 0:
        raise ValueError('bin_width and max_distance must be > 0')
    similar = [p for p in gt if p.similar]
    d = raw_values(make_measure(POSITION), similar)
    edges = np.arange(0, max_distance + bin_width, bin_width, dtype=float)
    edges = edges[edges <= max_distance]
    if edges[-1] < max_distance:
        edges = np.append(edges, max_distance)
    counts, _ = np.histogram(d[d <= max_distance], bins=edges)
    within = float(np.mean(d <= 50)) if len(d) else 0.0
    return DistanceHistogram(edges, counts, int(np.sum(d > max_distance)),
                             within)


def write_histogram_csv(hist, path):
    with atomic_open(path) as f:
        f.write('bin_start,bin_end,count\n')
        for lo, hi, n in zip(hist.edges[:-1], hist.edges[1:], hist.counts):
            f.write(f'{lo:g},{hi:g},{int(n)}\n')
