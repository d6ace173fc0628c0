#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""CART decision trees and a bagged random forest for binary station pair
classification, with a deterministic model file format.

Randomness
----------
Tree i of a forest trained with seed `s` draws from
``Generator(PCG64(SeedSequence(s).spawn(n_trees)[i]))``: first the bootstrap
sample (``integers(0, n, n)``), then, at every node in depth first order, a
permutation of the feature indices. Features are visited in that order until
`max_features` non-constant features have been evaluated. Since every tree has
its own stream, the model does not depend on the number of workers.

Model file
----------
A zip archive with fixed timestamps holding

``meta.json``
    format name, version, forest parameters, feature schema and column names
``node_offsets.npy``
    start index of each tree in the node arrays (length n_trees + 1)
``feature.npy``, ``threshold.npy``, ``left.npy``, ``right.npy``
    per node split feature (-1 for leaves), threshold and tree local child
    indices (-1 for leaves). Rows with ``x[feature] <= threshold`` go left.
``counts.npy``
    per node training sample counts of (NotSimilar, Similar)
"""

import dataclasses
import io
import json
import logging
import math
import zipfile
import zlib
from typing import Optional, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from . import __version__
from .features import FeatureSchema, FeatureVector, TrigramVocabulary
from .geometry import GridSpec
from .labels import NormalizationRules
from .common import atomic_open
from .station import (ModelFormatError, ModelVersionError, PairClass,
                      SchemaMismatchError)
from .utils.misc import spawn_rngs

logger = logging.getLogger(__name__)

FORMAT_NAME = 'stationsim-forest'
FORMAT_VERSION = 1
MAX_FEATURES_RULES = ('sqrt', 'log2', 'all')

_ARRAYS = ('node_offsets', 'feature', 'threshold', 'left', 'right', 'counts')
# fixed zip member timestamp, the earliest the format allows
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


@dataclasses.dataclass(frozen=True)
class ForestParams:
    """Random forest hyper parameters.

    `max_features` is the number of features considered per split: one of
    ``'sqrt'``, ``'log2'`` (rounded down, at least 1), ``'all'``, an integer
    count or a float fraction of the feature count.
    """
    n_trees: int = 100
    max_features: Union[str, int, float] = 'sqrt'
    min_samples_split: int = 2
    max_depth: Optional[int] = None
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if int(self.n_trees) != self.n_trees or self.n_trees < 1:
            raise ValueError(f'n_trees must be an integer >= 1. '
                             f'Is {self.n_trees}')
        if (int(self.min_samples_split) != self.min_samples_split or
                self.min_samples_split < 2):
            raise ValueError(f'min_samples_split must be an integer >= 2. '
                             f'Is {self.min_samples_split}')
        if self.max_depth is not None and (
                int(self.max_depth) != self.max_depth or self.max_depth < 1):
            raise ValueError(f'max_depth must be None or an integer >= 1. '
                             f'Is {self.max_depth}')
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError(f'seed must be a non-negative integer. '
                             f'Is {self.seed}')
        mf = self.max_features
        if isinstance(mf, str):
            if mf not in MAX_FEATURES_RULES:
                raise ValueError(f'max_features should be one of '
                                 f'{MAX_FEATURES_RULES}, an int or a float. '
                                 f'Is {mf}')
        elif isinstance(mf, (bool, np.bool_)):
            raise ValueError(f'Invalid max_features {mf}')
        elif isinstance(mf, (int, np.integer)):
            if mf < 1:
                raise ValueError(f'max_features must be >= 1. Is {mf}')
            mf = int(mf)
        elif isinstance(mf, (float, np.floating)):
            if not 0 < mf <= 1:
                raise ValueError(f'A fractional max_features must be in '
                                 f'(0, 1]. Is {mf}')
            mf = float(mf)
        else:
            raise ValueError(f'Invalid max_features {mf!r}')
        object.__setattr__(self, 'max_features', mf)
        object.__setattr__(self, 'n_trees', int(self.n_trees))
        object.__setattr__(self, 'min_samples_split',
                           int(self.min_samples_split))
        if self.max_depth is not None:
            object.__setattr__(self, 'max_depth', int(self.max_depth))
        object.__setattr__(self, 'bootstrap', bool(self.bootstrap))
        object.__setattr__(self, 'seed', int(self.seed))

    def features_per_split(self, n_features):
        mf = self.max_features
        if mf == 'sqrt':
            k = int(math.isqrt(n_features))
        elif mf == 'log2':
            k = int(math.log2(n_features)) if n_features > 0 else 0
        elif mf == 'all':
            k = n_features
        elif isinstance(mf, int):
            k = mf
        else:
            k = int(mf * n_features)
        return min(max(k, 1), n_features)


@dataclasses.dataclass(frozen=True, eq=False)
class DecisionTree:
    """Binary tree in flat arrays, the root is node 0"""
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def n_leaves(self):
        return int(np.sum(self.feature < 0))

    def apply(self, X):
        """Leaf index of every row of `X`"""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            n = node[rows]
            go_left = X[rows, self.feature[n]] <= self.threshold[n]
            node[rows] = np.where(go_left, self.left[n], self.right[n])
            active[rows] = self.feature[node[rows]] >= 0
        return node

    def predict_proba(self, X):
        """Fraction of Similar training samples in the leaf of each row"""
        c = self.counts[self.apply(X)]
        return c[:, 1] / c.sum(axis=1)

    def impurity_decrease(self, n_features):
        """Total weighted Gini decrease per feature"""
        out = np.zeros(n_features)
        n = self.counts.sum(axis=1).astype(float)
        gini = _gini(self.counts[:, 1], n)
        for i in np.flatnonzero(self.feature >= 0):
            l, r = self.left[i], self.right[i]
            out[self.feature[i]] += (n[i] * gini[i] - n[l] * gini[l] -
                                     n[r] * gini[r])
        return out


def _gini(pos, n):
    p = np.asarray(pos, dtype=float) / n
    return 2 * p * (1 - p)


def _best_split(X, y, k, rng):
    """Best (feature, threshold) by weighted Gini impurity, or None"""
    n = len(y)
    pos_total = int(y.sum())
    n_left = np.arange(1, n)
    n_right = n - n_left
    best, best_score = None, np.inf
    visited = 0
    for f in rng.permutation(X.shape[1]):
        if visited >= k:
            break
        col = X[:, f]
        order = np.argsort(col, kind='stable')
        xs = col[order]
        if xs[0] == xs[-1]:
            continue
        visited += 1
        pos_left = np.cumsum(y[order])[:-1]
        pos_right = pos_total - pos_left
        score = (2 * pos_left * (n_left - pos_left) / n_left +
                 2 * pos_right * (n_right - pos_right) / n_right)
        # only split between distinct values
        score = np.where(xs[1:] > xs[:-1], score, np.inf)
        i = int(np.argmin(score))
        if score[i] < best_score:
            threshold = (xs[i] + xs[i + 1]) / 2
            if not threshold < xs[i + 1]:
                threshold = xs[i]
            best, best_score = (int(f), float(threshold)), score[i]
    return best


def _check_training_data(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ValueError(f'X must be 2-D. Is {X.ndim}-D')
    if y.ndim != 1 or len(y) != len(X):
        raise ValueError(f'y must be 1-D with one label per row of X. '
                         f'Has shape {y.shape}, X has {len(X)} rows')
    if len(X) == 0:
        raise ValueError('Cannot train on zero rows')
    if X.shape[1] == 0:
        raise ValueError('Cannot train without features')
    if not np.isin(y, (0, 1)).all():
        raise ValueError('y must only hold the classes 0 and 1')
    return X, y.astype(np.int64)


def train_tree(X, y, params=ForestParams(), rng=None):
    """Grow one CART tree on all rows of `X`.

    Nodes are split greedily by weighted Gini impurity until they are pure,
    hold fewer than `min_samples_split` rows, reach `max_depth` or no feature
    takes two distinct values.
    """
    X, y = _check_training_data(X, y)
    rng = np.random.default_rng(rng)
    k = params.features_per_split(X.shape[1])
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        pos = int(y[idx].sum())
        counts.append((len(idx) - pos, pos))
        return len(feature) - 1

    everything = np.arange(len(y))
    stack = [(new_node(everything), everything, 0)]
    while stack:
        node, idx, depth = stack.pop()
        n_neg, n_pos = counts[node]
        if (n_neg == 0 or n_pos == 0 or len(idx) < params.min_samples_split
                or (params.max_depth is not None and
                    depth >= params.max_depth)):
            continue
        split = _best_split(X[idx], y[idx], k, rng)
        if split is None:
            continue
        f, t = split
        mask = X[idx, f] <= t
        feature[node], threshold[node] = f, t
        left[node] = new_node(idx[mask])
        right[node] = new_node(idx[~mask])
        stack.append((right[node], idx[~mask], depth + 1))
        stack.append((left[node], idx[mask], depth + 1))

    return DecisionTree(feature=np.array(feature, dtype=np.int64),
                        threshold=np.array(threshold, dtype=float),
                        left=np.array(left, dtype=np.int64),
                        right=np.array(right, dtype=np.int64),
                        counts=np.array(counts, dtype=np.int64).reshape(-1, 2))


def _fit_tree(X, y, params, rng):
    if params.bootstrap:
        idx = rng.integers(0, len(y), len(y))
        return train_tree(X[idx], y[idx], params, rng)
    return train_tree(X, y, params, rng)


@dataclasses.dataclass(frozen=True, eq=False)
class RandomForestModel:
    params: ForestParams
    trees: Tuple[DecisionTree, ...]
    schema: Optional[FeatureSchema] = None
    n_features: Optional[int] = None
    version: int = FORMAT_VERSION

    def __post_init__(self):
        object.__setattr__(self, 'trees', tuple(self.trees))
        if self.n_features is None:
            n = (self.schema.n_features if self.schema is not None else
                 int(max((t.feature.max() for t in self.trees), default=-1))
                 + 1)
            object.__setattr__(self, 'n_features', n)

    def _check_matrix(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise SchemaMismatchError(
                f'Model expects {self.n_features} features, got {X.shape[1]}')
        return X

    def predict_proba(self, X):
        """Mean over trees of the Similar fraction in the reached leaves"""
        X = self._check_matrix(X)
        proba = np.zeros(len(X))
        for tree in self.trees:
            proba += tree.predict_proba(X)
        return proba / len(self.trees)

    def predict(self, X):
        """Classes (0/1) of the rows of `X`; probability 0.5 is NotSimilar"""
        return (self.predict_proba(X) > 0.5).astype(np.int64)

    def feature_importances(self):
        """Mean decrease in impurity per column, normalized to sum 1"""
        total = np.zeros(self.n_features)
        for tree in self.trees:
            imp = tree.impurity_decrease(self.n_features)
            if imp.sum() > 0:
                total += imp / imp.sum()
        if total.sum() > 0:
            total /= total.sum()
        return total


def train_forest(X, y, params=ForestParams(), schema=None, n_jobs=1,
                 progress=False):
    """Train `params.n_trees` trees, each on its own bootstrap sample.

    Parameters
    ----------
    X : ndarray (n_rows, n_features)
    y : ndarray (n_rows,)
        Classes 0 (NotSimilar) and 1 (Similar)
    schema : FeatureSchema, optional
        Stored in the model to validate and build prediction inputs
    n_jobs : int
        joblib workers. The model does not depend on it.
    """
    X, y = _check_training_data(X, y)
    if schema is not None and schema.n_features != X.shape[1]:
        raise SchemaMismatchError(f'Schema has {schema.n_features} columns, '
                                  f'X has {X.shape[1]}')
    rngs = spawn_rngs(params.seed, params.n_trees)
    logger.info(f'Training {params.n_trees} trees on {len(y)} rows with '
                f'{X.shape[1]} features')
    trees = Parallel(n_jobs=n_jobs)(
        delayed(_fit_tree)(X, y, params, rng)
        for rng in tqdm(rngs, desc='trees', unit='tree', disable=not progress))
    return RandomForestModel(params, tuple(trees), schema, X.shape[1])


def predict(model, fv):
    """Class and Similar probability of one feature vector.

    `fv` is a :class:`.features.FeatureVector` or a 1-D array.
    """
    if isinstance(fv, FeatureVector):
        if model.schema is not None and (
                len(fv.tri_diff) != len(model.schema.vocabulary) or
                len(fv.grid) != model.schema.grid.n_grids):
            raise SchemaMismatchError(
                f'Feature vector with {len(fv.grid)} grids and '
                f'{len(fv.tri_diff)} trigrams does not match the model '
                f'schema')
        fv = fv.as_array()
    fv = np.asarray(fv, dtype=float)
    if fv.ndim != 1:
        raise SchemaMismatchError(f'Expected one feature vector, got shape '
                                  f'{fv.shape}')
    p = float(model.predict_proba(fv[None, :])[0])
    return PairClass(p > 0.5), p


def _schema_to_dict(schema):
    if schema is None:
        return None
    return {
        'vocabulary': list(schema.vocabulary.trigrams),
        'grid': dataclasses.asdict(schema.grid),
        'rules': (None if schema.rules is None else
                  [list(r) for r in schema.rules.rules]),
    }


def _schema_from_dict(d):
    if d is None:
        return None
    rules = d['rules']
    return FeatureSchema(
        TrigramVocabulary(tuple(d['vocabulary'])),
        GridSpec(**d['grid']),
        None if rules is None else NormalizationRules(
            tuple(tuple(r) for r in rules)))


def _write_member(zf, name, data):
    info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def save_model(model, path):
    """Write `model` to `path`. Identical models give identical files."""
    params = dataclasses.asdict(model.params)
    meta = {
        'format': FORMAT_NAME,
        'version': FORMAT_VERSION,
        'params': params,
        'n_features': model.n_features,
        'schema': _schema_to_dict(model.schema),
        'columns': (None if model.schema is None else
                    model.schema.column_names()),
        'stationsim': __version__,
    }
    trees = model.trees
    sizes = [t.n_nodes for t in trees]
    arrays = {
        'node_offsets': np.concatenate([[0], np.cumsum(sizes)]).astype(
            np.int64),
        'feature': np.concatenate([t.feature for t in trees]),
        'threshold': np.concatenate([t.threshold for t in trees]),
        'left': np.concatenate([t.left for t in trees]),
        'right': np.concatenate([t.right for t in trees]),
        'counts': np.concatenate([t.counts for t in trees]),
    }
    with atomic_open(path, 'wb') as f:
        with zipfile.ZipFile(f, 'w') as zf:
            _write_member(zf, 'meta.json',
                          json.dumps(meta, sort_keys=True, indent=1,
                                     ensure_ascii=False).encode('utf-8'))
            for name in _ARRAYS:
                buf = io.BytesIO()
                np.lib.format.write_array(buf, np.ascontiguousarray(
                    arrays[name]), allow_pickle=False)
                _write_member(zf, name + '.npy', buf.getvalue())
    logger.info(f'Saved forest with {len(trees)} trees to {path}')


def load_model(path):
    """Read a model written by :func:`save_model`.

    Raises ModelFormatError for files that are not intact model files and
    ModelVersionError for another format version.
    """
    try:
        with zipfile.ZipFile(path) as zf:
            meta = json.loads(zf.read('meta.json').decode('utf-8'))
            if not isinstance(meta, dict) or \
               meta.get('format') != FORMAT_NAME:
                raise ModelFormatError(f'{path} is not a stationsim model')
            if meta.get('version') != FORMAT_VERSION:
                raise ModelVersionError(
                    f'{path} has model format version {meta.get("version")}'
                    f', this stationsim reads version {FORMAT_VERSION}')
            arrays = {}
            for name in _ARRAYS:
                with zf.open(name + '.npy') as f:
                    arrays[name] = np.lib.format.read_array(
                        io.BytesIO(f.read()), allow_pickle=False)
            params = ForestParams(**meta['params'])
            schema = _schema_from_dict(meta['schema'])
            n_features = int(meta['n_features'])
    except ModelFormatError:
        raise
    except (zipfile.BadZipFile, KeyError, ValueError, TypeError,
            EOFError, zlib.error) as e:
        raise ModelFormatError(f'Corrupt model file {path}: {e}') from None

    off = arrays['node_offsets']
    n_nodes = len(arrays['feature'])
    if (off.ndim != 1 or len(off) != params.n_trees + 1 or off[0] != 0 or
            off[-1] != n_nodes or np.any(np.diff(off) < 1) or
            any(len(arrays[k]) != n_nodes for k in _ARRAYS[1:]) or
            arrays['counts'].shape != (n_nodes, 2) or
            (schema is not None and schema.n_features != n_features)):
        raise ModelFormatError(f'Inconsistent model arrays in {path}')
    trees = []
    for start, stop in zip(off[:-1], off[1:]):
        tree = DecisionTree(*(arrays[k][start:stop] for k in _ARRAYS[1:]))
        # children come after their parent, so every path ends in a leaf
        internal = np.flatnonzero(tree.feature >= 0)
        if (np.any(tree.feature >= n_features) or
                np.any(tree.left[internal] <= internal) or
                np.any(tree.left[internal] >= tree.n_nodes) or
                np.any(tree.right[internal] <= internal) or
                np.any(tree.right[internal] >= tree.n_nodes) or
                np.any(tree.counts.sum(axis=1) < 1)):
            raise ModelFormatError(f'Corrupt tree in {path}')
        trees.append(tree)
    return RandomForestModel(params, tuple(trees), schema, n_features)
