#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""Feature vectors of station pairs for the random forest.

Columns, in this order::

  d_m              distance in meter
  d_3g             number of non-matching trigrams (set symmetric difference)
  x0, y0, x1, ...  cell of the pair centroid on each interwoven grid
  tri[...]         per vocabulary trigram: count in label b - count in label a
"""

import dataclasses
import logging
import warnings
from collections import Counter
from typing import Dict, Optional, Tuple

import numpy as np
from tqdm import tqdm

from . import labels
from .common import atomic_open
from .geometry import GridSpec, centroid, geo_distance, grid_cells

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class TrigramVocabulary:
    """The k most frequent training trigrams, most frequent first"""
    trigrams: Tuple[str, ...]
    index: Dict[str, int] = dataclasses.field(init=False, repr=False,
                                              compare=False)

    def __post_init__(self):
        trigrams = tuple(self.trigrams)
        if len(set(trigrams)) != len(trigrams):
            raise ValueError('Duplicate trigrams in vocabulary')
        object.__setattr__(self, 'trigrams', trigrams)
        object.__setattr__(self, 'index',
                           {t: i for i, t in enumerate(trigrams)})

    def __len__(self):
        return len(self.trigrams)

    def __iter__(self):
        return iter(self.trigrams)


def build_vocabulary(corpus, k):
    """Top `k` trigrams of `corpus` by total occurrence count.

    Ties are broken lexicographically.

    >>> build_vocabulary(['aa'], 10).trigrams
    (' aa', 'aa ')
    """
    if int(k) != k or k < 1:
        raise ValueError(f'k must be an integer >= 1. Is {k}')
    counts = Counter()
    n = 0
    for label in corpus:
        counts.update(labels.trigrams(label))
        n += 1
    if n == 0:
        raise ValueError('Cannot build a trigram vocabulary from an empty '
                         'corpus')
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    if k > len(ranked):
        warnings.warn(f"Requested {k} trigrams but the corpus has only "
                      f"{len(ranked)}")
    return TrigramVocabulary(tuple(t for t, _ in ranked[:int(k)]))


def trigram_mismatch(a, b):
    """|A ∪ B| - |A ∩ B| over the trigram sets of `a` and `b`"""
    return len(set(labels.trigrams(a)) ^ set(labels.trigrams(b)))


@dataclasses.dataclass(frozen=True)
class FeatureVector:
    d_m: float
    d_3g: int
    grid: Tuple[Tuple[int, int], ...]
    tri_diff: np.ndarray

    def as_array(self):
        head = [self.d_m, self.d_3g]
        for x, y in self.grid:
            head += [x, y]
        return np.concatenate([np.asarray(head, dtype=float),
                               np.asarray(self.tri_diff, dtype=float)])


def extract_features(pair, vocab, spec=GridSpec(), rules=None):
    """Feature vector of `pair`.

    The pair is used as given, callers pass it in canonical order. With
    `rules`, trigram features use normalized labels.
    """
    a, b = pair.a.label, pair.b.label
    if rules is not None:
        a, b = labels.normalize(a, rules), labels.normalize(b, rules)
    ta, tb = labels.trigrams(a), labels.trigrams(b)
    tri_diff = np.zeros(len(vocab), dtype=np.int64)
    for t, n in tb.items():
        i = vocab.index.get(t)
        if i is not None:
            tri_diff[i] += n
    for t, n in ta.items():
        i = vocab.index.get(t)
        if i is not None:
            tri_diff[i] -= n
    cells = grid_cells(centroid(pair.a, pair.b), spec)
    return FeatureVector(
        d_m=geo_distance(pair.a, pair.b),
        d_3g=len(set(ta) ^ set(tb)),
        grid=tuple((c.x, c.y) for c in cells),
        tri_diff=tri_diff)


@dataclasses.dataclass(frozen=True)
class FeatureSchema:
    """Everything needed to turn a pair into a feature row.

    Stored with a trained model, so training and prediction use the same
    columns.
    """
    vocabulary: TrigramVocabulary
    grid: GridSpec = GridSpec()
    rules: Optional[labels.NormalizationRules] = None

    @property
    def n_features(self):
        return 2 + 2 * self.grid.n_grids + len(self.vocabulary)

    def column_names(self):
        names = ['d_m', 'd_3g']
        for i in range(self.grid.n_grids):
            names += [f'x{i}', f'y{i}']
        names += [f'tri[{t}]' for t in self.vocabulary]
        return names

    def extract(self, pair):
        return extract_features(pair, self.vocabulary, self.grid, self.rules)

    def matrix(self, pairs, progress=False):
        return feature_matrix(pairs, self.vocabulary, self.grid, self.rules,
                              progress=progress)


def feature_matrix(pairs, vocab, spec=GridSpec(), rules=None, progress=False):
    """Feature rows of `pairs` stacked into an (n_pairs, n_features) array"""
    pairs = list(pairs)
    n_features = 2 + 2 * spec.n_grids + len(vocab)
    X = np.zeros((len(pairs), n_features))
    for i, pair in enumerate(tqdm(pairs, desc='features', unit='pair',
                                  disable=not progress)):
        X[i] = extract_features(pair, vocab, spec, rules).as_array()
    return X


def write_feature_matrix(pairs, schema, path, with_class=True):
    """Write the feature rows of `pairs` as TSV with a header of column names.

    With `with_class`, the ground truth class is appended as last column.
    """
    pairs = list(pairs)
    X = schema.matrix(pairs)
    names = schema.column_names()
    if with_class:
        y = np.array([int(p.pair_class) for p in pairs], dtype=float)
        X = np.column_stack([X, y])
        names.append('class')
    with atomic_open(path) as f:
        f.write('\t'.join(names) + '\n')
        if len(X):
            np.savetxt(f, X, fmt='%.17g', delimiter='\t')
    logger.info(f'Wrote {len(pairs)} feature rows to {path}')
