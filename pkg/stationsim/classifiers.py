#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""Binary station similarity classifiers built on similarity measures.

A :class:`Measure` maps two identifiers to a raw value: the distance in meter
for the position measure ``P`` and a label similarity in [0, 1] for the
string measures. A :class:`ThresholdedMeasure` turns the raw value into a
score where 0.5 is the decision boundary, and a :class:`VotingClassifier`
combines several thresholded measures.

Classifier names understood by :func:`parse_classifier`::

  LEQ, PEQ                 naive equivalency classifiers
  P, ED, PED, J, JW, JAC,  single thresholded measures
  BTS, TFIDF
  P+ED, P+BTS, ...         position combined with a string measure
"""

import dataclasses
import enum
import functools
from typing import Callable, Optional, Tuple

import numpy as np

from . import labels
from .common import check_open_unit, check_positive
from .geometry import geo_distance, position_score
from .station import PairClass

POSITION = 'P'
STRING_MEASURES = ('ED', 'PED', 'J', 'JW', 'JAC', 'BTS', 'TFIDF')
MEASURES = (POSITION,) + STRING_MEASURES
NAIVE = ('LEQ', 'PEQ')
# measures that need a model trained on the training split
TRAINED = ('TFIDF',)

# default PEQ tolerance in meter
PEQ_EPSILON = 1.0


class Voting(enum.Enum):
    Soft = 'soft'
    Hard = 'hard'


def classify_peq(a, b, epsilon=PEQ_EPSILON):
    """Similar iff the positions are closer than `epsilon` meter"""
    epsilon = check_positive('epsilon', epsilon)
    return PairClass(geo_distance(a, b) < epsilon)


def classify_leq(a, b):
    """Similar iff the labels are equal"""
    return PairClass(a.label == b.label)


def rescale(sim, t):
    """Map a similarity in [0, 1] piecewise linearly such that `t` maps to
    0.5. Works elementwise on arrays.

    >>> rescale(0.9, 0.8)
    0.75
    """
    t = check_open_unit('t', t)
    s = np.asarray(sim, dtype=float)
    out = np.where(s > t, 0.5 + (s - t) / (2 * (1 - t)), s / (2 * t))
    if out.ndim == 0:
        return float(out)
    return out


@dataclasses.dataclass(frozen=True)
class Measure:
    """A named similarity measure.

    `fun` compares two labels and is None for the position measure. When
    `rules` are given, labels are normalized before they are compared.
    """
    name: str
    fun: Optional[Callable[[str, str], float]] = None
    rules: Optional[labels.NormalizationRules] = None

    @property
    def is_position(self):
        return self.fun is None

    def prepare(self, label):
        if self.rules is None:
            return label
        return labels.normalize(label, self.rules)

    def raw(self, a, b):
        """Distance in meter for P, label similarity otherwise"""
        if self.is_position:
            return geo_distance(a, b)
        return self.fun(self.prepare(a.label), self.prepare(b.label))


def make_measure(name, tfidf=None, rules=None, bts_mode='permutations',
                 bts_limit=labels.BTS_LIMIT):
    """Create the measure `name`, one of :data:`MEASURES`.

    TFIDF needs a trained `tfidf` model. `bts_mode` and `bts_limit` select the
    BTS fallback rule, see :func:`.labels.bts`.
    """
    if name == POSITION:
        return Measure(name)
    funs = {
        'ED': labels.ed_similarity,
        'PED': labels.ped_similarity,
        'J': labels.jaro,
        'JW': labels.jaro_winkler,
        'JAC': labels.jaccard,
        'BTS': functools.partial(labels.bts, mode=bts_mode, limit=bts_limit),
    }
    if name == 'TFIDF':
        if tfidf is None:
            raise ValueError('The TFIDF measure needs a trained TfidfModel')
        fun = functools.partial(labels.tfidf_similarity, tfidf)
    elif name in funs:
        fun = funs[name]
    else:
        raise ValueError(f'Unknown measure. Should be one of {MEASURES}. '
                         f'Is {name}')
    return Measure(name, fun, rules)


@dataclasses.dataclass(frozen=True)
class ThresholdedMeasure:
    """A measure with its decision threshold.

    The threshold is the distance d_hat in meter for the position measure and
    a similarity in (0, 1) for label measures.
    """
    measure: Measure
    threshold: float

    def __post_init__(self):
        if self.measure.is_position:
            t = check_positive('d_hat', self.threshold)
        else:
            t = check_open_unit('t', self.threshold)
        object.__setattr__(self, 'threshold', t)

    def score_raw(self, raw):
        """Rescaled score(s) from raw measure value(s)"""
        if self.measure.is_position:
            out = position_score(raw, self.threshold)
            return float(out) if np.ndim(out) == 0 else out
        return rescale(raw, self.threshold)

    def score(self, a, b):
        return self.score_raw(self.measure.raw(a, b))


def classify_measure(pair, measure):
    """Similar iff the rescaled score of `pair` is strictly above 0.5"""
    return PairClass(bool(measure.score(pair.a, pair.b) > 0.5))


def vote(scores, mode=Voting.Soft):
    """Combine member scores of shape (n_members, ...) into decisions.

    Soft voting averages the scores, hard voting takes a strict majority of
    the member decisions; both compare strictly against 0.5, so hard vote ties
    are NotSimilar.
    """
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    mode = Voting(mode)
    if mode is Voting.Soft:
        return scores.mean(axis=0) > 0.5
    return (scores > 0.5).sum(axis=0) * 2 > scores.shape[0]


@dataclasses.dataclass(frozen=True)
class VotingClassifier:
    members: Tuple[ThresholdedMeasure, ...]
    mode: Voting = Voting.Soft

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError('VotingClassifier needs at least one member')
        object.__setattr__(self, 'members', members)
        object.__setattr__(self, 'mode', Voting(self.mode))


def classify_voting(pair, vc):
    scores = [[m.score(pair.a, pair.b)] for m in vc.members]
    return PairClass(bool(vote(scores, vc.mode)[0]))


def parse_classifier(name):
    """Split a classifier name into its measure names.

    >>> parse_classifier('P+TFIDF')
    ('P', 'TFIDF')
    """
    name = name.strip().upper()
    if name in NAIVE or name == 'RF':
        return (name,)
    parts = tuple(p.strip() for p in name.split('+'))
    if not all(parts):
        raise ValueError(f'Invalid classifier name {name!r}')
    for p in parts:
        if p not in MEASURES:
            raise ValueError(f'Unknown measure {p!r} in classifier {name!r}. '
                             f'Should be one of {MEASURES}')
    if len(set(parts)) != len(parts):
        raise ValueError(f'Repeated measure in classifier {name!r}')
    return parts
