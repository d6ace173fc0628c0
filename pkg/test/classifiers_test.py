#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import numpy as np
import numpy.testing as npt
import pytest

from stationsim.classifiers import (MEASURES, ThresholdedMeasure,
                                    VotingClassifier, Voting, classify_leq,
                                    classify_measure, classify_peq,
                                    classify_voting, make_measure,
                                    parse_classifier, rescale, vote)
from stationsim.geometry import offset_meters
from stationsim.labels import default_rules, tfidf_train
from stationsim.station import PairClass, StationIdentifier, StationPair

KX = StationIdentifier('London St Pancras', 51.5320, -0.1233)
KX_DOT = StationIdentifier('London St. Pancras', 51.5320, -0.1233)


def near(ident, label, meters):
    return StationIdentifier(label, *offset_meters(ident, meters, 0))


def test_rescale_worked_example():
    assert rescale(0.9, 0.8) == 0.75
    assert rescale(0.8, 0.8) == 0.5
    assert rescale(0.0, 0.3) == 0
    assert rescale(1.0, 0.3) == 1


def test_rescale_monotone_and_bounded():
    s = np.linspace(0, 1, 101)
    for t in (0.05, 0.5, 0.95):
        r = rescale(s, t)
        assert np.all(np.diff(r) > 0)
        assert r.min() >= 0 and r.max() <= 1
        npt.assert_array_equal(r > 0.5, s > t)


@pytest.mark.parametrize('t', [0, 1, -0.5, 1.5])
def test_rescale_rejects_threshold(t):
    with pytest.raises(ValueError):
        rescale(0.5, t)


def test_naive_classifiers():
    assert classify_leq(KX, KX_DOT) is PairClass.NotSimilar
    assert classify_leq(KX, near(KX, 'London St Pancras', 500)) is \
        PairClass.Similar
    assert classify_peq(KX, KX_DOT) is PairClass.Similar
    assert classify_peq(KX, near(KX, 'London St Pancras', 2)) is \
        PairClass.NotSimilar
    assert classify_peq(KX, near(KX, 'x', 2), epsilon=5) is PairClass.Similar


def test_thresholded_measure_validation():
    with pytest.raises(ValueError):
        ThresholdedMeasure(make_measure('ED'), 1.0)
    with pytest.raises(ValueError):
        ThresholdedMeasure(make_measure('P'), 0)
    assert ThresholdedMeasure(make_measure('P'), 250).threshold == 250


def test_classify_measure():
    ed = ThresholdedMeasure(make_measure('ED'), 0.8)
    # one edit in 18 characters
    assert classify_measure(StationPair(KX, KX_DOT), ed) is PairClass.Similar
    p = ThresholdedMeasure(make_measure('P'), 100)
    assert classify_measure(StationPair(KX, near(KX, 'x', 99)), p) is \
        PairClass.Similar
    assert classify_measure(StationPair(KX, near(KX, 'x', 101)), p) is \
        PairClass.NotSimilar


def test_measure_normalization():
    a = StationIdentifier('Freiburg Hbf', 48.0, 7.8)
    b = StationIdentifier('Freiburg Hauptbahnhof', 48.0, 7.8)
    assert make_measure('ED').raw(a, b) < 1
    assert make_measure('ED', rules=default_rules()).raw(a, b) == 1


def test_tfidf_measure_needs_model():
    with pytest.raises(ValueError):
        make_measure('TFIDF')
    model = tfidf_train(['London St Pancras', 'London Bridge'])
    m = make_measure('TFIDF', tfidf=model)
    assert m.raw(KX, KX) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        make_measure('XYZ')


def test_vote_soft_and_hard():
    scores = [[0.75], [0.45]]
    assert vote(scores, Voting.Soft)[0]
    # one of two members votes similar: tie
    assert not vote(scores, Voting.Hard)[0]
    assert vote([[0.75], [0.45], [0.6]], 'hard')[0]
    npt.assert_array_equal(vote([[0.9, 0.2, 0.5]]), [True, False, False])


def test_single_member_voting_equals_measure():
    rng = np.random.default_rng(3)
    ed = ThresholdedMeasure(make_measure('ED'), 0.7)
    for mode in Voting:
        vc = VotingClassifier([ed], mode)
        for _ in range(50):
            label = ''.join(rng.choice(list('abc '), 6))
            if not label.strip():
                continue
            pair = StationPair(KX, StationIdentifier(label, 51.53, -0.12))
            assert classify_voting(pair, vc) == classify_measure(pair, ed)


def test_combined_classifier():
    vc = VotingClassifier([ThresholdedMeasure(make_measure('P'), 100),
                           ThresholdedMeasure(make_measure('ED'), 0.8)])
    assert classify_voting(StationPair(KX, near(KX, 'London St. Pancras',
                                                  20)), vc) is \
        PairClass.Similar
    assert classify_voting(StationPair(KX, near(KX, 'Kings Cross', 900)),
                           vc) is PairClass.NotSimilar
    with pytest.raises(ValueError):
        VotingClassifier([])


@pytest.mark.parametrize('name, parts', [
    ('P', ('P',)),
    ('p+ed', ('P', 'ED')),
    ('P+TFIDF', ('P', 'TFIDF')),
    ('RF', ('RF',)),
    ('leq', ('LEQ',)),
    ('PEQ', ('PEQ',)),
])
def test_parse_classifier(name, parts):
    assert parse_classifier(name) == parts


@pytest.mark.parametrize('name', ['X', 'P+', 'P+P', 'P+RF', 'LEQ+ED', ''])
def test_parse_classifier_errors(name):
    with pytest.raises(ValueError):
        parse_classifier(name)


def test_all_measures_constructible():
    model = tfidf_train(['a'])
    for name in MEASURES:
        assert make_measure(name, tfidf=model).name == name
