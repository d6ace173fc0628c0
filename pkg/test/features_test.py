#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import numpy as np
import numpy.testing as npt
import pytest

from stationsim.features import (FeatureSchema, TrigramVocabulary,
                                 build_vocabulary, extract_features,
                                 feature_matrix, trigram_mismatch,
                                 write_feature_matrix)
from stationsim.geometry import GridSpec
from stationsim.labels import default_rules, trigrams
from stationsim.station import (PairClass, StationIdentifier, StationPair,
                                canonical_order)

ROW1 = StationPair(
    StationIdentifier('Freiburg im Breisgau Hauptbahnhof', 47.9966, 7.8404),
    StationIdentifier('Hauptbahnhof', 47.9965, 7.8407), PairClass.Similar)
ROW2 = StationPair(StationIdentifier('Okenstraße', 48.0105, 7.8545),
                   StationIdentifier('Nordstraße', 48.0111, 7.8541))
ROW3 = StationPair(
    StationIdentifier('ZOB', 47.9959, 7.8405),
    StationIdentifier('Zentraler Omnibusbahnhof, Freiburg im Breisgau',
                      47.9960, 7.8407), PairClass.Similar)


# top 15 trigrams of the Freiburg test data, in column order
FREIBURG_TOP15 = TrigramVocabulary((
    'rei', 'tra', 'raß', 'aße', 'urg', 'bur', 'ibu', ' Fr', 'Fre', 'eib', 'rg ',
    'eis', 'Bre', 'sga', 'isg'))


def freiburg_vocabulary():
    corpus = [ROW1.a.label, ROW1.b.label, ROW2.a.label, ROW2.b.label,
              ROW3.a.label, ROW3.b.label]
    return build_vocabulary(corpus, 15)


def test_build_vocabulary():
    assert build_vocabulary(['aa'], 10).trigrams == (' aa', 'aa ')
    assert build_vocabulary(['abc', 'abd'], 1).trigrams == (' ab',)
    vocab = build_vocabulary(['London', 'Londonderry'], 3)
    assert len(vocab) == 3
    assert vocab.index[vocab.trigrams[2]] == 2
    with pytest.raises(ValueError):
        build_vocabulary([], 3)
    with pytest.raises(ValueError):
        build_vocabulary(['a'], 0)


def test_vocabulary_larger_than_corpus_warns():
    with pytest.warns(UserWarning):
        vocab = build_vocabulary(['ab'], 100)
    assert set(vocab) == set(trigrams('ab'))


def test_vocabulary_rejects_duplicates():
    with pytest.raises(ValueError):
        TrigramVocabulary(('abc', 'abc'))


@pytest.mark.parametrize('a, b, expected', [
    ('Freiburg im Breisgau Hauptbahnhof', 'Hauptbahnhof', 20),
    ('Okenstraße', 'Nordstraße', 10),
    ('ZOB', 'Zentraler Omnibusbahnhof, Freiburg im Breisgau', 47),
    ('Freiburg', 'Freiburg', 0),
    # same trigram set, different multiplicity
    ('aaaa', 'aaa', 0),
])
def test_trigram_mismatch(a, b, expected):
    assert trigram_mismatch(a, b) == expected
    assert trigram_mismatch(b, a) == expected


def test_row1_features():
    vocab = TrigramVocabulary(('rei', 'Hau', 'bur', 'xyz'))
    fv = extract_features(ROW1, vocab, GridSpec(256, 2))
    assert abs(fv.d_m - 24) <= 2
    assert fv.d_3g == 20
    assert fv.grid == ((133, 196), (133, 195))
    npt.assert_array_equal(fv.tri_diff, (-2, 0, -1, 0))


def test_row2_features():
    vocab = TrigramVocabulary(('str', 'tra', 'raß', 'aße', 'ße '))
    fv = extract_features(canonical_order(ROW2), vocab)
    assert abs(fv.d_m - 72) <= 2
    assert fv.d_3g == 10
    npt.assert_array_equal(fv.tri_diff, (0, 0, 0, 0, 0))


def test_row3_trigram_features():
    fv = extract_features(ROW3, TrigramVocabulary((' ZO', 'ZOB', ' Ze')))
    assert fv.d_3g == 47
    npt.assert_array_equal(fv.tri_diff, (-1, -1, 1))


@pytest.mark.parametrize('pair, tri_diff', [
    (ROW1, [-2, 0, 0, 0] + [-1] * 11),
    (ROW2, [0] * 15),
    (ROW3, [2, 1, 0, 0, 1, 1, 2] + [1] * 8),
])
def test_freiburg_feature_rows(pair, tri_diff):
    fv = extract_features(pair, FREIBURG_TOP15, GridSpec(256, 2))
    assert fv.grid == ((133, 196), (133, 195))
    npt.assert_array_equal(fv.tri_diff, tri_diff)
    names = FeatureSchema(FREIBURG_TOP15).column_names()
    assert names[6:] == [f'tri[{t}]' for t in FREIBURG_TOP15.trigrams]


def test_identical_identifiers():
    pair = StationPair(ROW1.a, ROW1.a)
    fv = extract_features(pair, freiburg_vocabulary())
    assert fv.d_m == 0 and fv.d_3g == 0
    assert not any(fv.tri_diff)


def test_swapping_sides_negates_trigram_differences():
    vocab = freiburg_vocabulary()
    for pair in (ROW1, ROW2, ROW3):
        fv = extract_features(pair, vocab)
        swapped = extract_features(pair.swapped(), vocab)
        npt.assert_allclose(swapped.d_m, fv.d_m)
        assert swapped.d_3g == fv.d_3g
        assert swapped.grid == fv.grid
        npt.assert_array_equal(swapped.tri_diff, -fv.tri_diff)


def test_feature_vector_layout():
    vocab = freiburg_vocabulary()
    schema = FeatureSchema(vocab, GridSpec(256, 3))
    fv = schema.extract(ROW1)
    row = fv.as_array()
    assert len(row) == schema.n_features == 2 + 6 + 15
    npt.assert_allclose(row[:2], [fv.d_m, fv.d_3g])
    npt.assert_array_equal(row[2:8], np.ravel(fv.grid))
    npt.assert_array_equal(row[8:], fv.tri_diff)
    names = schema.column_names()
    assert names[:6] == ['d_m', 'd_3g', 'x0', 'y0', 'x1', 'y1']
    assert names[8] == f'tri[{vocab.trigrams[0]}]'


def test_normalized_features():
    pair = StationPair(StationIdentifier('Freiburg Hbf', 48.0, 7.8),
                       StationIdentifier('Freiburg Hauptbahnhof', 48.0, 7.8))
    vocab = build_vocabulary(['freiburg hauptbahnhof'], 50)
    assert extract_features(pair, vocab).d_3g > 0
    fv = extract_features(pair, vocab, rules=default_rules())
    assert fv.d_3g == 0
    assert not any(fv.tri_diff)


def test_feature_matrix_and_export(tmp_path):
    vocab = freiburg_vocabulary()
    pairs = [ROW1, canonical_order(ROW2), ROW3]
    X = feature_matrix(pairs, vocab)
    assert X.shape == (3, 2 + 4 + 15)
    npt.assert_array_equal(X[1], extract_features(pairs[1], vocab).as_array())

    schema = FeatureSchema(vocab)
    path = tmp_path / 'features.tsv'
    write_feature_matrix(pairs, schema, path)
    lines = path.read_text(encoding='utf-8').splitlines()
    header = lines[0].split('\t')
    assert header == schema.column_names() + ['class']
    data = np.loadtxt(path, delimiter='\t', skiprows=1)
    npt.assert_array_equal(data[:, :-1], X)
    npt.assert_array_equal(data[:, -1], [1, 0, 1])
