#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import io

import pytest

from stationsim.station import (GroundTruth, GroundTruthFormatError,
                                OsmParseError, PairClass, Provenance,
                                StationIdentifier, StationPair,
                                canonical_order, format_pair, parse_pair,
                                read_ground_truth, read_unlabeled_pairs,
                                write_ground_truth)

A = StationIdentifier('Freiburg Hbf', 47.9966, 7.8404)
B = StationIdentifier('Hauptbahnhof', 47.9965, 7.8407)
C = StationIdentifier('Stadttheater', 47.9960, 7.8460)


def test_identifier_validation():
    with pytest.raises(ValueError):
        StationIdentifier('', 0, 0)
    with pytest.raises(ValueError):
        StationIdentifier('x', 91, 0)
    with pytest.raises(ValueError):
        StationIdentifier('x', 0, -180.5)
    with pytest.raises(ValueError):
        StationIdentifier('x', float('nan'), 0)
    # ints and floats compare equal after construction
    assert StationIdentifier('x', 1, 2) == StationIdentifier('x', 1.0, 2.0)


def test_canonical_order():
    pair = StationPair(B, A, PairClass.Similar)
    ordered = canonical_order(pair)
    assert ordered.a == A and ordered.b == B
    assert ordered.pair_class is PairClass.Similar
    assert canonical_order(ordered) == ordered
    assert pair.key == ordered.key


def test_ground_truth_dedup_and_stations():
    extra = StationIdentifier('Unpaired', 48.0, 7.8)
    gt = GroundTruth([StationPair(B, A, PairClass.Similar),
                      StationPair(A, B, PairClass.NotSimilar),
                      StationPair(A, C)], stations=[extra])
    assert len(gt) == 2
    # first occurrence wins
    assert gt[0].similar
    assert gt.n_similar == 1 and gt.n_not_similar == 1
    assert set(gt.stations) == {A, B, C, extra}
    assert gt.classes() == [1, 0]


def test_ground_truth_rejects_self_pair():
    with pytest.raises(ValueError):
        GroundTruth([StationPair(A, A)])


def test_subset_and_map_labels():
    gt = GroundTruth([StationPair(A, B, PairClass.Similar), StationPair(A, C)])
    sub = gt.subset([1])
    assert len(sub) == 1 and sub[0].b == C
    upper = gt.map_labels(str.upper)
    assert upper[0].a.label == 'FREIBURG HBF'
    assert upper[0].similar


def test_ground_truth_file_round_trip(tmp_path):
    gt = GroundTruth([
        StationPair(A, B, PairClass.Similar),
        StationPair(A, C, PairClass.NotSimilar, Provenance.SpicedNegative),
        StationPair(B, C.moved(47.99601, 7.84601), PairClass.Similar,
                    Provenance.SpicedNoise)])
    path = tmp_path / 'gt.tsv'
    write_ground_truth(gt, path)
    assert read_ground_truth(path) == GroundTruth(gt.pairs)
    first = path.read_text(encoding='utf-8').splitlines()[0].split('\t')
    assert first[6:] == ['1', 'orig']


def test_write_refuses_tab_labels(tmp_path):
    # constructed directly, OSM ingestion drops such labels
    bad = StationIdentifier('a\tb', 0, 0)
    path = tmp_path / 'gt.tsv'
    with pytest.raises(ValueError):
        write_ground_truth(GroundTruth([StationPair(bad, A)]), path)
    assert not path.exists()


@pytest.mark.parametrize('line', [
    'a\t1\t2\tb\t3\t4\t1',
    'a\tx\t2\tb\t3\t4\t1\torig',
    'a\t1\t2\tb\t3\t4\t2\torig',
    'a\t1\t2\tb\t3\t4\t1\tfoo',
    'a\t100\t2\tb\t3\t4\t0\torig',
])
def test_parse_pair_errors(line):
    with pytest.raises(GroundTruthFormatError) as e:
        parse_pair(line, lineno=7)
    assert e.value.lineno == 7
    assert 'line 7' in str(e.value)


def test_read_reports_line_number(tmp_path):
    path = tmp_path / 'gt.tsv'
    path.write_text(format_pair(StationPair(A, B)) + '\n\nbroken\n',
                    encoding='utf-8')
    with pytest.raises(GroundTruthFormatError) as e:
        read_ground_truth(path)
    assert e.value.lineno == 3


def test_read_unlabeled_pairs_continues_after_errors():
    text = (format_pair(StationPair(A, B), with_class=False) + '\n'
            'only\ttwo\n'
            + format_pair(StationPair(A, C), with_class=False) + '\n')
    rows = list(read_unlabeled_pairs(io.StringIO(text)))
    assert [r[0] for r in rows] == [1, 2, 3]
    assert rows[0][2] == StationPair(A, B) and rows[0][3] is None
    assert rows[1][2] is None
    assert isinstance(rows[1][3], GroundTruthFormatError)
    assert rows[2][2].b == C


def test_osm_parse_error_position():
    e = OsmParseError('mismatched tag', line=3, column=5, offset=42)
    assert str(e) == 'line 3, column 5, byte 42: mismatched tag'
    assert (e.line, e.column, e.offset) == (3, 5, 42)
