#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""Station identifiers, station pairs and the ground truth built from them.

A station identifier is a triple ``(label, lat, lon)``. Two identifiers form
a :class:`StationPair` that is either similar (both denote the same real
world station) or not. Ground truth pairs are unordered; they are stored in
canonical order, see :func:`canonical_order`.

Ground truth TSV format (UTF-8, one pair per line, no header)::

  label_a  lat_a  lon_a  label_b  lat_b  lon_b  class  provenance

with class ``1``/``0`` and provenance ``orig``/``sneg``/``snoise``.
"""

import dataclasses
import enum
import logging
import math

from .common import atomic_open

logger = logging.getLogger(__name__)


class StationSimError(Exception):
    """Base class of all stationsim errors"""


class GroundTruthFormatError(StationSimError, ValueError):
    def __init__(self, msg, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            msg = f"line {lineno}: {msg}"
        super().__init__(msg)


class SchemaMismatchError(StationSimError, ValueError):
    pass


class ConfigError(StationSimError):
    pass


class OsmParseError(StationSimError):
    """Malformed OSM XML. Carries the position of the error if known."""

    def __init__(self, msg, line=None, column=None, offset=None):
        self.line, self.column, self.offset = line, column, offset
        where = []
        if line is not None:
            where.append(f'line {line}')
        if column is not None:
            where.append(f'column {column}')
        if offset is not None:
            where.append(f'byte {offset}')
        if where:
            msg = f"{', '.join(where)}: {msg}"
        super().__init__(msg)


class SpicingError(StationSimError):
    pass


class ModelFormatError(StationSimError):
    pass


class ModelVersionError(ModelFormatError):
    pass


class PairClass(enum.IntEnum):
    NotSimilar = 0
    Similar = 1


class Provenance(enum.Enum):
    Original = 'orig'
    SpicedNegative = 'sneg'
    SpicedNoise = 'snoise'


@dataclasses.dataclass(frozen=True, order=True)
class StationIdentifier:
    """A station label at a position. Ordered by (label, lat, lon)."""
    label: str
    lat: float
    lon: float

    def __post_init__(self):
        if not isinstance(self.label, str) or not self.label.strip():
            raise ValueError(f"Station label must be a non-empty string. "
                             f"Is {self.label!r}")
        lat, lon = float(self.lat), float(self.lon)
        if not (math.isfinite(lat) and -90 <= lat <= 90):
            raise ValueError(f"Latitude must be in [-90, 90]. Is {self.lat}")
        if not (math.isfinite(lon) and -180 <= lon <= 180):
            raise ValueError(f"Longitude must be in [-180, 180]. Is {self.lon}")
        # normalize ints and numpy scalars so equality and hashing agree
        object.__setattr__(self, 'lat', lat)
        object.__setattr__(self, 'lon', lon)

    @property
    def coord(self):
        return (self.lat, self.lon)

    def moved(self, lat, lon):
        """Same label at another position"""
        return StationIdentifier(self.label, lat, lon)


@dataclasses.dataclass(frozen=True)
class StationPair:
    a: StationIdentifier
    b: StationIdentifier
    pair_class: PairClass = PairClass.NotSimilar
    provenance: Provenance = Provenance.Original

    def __post_init__(self):
        object.__setattr__(self, 'pair_class', PairClass(self.pair_class))
        object.__setattr__(self, 'provenance', Provenance(self.provenance))

    @property
    def key(self):
        """Orientation independent identity of the pair"""
        return (self.a, self.b) if self.a <= self.b else (self.b, self.a)

    @property
    def similar(self):
        return self.pair_class is PairClass.Similar

    def swapped(self):
        return dataclasses.replace(self, a=self.b, b=self.a)


def canonical_order(pair):
    """Return `pair` with side a lexicographically <= side b on
    (label, lat, lon). Idempotent."""
    if pair.b < pair.a:
        return pair.swapped()
    return pair


class GroundTruth:
    """Immutable, deduplicated collection of labeled station pairs.

    Pairs are stored in canonical order; the first occurrence of an unordered
    pair wins. Every identifier referenced by a pair is part of `stations`,
    which may also hold identifiers that occur in no pair.

    Parameters
    ----------
    pairs : iterable of StationPair
    stations : iterable of StationIdentifier, optional
    """

    def __init__(self, pairs=(), stations=()):
        seen = {}
        for pair in pairs:
            if pair.a == pair.b:
                raise ValueError(f'Self pair in ground truth: {pair.a}')
            pair = canonical_order(pair)
            seen.setdefault(pair.key, pair)
        self._pairs = tuple(seen.values())
        stations = set(stations)
        for a, b in seen:
            stations.add(a)
            stations.add(b)
        self._stations = tuple(sorted(stations))

    @property
    def pairs(self):
        return self._pairs

    @property
    def stations(self):
        return self._stations

    def __len__(self):
        return len(self._pairs)

    def __iter__(self):
        return iter(self._pairs)

    def __getitem__(self, i):
        return self._pairs[i]

    def __eq__(self, other):
        if not isinstance(other, GroundTruth):
            return NotImplemented
        return (self._pairs == other._pairs and
                self._stations == other._stations)

    def __repr__(self):
        return (f'GroundTruth({len(self)} pairs, {self.n_similar} similar, '
                f'{len(self._stations)} stations)')

    @property
    def n_similar(self):
        return sum(1 for p in self._pairs if p.similar)

    @property
    def n_not_similar(self):
        return len(self._pairs) - self.n_similar

    def classes(self):
        """Ground truth classes as a list of 0/1 ints, in pair order"""
        return [int(p.pair_class) for p in self._pairs]

    def labels(self):
        """All labels referenced by pairs, once per pair side"""
        out = []
        for p in self._pairs:
            out.append(p.a.label)
            out.append(p.b.label)
        return out

    def subset(self, indices):
        """Ground truth of the pairs at `indices`, keeping their order"""
        return GroundTruth(self._pairs[i] for i in indices)

    def map_labels(self, fun):
        """Apply `fun` to every label. Pairs whose labels collapse to a self
        pair or to an empty label are dropped."""
        pairs = []
        for p in self._pairs:
            try:
                a = StationIdentifier(fun(p.a.label), p.a.lat, p.a.lon)
                b = StationIdentifier(fun(p.b.label), p.b.lat, p.b.lon)
            except ValueError:
                continue
            if a != b:
                pairs.append(dataclasses.replace(p, a=a, b=b))
        return GroundTruth(pairs)


def _check_label(label):
    if '\t' in label or '\n' in label or '\r' in label:
        raise ValueError(f'Labels must not contain tabs or newlines: {label!r}')
    return label


def format_pair(pair, with_class=True):
    fields = [_check_label(pair.a.label), repr(pair.a.lat), repr(pair.a.lon),
              _check_label(pair.b.label), repr(pair.b.lat), repr(pair.b.lon)]
    if with_class:
        fields += [str(int(pair.pair_class)), pair.provenance.value]
    return '\t'.join(fields)


def write_ground_truth(gt, path):
    """Write `gt` as TSV to `path`. Nothing is written if a label is invalid."""
    with atomic_open(path) as f:
        for pair in gt:
            f.write(format_pair(pair) + '\n')
    logger.info(f'Wrote {len(gt)} pairs to {path}')


def parse_pair(line, lineno=None, with_class=True):
    """Parse one TSV row into a StationPair.

    Unlabeled rows (six columns) get class NotSimilar. Raises
    GroundTruthFormatError on malformed rows.
    """
    fields = line.rstrip('\r\n').split('\t')
    ncols = 8 if with_class else 6
    if len(fields) < ncols:
        raise GroundTruthFormatError(
            f'expected {ncols} tab separated columns, got {len(fields)}',
            lineno)
    try:
        a = StationIdentifier(fields[0], float(fields[1]), float(fields[2]))
        b = StationIdentifier(fields[3], float(fields[4]), float(fields[5]))
        if not with_class:
            return StationPair(a, b)
        if fields[6] not in ('0', '1'):
            raise ValueError(f'class must be 0 or 1. Is {fields[6]!r}')
        return StationPair(a, b, PairClass(int(fields[6])),
                           Provenance(fields[7]))
    except ValueError as e:
        raise GroundTruthFormatError(str(e), lineno) from None


def read_ground_truth(path):
    """Read a ground truth TSV file written by :func:`write_ground_truth`"""
    pairs = []
    with open(path, encoding='utf-8') as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            pair = parse_pair(line, lineno)
            if pair.a == pair.b:
                raise GroundTruthFormatError('self pair', lineno)
            pairs.append(pair)
    gt = GroundTruth(pairs)
    logger.info(f'Read {len(gt)} pairs from {path}')
    return gt


def read_unlabeled_pairs(stream):
    """Iterate over rows of a pair TSV without class column.

    Yields ``(lineno, line, pair, error)``; exactly one of `pair` and `error`
    is None, so a malformed row does not stop the iteration.
    """
    for lineno, line in enumerate(stream, 1):
        line = line.rstrip('\r\n')
        if not line.strip():
            continue
        try:
            yield lineno, line, parse_pair(line, lineno, with_class=False), None
        except GroundTruthFormatError as e:
            yield lineno, line, None, e
