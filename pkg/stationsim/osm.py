#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""Ground truth station pairs from OpenStreetMap XML.

Station nodes are grouped by ``public_transport=stop_area`` relations, which
again may be grouped by ``public_transport=stop_area_group`` relations. Every
label attribute of a station node yields a station identifier at the node
position; labels of the enclosing stop_areas are added to their member nodes.
Within the search radius, identifiers are paired as follows:

- identifiers of the same node, or of nodes sharing a stop_area: similar
- identifiers of nodes in different stop_areas: not similar, unless they
  carry the same label and are closer than 250 m, or the stop_areas are part
  of one stop_area_group. Such pairs are left out.
- identifiers of nodes in no stop_area (orphans) are only paired with the
  other identifiers of their own node.

Spicing adds far away identifiers moved next to an anchor as not similar pairs
and gaussian noise to one side of similar pairs.
"""

import bz2
import dataclasses
import gzip
import logging
import math
from collections import defaultdict
from typing import Dict, Mapping, Tuple

import numpy as np
from lxml import etree
from tqdm import tqdm

from .common import check_finite, check_positive
from .geometry import SpatialHash, geo_distance, haversine, offset_meters
from .station import (GroundTruth, OsmParseError, PairClass, Provenance,
                      SpicingError, StationIdentifier, StationPair)

logger = logging.getLogger(__name__)

LABEL_ATTRIBUTES = ('name', 'ref_name', 'uic_name', 'official_name',
                    'alt_name', 'loc_name', 'reg_name', 'short_name',
                    'gtfs_name')

DEFAULT_STATION_TAGS = ('public_transport=station', 'public_transport=halt',
                        'public_transport=stop_position',
                        'public_transport=platform', 'railway=station',
                        'railway=halt', 'railway=tram_stop',
                        'highway=bus_stop')

SEARCH_RADIUS = 1000.0
SAME_NAME_RADIUS = 250.0


def parse_station_tags(tags):
    """Set of (key, value) pairs from ``key=value`` strings"""
    out = set()
    for tag in tags:
        key, sep, value = tag.strip().partition('=')
        if not sep or not key.strip() or not value.strip():
            raise ValueError(f'Station tags must look like key=value. '
                             f'Is {tag!r}')
        out.add((key.strip(), value.strip()))
    return frozenset(out)


@dataclasses.dataclass(frozen=True)
class OsmStationNode:
    id: int
    lat: float
    lon: float
    labels: Mapping[str, str] = dataclasses.field(default_factory=dict)


@dataclasses.dataclass(frozen=True)
class StopArea:
    id: int
    members: Tuple[int, ...]
    labels: Mapping[str, str] = dataclasses.field(default_factory=dict)


@dataclasses.dataclass(frozen=True)
class StopAreaGroup:
    id: int
    members: Tuple[int, ...]


@dataclasses.dataclass
class OsmData:
    """Station nodes, stop_areas and stop_area_groups by OSM id"""
    nodes: Dict[int, OsmStationNode] = dataclasses.field(default_factory=dict)
    stop_areas: Dict[int, StopArea] = dataclasses.field(default_factory=dict)
    groups: Dict[int, StopAreaGroup] = dataclasses.field(
        default_factory=dict)


def open_osm(path):
    """Open an OSM XML file for binary reading, decompressing ``.bz2`` and
    ``.gz`` files"""
    if str(path).endswith('.bz2'):
        return bz2.open(path, 'rb')
    if str(path).endswith('.gz'):
        return gzip.open(path, 'rb')
    return open(path, 'rb')


def _tags(elem):
    return {t.get('k'): t.get('v') for t in elem.iterchildren('tag')
            if t.get('k') is not None and t.get('v') is not None}


def _labels(tags, label_attributes):
    return {k: tags[k] for k in label_attributes if k in tags}


def _byte_offset(path, line, column):
    """Byte offset of (line, column) in an uncompressed file"""
    offset = 0
    try:
        with open(path, 'rb') as f:
            for i, raw in enumerate(f, 1):
                if i == line:
                    return offset + max(column - 1, 0)
                offset += len(raw)
    except OSError:
        return None
    return offset


def parse_osm(source, station_tags=DEFAULT_STATION_TAGS,
              label_attributes=LABEL_ATTRIBUTES, progress=False):
    """Stream station nodes, stop_areas and stop_area_groups out of OSM XML.

    Parameters
    ----------
    source : str or file
        Path (``.osm``, ``.osm.bz2`` or ``.osm.gz``) or binary file object
    station_tags : iterable of str
        ``key=value`` tags marking a node as station
    label_attributes : sequence of str
        Tags holding station labels

    Returns
    -------
    OsmData
    """
    wanted = parse_station_tags(station_tags)
    data = OsmData()
    path = source if isinstance(source, (str, bytes)) or hasattr(
        source, '__fspath__') else None
    f = open_osm(source) if path is not None else source
    n_skipped = 0
    try:
        context = etree.iterparse(f, events=('end',),
                                  tag=('node', 'way', 'relation'))
        for _, elem in tqdm(context, desc='osm', unit=' elements',
                            disable=not progress):
            if elem.tag == 'node':
                tags = _tags(elem)
                if any((k, v) in wanted for k, v in tags.items()):
                    try:
                        nid = int(elem.get('id'))
                        lat = check_finite('lat', elem.get('lat'))
                        lon = check_finite('lon', elem.get('lon'))
                        if not (-90 <= lat <= 90 and -180 <= lon <= 180):
                            raise ValueError(f'coordinate ({lat}, {lon}) out '
                                             f'of range')
                    except (TypeError, ValueError) as e:
                        logger.warning(f'Skipping node {elem.get("id")} at '
                                       f'line {elem.sourceline}: {e}')
                        n_skipped += 1
                    else:
                        data.nodes[nid] = OsmStationNode(
                            nid, lat, lon, _labels(tags, label_attributes))
            elif elem.tag == 'relation':
                tags = _tags(elem)
                pt = tags.get('public_transport')
                if pt in ('stop_area', 'stop_area_group'):
                    _add_relation(data, elem, pt, tags, label_attributes)
            # only retained objects stay in memory
            elem.clear()
            while elem.getprevious() is not None:
                del elem.getparent()[0]
    except etree.XMLSyntaxError as e:
        line, column = e.position if e.position else (None, None)
        offset = None
        if path is not None and not str(path).endswith(('.bz2', '.gz')) \
           and line is not None:
            offset = _byte_offset(path, line, column or 0)
        raise OsmParseError(e.msg, line, column, offset) from None
    finally:
        if path is not None:
            f.close()
    logger.info(f'Parsed {len(data.nodes)} station nodes, '
                f'{len(data.stop_areas)} stop_areas and {len(data.groups)} '
                f'stop_area_groups')
    if n_skipped:
        logger.warning(f'Skipped {n_skipped} station nodes with invalid '
                       f'coordinates')
    return data


def _add_relation(data, elem, kind, tags, label_attributes):
    rid = elem.get('id')
    try:
        rid = int(rid)
    except (TypeError, ValueError):
        logger.warning(f'Skipping relation with invalid id {rid!r}')
        return
    member_type = 'node' if kind == 'stop_area' else 'relation'
    members = []
    for m in elem.iterchildren('member'):
        if m.get('type') == member_type:
            try:
                members.append(int(m.get('ref')))
            except (TypeError, ValueError):
                logger.warning(f'Relation {rid}: invalid member ref '
                               f'{m.get("ref")!r}')
    members = tuple(dict.fromkeys(members))
    if not members:
        logger.debug(f'Ignoring {kind} {rid} without {member_type} members')
        return
    if kind == 'stop_area':
        data.stop_areas[rid] = StopArea(rid, members,
                                        _labels(tags, label_attributes))
    else:
        data.groups[rid] = StopAreaGroup(rid, members)


def _clean_label(label):
    label = label.strip()
    if '\t' in label or '\n' in label or '\r' in label:
        logger.warning(f'Dropping label with tab or newline: {label!r}')
        return ''
    return label


def expand_identifiers(node, enclosing=(), label_attributes=LABEL_ATTRIBUTES):
    """Station identifiers of `node`: one per distinct label of the node and
    of its enclosing stop_area(s), all at the node position.

    `enclosing` is a StopArea or an iterable of them.
    """
    if isinstance(enclosing, StopArea):
        enclosing = (enclosing,)
    values = [node.labels[k] for k in label_attributes if k in node.labels]
    for area in enclosing:
        values += [area.labels[k] for k in label_attributes
                   if k in area.labels]
    out = []
    for value in dict.fromkeys(_clean_label(v) for v in values):
        if value:
            out.append(StationIdentifier(value, node.lat, node.lon))
    return out


def _memberships(data):
    """stop_area ids per node, group ids per stop_area"""
    areas_of = defaultdict(set)
    for area in data.stop_areas.values():
        for nid in area.members:
            if nid in data.nodes:
                areas_of[nid].add(area.id)
    groups_of = defaultdict(set)
    for group in data.groups.values():
        for aid in group.members:
            if aid in data.stop_areas:
                groups_of[aid].add(group.id)
    return areas_of, groups_of


def build_pairs(data, radius=SEARCH_RADIUS, same_name_radius=SAME_NAME_RADIUS,
                label_attributes=LABEL_ATTRIBUTES, progress=False):
    """Labeled ground truth pairs of all identifiers within `radius` meter.

    Parameters
    ----------
    data : OsmData
    radius : float
        Search radius; farther pairs are not emitted
    same_name_radius : float
        Pairs of equally labeled identifiers from different stop_areas closer
        than this are left out
    """
    radius = check_positive('radius', radius)
    areas_of, groups_of = _memberships(data)

    # one entry per (node, identifier), nodes in id order
    idents, owners, areas = [], [], []
    for nid in sorted(data.nodes):
        node = data.nodes[nid]
        node_areas = frozenset(areas_of.get(nid, ()))
        enclosing = [data.stop_areas[a] for a in sorted(node_areas)]
        for ident in expand_identifiers(node, enclosing, label_attributes):
            idents.append(ident)
            owners.append(nid)
            areas.append(node_areas)

    stations = set(idents)
    if not idents:
        return GroundTruth((), stations)

    lats = np.array([s.lat for s in idents])
    lons = np.array([s.lon for s in idents])
    index = SpatialHash(lats, lons, radius)
    pairs = []
    n_ignored = [0, 0]
    for i in tqdm(range(len(idents)), desc='pairs', unit=' identifiers',
                  disable=not progress):
        near, dist = index.query(lats[i], lons[i])
        for j, d in zip(near, dist):
            if j <= i or idents[i] == idents[j]:
                continue
            if owners[i] == owners[j] or areas[i] & areas[j]:
                pairs.append(StationPair(idents[i], idents[j],
                                         PairClass.Similar))
                continue
            if not areas[i] or not areas[j]:
                continue
            if idents[i].label == idents[j].label and d < same_name_radius:
                n_ignored[0] += 1
                continue
            if _grouped(areas[i], areas[j], groups_of):
                n_ignored[1] += 1
                continue
            pairs.append(StationPair(idents[i], idents[j],
                                     PairClass.NotSimilar))
    gt = GroundTruth(pairs, stations)
    logger.info(f'Built {len(gt)} pairs ({gt.n_similar} similar) from '
                f'{len(stations)} identifiers; ignored {n_ignored[0]} same '
                f'name and {n_ignored[1]} grouped pairs')
    return gt


def _grouped(areas_a, areas_b, groups_of):
    ga = set().union(*(groups_of.get(a, ()) for a in areas_a))
    gb = set().union(*(groups_of.get(b, ()) for b in areas_b))
    return bool(ga & gb)


@dataclasses.dataclass(frozen=True)
class SpicingConfig:
    """Spicing parameters. Distances in meter."""
    p: float = 0.5
    n_fakes: int = 5
    fake_radius: float = 100.0
    noise_sigma: float = 100.0
    seed: int = 0

    def __post_init__(self):
        p = check_finite('p', self.p)
        if not 0 <= p <= 1:
            raise ValueError(f'p must be in [0, 1]. Is {p}')
        if int(self.n_fakes) != self.n_fakes or self.n_fakes < 0:
            raise ValueError(f'n_fakes must be a non-negative integer. '
                             f'Is {self.n_fakes}')
        for name in ('fake_radius', 'noise_sigma'):
            value = check_finite(name, getattr(self, name))
            if value < 0:
                raise ValueError(f'{name} must be >= 0. Is {value}')
            object.__setattr__(self, name, value)
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError(f'seed must be a non-negative integer. '
                             f'Is {self.seed}')
        object.__setattr__(self, 'p', p)
        object.__setattr__(self, 'n_fakes', int(self.n_fakes))
        object.__setattr__(self, 'seed', int(self.seed))


def _far_donors(anchor, lats, lons, n, radius, rng):
    """`n` distinct indices of identifiers farther than `radius` from
    `anchor`"""
    total = len(lats)
    chosen = []
    # rejection sampling first, exhaustive search below
    for _ in range(20 * n):
        if len(chosen) == n:
            return chosen
        j = int(rng.integers(total))
        if j not in chosen and haversine(anchor.lat, anchor.lon, lats[j],
                                         lons[j]) > radius:
            chosen.append(j)
    if len(chosen) == n:
        return chosen
    d = haversine(anchor.lat, anchor.lon, lats, lons)
    far = np.setdiff1d(np.flatnonzero(d > radius), chosen)
    missing = n - len(chosen)
    if len(far) < missing:
        raise SpicingError(
            f'Only {len(far) + len(chosen)} identifiers lie farther than '
            f'{radius} m from {anchor}; spicing needs {n}')
    return chosen + [int(j) for j in rng.choice(far, missing, replace=False)]


def _random_in_disc(point, r_max, rng):
    r = r_max * math.sqrt(rng.random())
    theta = 2 * math.pi * rng.random()
    return offset_meters(point, r * math.cos(theta), r * math.sin(theta))


def spice(gt, cfg=SpicingConfig(), radius=SEARCH_RADIUS, progress=False):
    """Add synthetic not similar pairs and coordinate noise to `gt`.

    1. For every station identifier (in sorted order), with probability `p`,
       `n_fakes` distinct identifiers farther than `radius` are moved to a
       uniformly random position within `fake_radius` of it and paired with
       it as not similar (provenance ``sneg``).
    2. For every similar pair, with probability `p`, one randomly chosen side
       gets gaussian noise with standard deviation `noise_sigma` per axis.
       The noisy pair replaces the original one (provenance ``snoise``).

    All draws come from one generator seeded with `cfg.seed`, in the order
    above.
    """
    rng = np.random.default_rng(cfg.seed)
    stations = gt.stations
    lats = np.array([s.lat for s in stations])
    lons = np.array([s.lon for s in stations])
    negatives = []
    for anchor in tqdm(stations, desc='spicing', unit=' identifiers',
                       disable=not progress):
        if not rng.random() < cfg.p or cfg.n_fakes == 0:
            continue
        for j in _far_donors(anchor, lats, lons, cfg.n_fakes, radius, rng):
            moved = stations[j].moved(*_random_in_disc(anchor,
                                                       cfg.fake_radius, rng))
            if moved != anchor:
                negatives.append(StationPair(anchor, moved,
                                             PairClass.NotSimilar,
                                             Provenance.SpicedNegative))
    pairs = []
    n_noise = 0
    for pair in gt:
        if pair.similar and rng.random() < cfg.p:
            side = int(rng.integers(2))
            north, east = rng.normal(0, cfg.noise_sigma, 2) if \
                cfg.noise_sigma > 0 else (0.0, 0.0)
            if side == 0:
                a, b = pair.a.moved(*offset_meters(pair.a, north, east)), \
                    pair.b
            else:
                a, b = pair.a, pair.b.moved(*offset_meters(pair.b, north,
                                                           east))
            if a != b:
                pair = StationPair(a, b, pair.pair_class,
                                   Provenance.SpicedNoise)
                n_noise += 1
        pairs.append(pair)
    out = GroundTruth(pairs + negatives, stations)
    logger.info(f'Spicing added {len(negatives)} not similar pairs and '
                f'noise to {n_noise} similar pairs')
    return out


@dataclasses.dataclass(frozen=True)
class DatasetStatistics:
    """Size of a ground truth dataset.

    N station nodes, G stop_areas, N_orphans nodes in no stop_area,
    n_identifiers unique identifiers, avg_group_size mean station nodes per
    stop_area, d_pos mean distance of similar pairs in meter, K_neg / K_pos
    not similar / similar pairs and K all pairs.
    """
    N: int
    G: int
    N_orphans: int
    n_identifiers: int
    avg_group_size: float
    d_pos: float
    K_neg: int
    K_pos: int
    K: int

    def render(self):
        return '\n'.join([
            f'station nodes (N)          {self.N}',
            f'stop_areas (G)             {self.G}',
            f'orphan nodes (N\')          {self.N_orphans}',
            f'unique identifiers (|s|)   {self.n_identifiers}',
            f'avg. stop_area size (g)    {self.avg_group_size:.2f}',
            f'avg. similar distance (d+) {self.d_pos:.1f} m',
            f'not similar pairs (K-)     {self.K_neg}',
            f'similar pairs (K+)         {self.K_pos}',
            f'pairs (K)                  {self.K}',
        ])


def dataset_statistics(data, gt):
    areas_of, _ = _memberships(data)
    sizes = [sum(1 for n in a.members if n in data.nodes)
             for a in data.stop_areas.values()]
    sizes = [s for s in sizes if s > 0]
    d_pos = [geo_distance(p.a, p.b) for p in gt if p.similar]
    return DatasetStatistics(
        N=len(data.nodes),
        G=len(sizes),
        N_orphans=sum(1 for nid in data.nodes if nid not in areas_of),
        n_identifiers=len(gt.stations),
        avg_group_size=float(np.mean(sizes)) if sizes else 0.0,
        d_pos=float(np.mean(d_pos)) if d_pos else 0.0,
        K_neg=gt.n_not_similar,
        K_pos=gt.n_similar,
        K=len(gt))
