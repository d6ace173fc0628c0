#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""Geodesic distance, position similarity and interwoven grid encoding.

Coordinates are ``(lat, lon)`` tuples in degrees, or anything with `lat` and
`lon` attributes (e.g. :class:`.station.StationIdentifier`).
"""

import dataclasses
import math
from collections import defaultdict
from typing import NamedTuple

import numpy as np

from .common import check_positive

# mean earth radius in meter
EARTH_RADIUS = 6371000.0
# meter per degree latitude on the sphere
METERS_PER_DEGREE = EARTH_RADIUS * math.pi / 180
LN2 = math.log(2)


def _latlon(point):
    if hasattr(point, 'lat'):
        lat, lon = point.lat, point.lon
    else:
        lat, lon = point
    lat, lon = float(lat), float(lon)
    if not -90 <= lat <= 90:
        raise ValueError(f"Latitude must be in [-90, 90]. Is {lat}")
    if not -180 <= lon <= 180:
        raise ValueError(f"Longitude must be in [-180, 180]. Is {lon}")
    return lat, lon


def haversine(lat1, lon1, lat2, lon2):
    """Great circle distance in meter. Works elementwise on arrays."""
    lat1, lon1, lat2, lon2 = map(np.radians, (lat1, lon1, lat2, lon2))
    a = (np.sin((lat2 - lat1) / 2)**2 +
         np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2)**2)
    # rounding can push a slightly above 1 for antipodal points
    return 2 * EARTH_RADIUS * np.arcsin(np.sqrt(np.clip(a, 0, 1)))


def geo_distance(a, b):
    """Haversine distance in meter between two coordinates.

    >>> round(geo_distance((0, 0), (0, 1)))
    111195
    """
    lat1, lon1 = _latlon(a)
    lat2, lon2 = _latlon(b)
    if (lat1, lon1) == (lat2, lon2):
        return 0.0
    return float(haversine(lat1, lon1, lat2, lon2))


def position_score(d, d_hat):
    """exp(-ln(2)·d/d_hat); 0.5 at d = d_hat. Works on arrays."""
    d_hat = check_positive('d_hat', d_hat)
    return np.exp(-LN2 * np.asarray(d, dtype=float) / d_hat)


def position_similarity(a, b, d_hat):
    """Exponential position similarity in (0, 1] of two coordinates"""
    return float(position_score(geo_distance(a, b), d_hat))


def centroid(a, b):
    """Arithmetic mean of two coordinates. Only meaningful for close points."""
    lat1, lon1 = _latlon(a)
    lat2, lon2 = _latlon(b)
    return ((lat1 + lat2) / 2, (lon1 + lon2) / 2)


def offset_meters(point, north, east):
    """Move `point` by `north` and `east` meter in the local tangent plane.

    The result is clamped to valid latitudes and wrapped into [-180, 180]
    longitude.
    """
    lat, lon = _latlon(point)
    dlat = north / METERS_PER_DEGREE
    coslat = max(math.cos(math.radians(lat)), 1e-12)
    dlon = east / (METERS_PER_DEGREE * coslat)
    lat = min(max(lat + dlat, -90.0), 90.0)
    lon = lon + dlon
    if not -180 <= lon <= 180:
        lon = (lon + 180) % 360 - 180
    return lat, lon


@dataclasses.dataclass(frozen=True)
class GridSpec:
    """`n_grids` interwoven grids of `base_resolution`² cells covering the
    earth in plate carrée. Grid i is offset by i/n cells in both axes."""
    base_resolution: int = 256
    n_grids: int = 2

    def __post_init__(self):
        if int(self.base_resolution) != self.base_resolution or \
           self.base_resolution < 1:
            raise ValueError(f"base_resolution must be an integer >= 1. "
                             f"Is {self.base_resolution}")
        if int(self.n_grids) != self.n_grids or self.n_grids < 1:
            raise ValueError(f"n_grids must be an integer >= 1. "
                             f"Is {self.n_grids}")
        object.__setattr__(self, 'base_resolution', int(self.base_resolution))
        object.__setattr__(self, 'n_grids', int(self.n_grids))


class GridCoord(NamedTuple):
    grid_index: int
    x: int
    y: int


def grid_cell(point, grid_index, spec=GridSpec()):
    """Cell of `point` on interwoven grid `grid_index`.

    x is counted from lon = -180 and y from the south pole. Raw coordinates
    are clamped into [0, base_resolution) before the grid offset is applied;
    a resulting x of -1 wraps to the last column (date line), a y of -1 is
    clamped to 0.

    >>> grid_cell((47.996, 7.840), 1, GridSpec(256, 2))
    GridCoord(grid_index=1, x=133, y=195)
    """
    lat, lon = _latlon(point)
    if not 0 <= grid_index < spec.n_grids:
        raise ValueError(f"grid_index must be in [0, {spec.n_grids}). "
                         f"Is {grid_index}")
    res = spec.base_resolution
    upper = float(np.nextafter(res, 0))
    raw_x = min(max((lon + 180) / 360 * res, 0.0), upper)
    raw_y = min(max((lat + 90) / 180 * res, 0.0), upper)
    off = grid_index / spec.n_grids
    x = math.floor(raw_x - off)
    y = math.floor(raw_y - off)
    if x < 0:
        x += res
    if y < 0:
        y = 0
    return GridCoord(grid_index, x, y)


def grid_cells(point, spec=GridSpec()):
    """Cells of `point` on all grids of `spec`"""
    return [grid_cell(point, i, spec) for i in range(spec.n_grids)]


class SpatialHash:
    """Uniform spatial hash for radius queries.

    Buckets are `radius` meter high; their width in degrees is chosen per
    latitude row such that a bucket is at least `radius` meter wide everywhere
    in the row. A radius query therefore only has to check the 3x3
    neighborhood. The date line is not wrapped.

    Parameters
    ----------
    lats, lons : array_like
        Coordinates of the indexed points
    radius : float
        Query radius in meter
    """

    def __init__(self, lats, lons, radius):
        self.radius = check_positive('radius', radius)
        self.lats = np.asarray(lats, dtype=float)
        self.lons = np.asarray(lons, dtype=float)
        # 1% slack for the spherical approximations below
        self._dlat = self.radius * 1.01 / METERS_PER_DEGREE
        self._buckets = defaultdict(list)
        for i, (lat, lon) in enumerate(zip(self.lats, self.lons)):
            self._buckets[self._key(lat, lon)].append(i)
        self._buckets = {k: np.array(v, dtype=np.intp)
                         for k, v in self._buckets.items()}

    def _row(self, lat):
        return math.floor(lat / self._dlat)

    def _dlon(self, row):
        # narrowest parallel of the row determines the bucket width
        edge = max(abs(row * self._dlat), abs((row + 1) * self._dlat))
        coslat = math.cos(math.radians(min(edge, 90.0)))
        if coslat < 1e-9:
            return 360.0
        return min(self._dlat / coslat, 360.0)

    def _key(self, lat, lon):
        row = self._row(lat)
        return row, math.floor(lon / self._dlon(row))

    def candidates(self, lat, lon):
        """Indices of all points in the 3x3 bucket neighborhood"""
        row = self._row(lat)
        found = []
        for r in (row - 1, row, row + 1):
            col = math.floor(lon / self._dlon(r))
            for c in (col - 1, col, col + 1):
                bucket = self._buckets.get((r, c))
                if bucket is not None:
                    found.append(bucket)
        if not found:
            return np.empty(0, dtype=np.intp)
        return np.concatenate(found)

    def query(self, lat, lon, radius=None):
        """Indices and distances of points within `radius` (default: the
        hash radius) of (lat, lon), sorted by index."""
        radius = self.radius if radius is None else radius
        if radius > self.radius:
            raise ValueError(f'Query radius {radius} exceeds hash radius '
                             f'{self.radius}')
        idx = self.candidates(lat, lon)
        d = haversine(lat, lon, self.lats[idx], self.lons[idx])
        keep = d <= radius
        idx, d = idx[keep], d[keep]
        order = np.argsort(idx, kind='stable')
        return idx[order], d[order]
