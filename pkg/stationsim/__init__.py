#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import sys

class UnsupportedPythonError(Exception):
    pass


__minimum_python_version__ = "3.8"
if sys.version_info < tuple((int(val) for val in __minimum_python_version__.split('.'))):
    raise UnsupportedPythonError(f"stationsim does not support Python < {__minimum_python_version__}")


__version__ = "0.1.dev1"

from stationsim.station import (GroundTruth, PairClass, Provenance,
                                StationIdentifier, StationPair,
                                canonical_order)

__all__ = ['GroundTruth', 'PairClass', 'Provenance', 'StationIdentifier',
           'StationPair', 'canonical_order']
