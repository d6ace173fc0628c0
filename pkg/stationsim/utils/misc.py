# -*- coding: utf-8 -*-
"""
A "grab bag" of relatively small general-purpose utilities that don't have
a clear module/package to live in.
"""

import numpy as np


def indent(s, shift=1, width=4):
    """Indent a block of text.  The indentation is applied to each line."""

    indented = '\n'.join(' ' * (width * shift) + l if l else ''
                         for l in s.splitlines())
    if s and s[-1] == '\n':
        indented += '\n'

    return indented


def spawn_rngs(seed, n):
    """`n` independent generators derived from `seed`.

    Stream i only depends on (seed, i), so work distributed over any number of
    workers draws the same numbers.
    """
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.PCG64(s)) for s in children]


def repetition_rng(seed, repetition):
    """Generator for repetition `repetition` of a seeded experiment"""
    return np.random.default_rng([int(seed), int(repetition)])


def parse_list(value, conv=str):
    """Split a comma separated option value, dropping empty items.

    >>> parse_list('0.5, 0.8,', float)
    [0.5, 0.8]
    """
    if isinstance(value, (list, tuple)):
        return [conv(v) for v in value]
    return [conv(v.strip()) for v in str(value).split(',') if v.strip()]
