#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import contextlib
import itertools
import math
import os
import tempfile


def window(iterable, n=3):
    """Returns a sliding window (of width n) over data from the iterable
    s -> (s0,s1,...s[n-1]), (s1,s2,...,sn), ..."""
    # https://stackoverflow.com/a/6822773/1121523
    it = iter(iterable)
    result = tuple(itertools.islice(it, n))
    if len(result) == n:
        yield result
    for element in it:
        result = result[1:] + (element,)
        yield result


def check_finite(name, value):
    """Return `value` as float, or raise if it is not a finite number"""
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be a number. Is {value!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite. Is {value}")
    return value


def check_open_unit(name, value):
    """Raise if `value` is not strictly inside (0, 1)"""
    value = check_finite(name, value)
    if not 0 < value < 1:
        raise ValueError(f"{name} must be in (0, 1). Is {value}")
    return value


def check_positive(name, value):
    value = check_finite(name, value)
    if value <= 0:
        raise ValueError(f"{name} must be > 0. Is {value}")
    return value


@contextlib.contextmanager
def atomic_open(path, mode='w', encoding='utf-8'):
    """Open a file for writing that only appears at `path` on success.

    The data is written to a temporary sibling which is renamed into place when
    the with-block exits without an exception. On error the temporary file is
    removed and `path` is left untouched.

    >>> with atomic_open('out.tsv') as f:
    ...     f.write('a\\tb\\n')
    """
    if 'b' in mode:
        encoding = None
    dirname = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=dirname, prefix='.' +
                               os.path.basename(path) + '.', suffix='.tmp')
    try:
        # newline='' keeps '\n' on every platform for the text formats
        kwargs = {} if encoding is None else {'encoding': encoding,
                                              'newline': ''}
        with os.fdopen(fd, mode, **kwargs) as f:
            yield f
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.remove(tmp)
        raise
