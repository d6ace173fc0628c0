#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""Station label normalization, tokenization, trigrams and string similarity
measures.

All similarity measures return a score in [0, 1], are symmetric and give 1 for
identical inputs. Degenerate empty string conventions: ``sim('', '') = 1`` for
every measure and ``sim('', s) = 0`` for non-empty `s`, except for the edit
distance similarity which follows its formula.

Measures work on the labels as given; normalization is a separate
preprocessing step (:func:`normalize`).
"""

import dataclasses
import itertools
import math
import os
import re
from collections import Counter
from typing import Mapping, Tuple

import numpy as np
from sklearn.feature_extraction.text import CountVectorizer
from sklearn.preprocessing import normalize as l2_normalize

from .common import window

DATA_DIR = os.path.join(os.path.dirname(__file__), 'data')
DEFAULT_RULES_FILE = os.path.join(DATA_DIR, 'normalization_de.tsv')

# |P(S)| above which BTS falls back to the Jaccard index
BTS_LIMIT = 6
BTS_MODES = ('permutations', 'tokens')

_TOKEN_RE = re.compile(r'\w+')
_WHITESPACE_RE = re.compile(r'\s+')


@dataclasses.dataclass(frozen=True)
class NormalizationRules:
    """Ordered (pattern, replacement) regex rules.

    Replacements may reference groups with ``\\1``. Patterns are compiled when
    the rules are created, so a malformed rule fails at load time.
    """
    rules: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        compiled = []
        for i, (pattern, repl) in enumerate(self.rules):
            try:
                compiled.append((re.compile(pattern), repl))
            except re.error as e:
                raise ValueError(f'Invalid normalization rule {i} '
                                 f'{pattern!r}: {e}') from None
        object.__setattr__(self, 'rules', tuple((p, r) for p, r in self.rules))
        object.__setattr__(self, '_compiled', tuple(compiled))

    def __len__(self):
        return len(self.rules)

    def apply(self, text):
        for pattern, repl in self._compiled:
            text = pattern.sub(repl, text)
        return text


def parse_rules(lines):
    """Parse rule lines ``pattern<TAB>replacement``. Empty lines and lines
    starting with ``#`` are skipped; a missing replacement means deletion."""
    rules = []
    for line in lines:
        line = line.rstrip('\r\n')
        if not line.strip() or line.lstrip().startswith('#'):
            continue
        pattern, _, repl = line.partition('\t')
        rules.append((pattern, repl))
    return NormalizationRules(tuple(rules))


def load_rules(path):
    """Read normalization rules from a UTF-8 TSV file"""
    with open(path, encoding='utf-8') as f:
        return parse_rules(f)


def default_rules():
    """The German station label rules shipped with stationsim"""
    return load_rules(DEFAULT_RULES_FILE)


def normalize(label, rules=None):
    """Lowercase `label`, apply `rules` in order, collapse and trim whitespace.

    >>> normalize('Freiburg Hbf', default_rules())
    'freiburg hauptbahnhof'
    """
    text = label.lower()
    if rules is not None:
        text = rules.apply(text)
    return _WHITESPACE_RE.sub(' ', text).strip()


def tokenize(label):
    """Maximal runs of word characters.

    >>> tokenize('St. Pancras')
    ['St', 'Pancras']
    """
    return _TOKEN_RE.findall(label)


def trigrams(label):
    """Multiset of the trigrams of `label` padded with one space per side.

    >>> sorted(trigrams('aaaa').items())
    [(' aa', 1), ('aa ', 1), ('aaa', 2)]
    """
    return Counter(''.join(w) for w in window(' ' + label + ' ', 3))


def edit_distance(a, b):
    """Levenshtein distance (insert, delete, substitute; unit costs)"""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a):
        current = [i + 1]
        for j, cb in enumerate(b):
            current.append(min(previous[j + 1] + 1,
                               current[j] + 1,
                               previous[j] + (ca != cb)))
        previous = current
    return previous[-1]


def ed_similarity(a, b):
    """1 - ed(a, b)/max(|a|, |b|); 1 if both are empty"""
    n = max(len(a), len(b))
    if n == 0:
        return 1.0
    return 1 - edit_distance(a, b) / n


def prefix_edit_distance(a, b):
    """Minimum edit distance between `a` and any prefix of `b`"""
    # last DP row holds ed(a, b[:j]) for every j
    row = list(range(len(b) + 1))
    for i, ca in enumerate(a):
        current = [i + 1]
        for j, cb in enumerate(b):
            current.append(min(row[j + 1] + 1,
                               current[j] + 1,
                               row[j] + (ca != cb)))
        row = current
    return min(row)


def _ped_directional(a, b):
    if not a:
        return 1.0 if not b else 0.0
    return 1 - prefix_edit_distance(a, b) / len(a)


def ped_similarity(a, b):
    """Prefix edit distance similarity, best of both directions"""
    return max(_ped_directional(a, b), _ped_directional(b, a))


def jaro(a, b):
    """Jaro similarity"""
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    if a == b:
        return 1.0
    span = max(max(len(a), len(b)) // 2 - 1, 0)
    matched_b = [False] * len(b)
    matches_a = []
    for i, ca in enumerate(a):
        for j in range(max(0, i - span), min(len(b), i + span + 1)):
            if not matched_b[j] and b[j] == ca:
                matched_b[j] = True
                matches_a.append(ca)
                break
    m = len(matches_a)
    if m == 0:
        return 0.0
    matches_b = [cb for cb, hit in zip(b, matched_b) if hit]
    half_t = sum(x != y for x, y in zip(matches_a, matches_b)) / 2
    return (m / len(a) + m / len(b) + (m - half_t) / m) / 3


def jaro_winkler(a, b, p=0.1, max_prefix=4):
    """Jaro-Winkler similarity, prefix boost `p` for up to `max_prefix`
    common leading characters"""
    sim = jaro(a, b)
    prefix = 0
    for ca, cb in zip(a[:max_prefix], b[:max_prefix]):
        if ca != cb:
            break
        prefix += 1
    return sim + prefix * p * (1 - sim)


def jaccard(a, b):
    """Jaccard index of the token sets. Labels without tokens score 1 only
    against the identical label."""
    ta, tb = set(tokenize(a)), set(tokenize(b))
    if not ta and not tb:
        return 1.0 if a == b else 0.0
    return len(ta & tb) / len(ta | tb)


def n_subset_permutations(n):
    """|P(S)| for a set of `n` tokens: sum over k of n!/(n-k)!"""
    return sum(math.perm(n, k) for k in range(1, n + 1))


def subset_permutations(tokens):
    """All permutations of all non-empty subsets of `tokens`, joined with a
    space.

    >>> sorted(subset_permutations(['Freiburg', 'Hauptbahnhof']))
    ['Freiburg', 'Freiburg Hauptbahnhof', 'Hauptbahnhof', 'Hauptbahnhof Freiburg']
    """
    out = set()
    for k in range(1, len(tokens) + 1):
        for perm in itertools.permutations(tokens, k):
            out.add(' '.join(perm))
    return out


def _bts_directional(tokens, other):
    return max(ed_similarity(cand, other)
               for cand in subset_permutations(tokens))


def bts(a, b, mode='permutations', limit=BTS_LIMIT):
    """Best token subsequence similarity.

    The best edit distance similarity of any space joined permutation of a
    token subset of one label against the other raw label, in both
    directions. Repeated tokens of a label count once. Falls back to
    :func:`jaccard` for large token sets: when |P(tokens)| > `limit`
    (``mode='permutations'``) or when the distinct token count exceeds
    `limit` (``mode='tokens'``).
    """
    if mode not in BTS_MODES:
        raise ValueError(f'Invalid BTS mode. Should be one of {BTS_MODES}. '
                         f'Is {mode}')
    if a == b:
        return 1.0
    # P(S) is built over the token set, first occurrence order
    ta = list(dict.fromkeys(tokenize(a)))
    tb = list(dict.fromkeys(tokenize(b)))
    if not ta or not tb:
        return jaccard(a, b)
    if mode == 'permutations':
        size = (n_subset_permutations(len(ta)), n_subset_permutations(len(tb)))
    else:
        size = (len(ta), len(tb))
    if max(size) > limit:
        return jaccard(a, b)
    return max(_bts_directional(ta, b), _bts_directional(tb, a))


@dataclasses.dataclass(frozen=True)
class TfidfModel:
    """Document frequencies of tokens, documents being labels"""
    n_docs: int
    doc_freq: Mapping[str, int]

    def idf(self, token):
        # unseen tokens count as occurring in one document
        return math.log(self.n_docs / self.doc_freq.get(token, 1))


def _token_counter(binary=False):
    """CountVectorizer splitting labels exactly like :func:`tokenize`"""
    return CountVectorizer(token_pattern=_TOKEN_RE.pattern, lowercase=False,
                           binary=binary)


def tfidf_train(labels):
    """Document frequencies over the corpus `labels`"""
    labels = list(labels)
    if not labels:
        raise ValueError('Cannot train TFIDF on an empty corpus')
    vectorizer = _token_counter(binary=True)
    try:
        counts = vectorizer.fit_transform(labels)
    except ValueError:
        # no label holds a single token
        return TfidfModel(len(labels), {})
    df = np.asarray(counts.sum(axis=0)).ravel()
    return TfidfModel(len(labels), {token: int(df[i]) for token, i
                                    in vectorizer.vocabulary_.items()})


def tfidf_similarity(model, a, b):
    """Cosine similarity of the tf·idf vectors of `a` and `b`"""
    vectorizer = _token_counter()
    try:
        tf = vectorizer.fit_transform([a, b]).toarray().astype(float)
    except ValueError:
        return 1.0 if a == b else 0.0
    idf = np.array([model.idf(t) for t in vectorizer.get_feature_names_out()])
    wa, wb = l2_normalize(tf * idf)
    # rounding can exceed 1 for parallel vectors
    return float(min(max(np.dot(wa, wb), 0.0), 1.0))
