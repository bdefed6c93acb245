'''Vendor-agnostic splitting of raw AV labels into candidate tokens.'''

import re

_SPLIT_RE = re.compile(r'[^a-z0-9]+')
_HEX_RE = re.compile(r'^[0-9a-f]+$')

#: pure-hex tokens at least this long look like hash/variant fragments
HEX_FRAGMENT_MIN_LEN = 4


def tokenize(label):
    '''Splits a raw label into an ordered token list.

    The label is lowercased and split on every character outside [a-z0-9].
    Purely numeric tokens and pure-hex tokens of length >= 4 are dropped as
    counter/hash noise.  Short tokens are kept here on purpose: a 2-3 letter
    token can still match a tagging rule, so the short-token filter runs after
    tagging, not during tokenization.  Duplicates survive in order.
    '''
    tokens = []
    for token in _SPLIT_RE.split(label.lower()):
        if not token:
            continue
        if token.isdigit():
            continue
        if len(token) >= HEX_FRAGMENT_MIN_LEN and _HEX_RE.match(token):
            continue
        tokens.append(token)
    return tokens
