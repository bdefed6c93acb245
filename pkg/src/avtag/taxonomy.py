'''Open taxonomy tree: category roots, tag paths, parent-child relations.

The taxonomy groups tags under four fixed category roots (BEH, CLASS, FAM,
FILE).  A tag is addressed by its path, e.g. ``CLASS:grayware:adware``.  Path
components written fully uppercase (e.g. ``OS`` in ``FILE:OS:windows``) are
structural: they organize the tree but are never taggable themselves.

Tokens that match no tag and no tagging rule are *unknown*; they live in the
UNK pseudo-category, which is never a tree node.
'''

import re

CATEGORIES = ('BEH', 'CLASS', 'FAM', 'FILE')

#: pseudo-category for unknown tokens; never a taxonomy node
UNKNOWN_CATEGORY = 'UNK'

_TAGGABLE_RE = re.compile(r'^[a-z0-9]+$')
_STRUCTURAL_RE = re.compile(r'^[A-Z][A-Z0-9]*$')


class TaxonomyError(ValueError):
    '''Raised for malformed paths, broken tree invariants, or bad lookups.'''


def is_taggable(component):
    '''True for lowercase alphanumeric components (the ones tags are made of).'''
    return bool(_TAGGABLE_RE.match(component))


def is_structural(component):
    '''True for fully-uppercase organizational components (never taggable).'''
    return bool(_STRUCTURAL_RE.match(component))


class TagPath:
    '''Immutable path of a taxonomy node; canonical form joins components with ':'.'''

    __slots__ = ('components', '_str')

    def __init__(self, components):
        components = tuple(components)
        if not components:
            raise TaxonomyError('empty tag path')
        if components[0] not in CATEGORIES:
            raise TaxonomyError(
                "bad category %r (expected one of %s)" % (components[0], ', '.join(CATEGORIES)))
        for comp in components[1:]:
            if not (is_taggable(comp) or is_structural(comp)):
                raise TaxonomyError(
                    'bad path component %r (lowercase alphanumeric tag or UPPERCASE structural)'
                    % (comp,))
        object.__setattr__(self, 'components', components)
        object.__setattr__(self, '_str', ':'.join(components))

    def __setattr__(self, name, value):
        raise AttributeError('TagPath is immutable')

    @classmethod
    def parse(cls, text):
        '''Parses the canonical ':'-joined string form.'''
        return cls(text.split(':'))

    @property
    def category(self):
        return self.components[0]

    @property
    def name(self):
        '''Final path component.'''
        return self.components[-1]

    @property
    def is_tag(self):
        '''True when the node itself is taggable (final component lowercase).'''
        return is_taggable(self.components[-1])

    @property
    def is_root(self):
        return len(self.components) == 1

    def parent(self):
        '''Parent path, or None for category roots.'''
        if self.is_root:
            return None
        return TagPath(self.components[:-1])

    def prefixes(self):
        '''All prefix paths from the category root down to (and including) self.'''
        return [TagPath(self.components[:k]) for k in range(1, len(self.components) + 1)]

    def child(self, component):
        return TagPath(self.components + (component,))

    def __str__(self):
        return self._str

    def __repr__(self):
        return 'TagPath(%r)' % (self._str,)

    def __eq__(self, other):
        return isinstance(other, TagPath) and self.components == other.components

    def __hash__(self):
        return hash(self.components)


class UnknownToken:
    '''A token with no tagging rule and no taxonomy entry (UNK pseudo-category).'''

    __slots__ = ('text',)

    def __init__(self, text):
        object.__setattr__(self, 'text', text)

    def __setattr__(self, name, value):
        raise AttributeError('UnknownToken is immutable')

    def __str__(self):
        return self.text

    def __repr__(self):
        return 'UnknownToken(%r)' % (self.text,)

    def __eq__(self, other):
        return isinstance(other, UnknownToken) and self.text == other.text

    def __hash__(self):
        return hash(('UNK', self.text))


def render_item(item):
    '''Canonical string of a TagPath or UnknownToken ("UNK:<token>").

    All real categories sort before "UNK:", so sorting rendered items places
    tags ahead of unknown tokens.
    '''
    if isinstance(item, UnknownToken):
        return UNKNOWN_CATEGORY + ':' + item.text
    return str(item)


def parse_item(text):
    '''Inverse of render_item.'''
    if text.startswith(UNKNOWN_CATEGORY + ':'):
        token = text[len(UNKNOWN_CATEGORY) + 1:]
        if not is_taggable(token):
            raise TaxonomyError('bad unknown token %r' % (token,))
        return UnknownToken(token)
    return TagPath.parse(text)


def item_category(item):
    '''Category name of an item; UNK for unknown tokens.'''
    if isinstance(item, UnknownToken):
        return UNKNOWN_CATEGORY
    return item.category


def item_name(item):
    '''Final name component of an item (the token text for unknowns).'''
    if isinstance(item, UnknownToken):
        return item.text
    return item.name


class Taxonomy:
    '''Set of TagPath nodes forming a tree rooted at the category roots.

    Maintains a name index mapping every taggable node's final component to its
    full path; that name is globally unique across the taxonomy, which is what
    makes implicit tagging (token == tag name) unambiguous.
    '''

    def __init__(self):
        self._nodes = {TagPath((c,)) for c in CATEGORIES}
        self._name_index = {}

    def __contains__(self, path):
        return path in self._nodes

    def __len__(self):
        return len(self._nodes)

    def __iter__(self):
        return iter(sorted(self._nodes, key=str))

    def __eq__(self, other):
        return isinstance(other, Taxonomy) and self._nodes == other._nodes

    def copy(self):
        dup = Taxonomy.__new__(Taxonomy)
        dup._nodes = set(self._nodes)
        dup._name_index = dict(self._name_index)
        return dup

    def add(self, path):
        '''Adds a path plus any missing ancestors; returns the newly created nodes.

        Validates name uniqueness for every node it would create before
        mutating anything, so a failed add leaves the taxonomy untouched.
        '''
        missing = []
        pending_names = set()
        for prefix in path.prefixes():
            if prefix in self._nodes:
                continue
            name = prefix.name
            if is_taggable(name):
                clash = self._name_index.get(name)
                if clash is not None:
                    raise TaxonomyError(
                        'name %r already used by %s (adding %s)' % (name, clash, prefix))
                if name in pending_names:
                    raise TaxonomyError('name %r repeated within path %s' % (name, path))
                pending_names.add(name)
            missing.append(prefix)
        for node in missing:
            self._nodes.add(node)
            if node.is_tag:
                self._name_index[node.name] = node
        return missing

    def remove(self, path):
        '''Removes a leaf node (category roots and internal nodes are not removable).'''
        if path not in self._nodes:
            raise TaxonomyError('cannot remove %s: not in taxonomy' % (path,))
        if path.is_root:
            raise TaxonomyError('cannot remove category root %s' % (path,))
        if self.has_children(path):
            raise TaxonomyError('cannot remove %s: node has children' % (path,))
        self._nodes.discard(path)
        if path.is_tag and self._name_index.get(path.name) == path:
            del self._name_index[path.name]

    def has_children(self, path):
        plen = len(path.components)
        return any(len(n.components) > plen and n.components[:plen] == path.components
                   for n in self._nodes)

    def is_ancestor(self, a, b):
        '''True iff a is a proper ancestor of b (proper prefix of b's path).'''
        if a not in self._nodes:
            raise TaxonomyError('unknown path %s' % (a,))
        if b not in self._nodes:
            raise TaxonomyError('unknown path %s' % (b,))
        alen = len(a.components)
        return alen < len(b.components) and b.components[:alen] == a.components

    def resolve_name(self, name):
        '''Full path of the unique taggable node named `name`, or None.'''
        return self._name_index.get(name)

    def tag_ancestors(self, path):
        '''Taggable proper-ancestor paths of `path`, nearest root first.

        Structural components and the category root are skipped; works from the
        path's components alone, so it is usable for any well-formed path.
        '''
        return [TagPath(path.components[:k])
                for k in range(2, len(path.components))
                if is_taggable(path.components[k - 1])]


def load_taxonomy(text):
    '''Parses taxonomy file content: one canonical path per line.

    Blank lines and '#' comments are ignored; duplicates are tolerated; listing
    a nested path implies all of its ancestors.
    '''
    taxonomy = Taxonomy()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        try:
            taxonomy.add(TagPath.parse(line))
        except TaxonomyError as exc:
            raise TaxonomyError('line %d: %s' % (lineno, exc)) from None
    return taxonomy


def serialize_taxonomy(taxonomy):
    '''Deterministic file form: every non-root node, one per line, sorted.'''
    lines = [str(node) for node in taxonomy if not node.is_root]
    if not lines:
        return ''
    return '\n'.join(lines) + '\n'
