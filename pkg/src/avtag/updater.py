'''Co-occurrence-driven updates to the taxonomy and rule files.

Strong relations (enough support, high joint frequency) are run through a
category-pair rule matrix: unknown tokens become new families, aliases, or
file-property tags; leftover tag-to-tag relations become expansion rules; any
pair the matrix does not cover is reported for manual review.
'''

from dataclasses import dataclass, field

from .labeler import STATS_HEADER, Relation
from .ruleset import ExpansionRule, RuleError, TaggingRule
from .ruleset import _check_expansion_acyclic
from .taxonomy import (TagPath, TaxonomyError, UnknownToken, item_category,
                       item_name, parse_item, render_item)

DEFAULT_MIN_COUNT = 20
DEFAULT_MIN_REL = 0.94


@dataclass(frozen=True)
class UpdateConfig:
    '''Strength thresholds: minimum per-item support n, minimum joint frequency T.'''
    n: int = DEFAULT_MIN_COUNT
    T: float = DEFAULT_MIN_REL

    def __post_init__(self):
        if self.n < 1:
            raise ValueError('n must be >= 1, got %r' % (self.n,))
        if not 0 < self.T <= 1:
            raise ValueError('T must be in (0, 1], got %r' % (self.T,))


@dataclass
class ChangeLog:
    '''Added/removed entries per artifact; expansion entries are (source, target) edges.'''
    taxonomy_added: list = field(default_factory=list)
    taxonomy_removed: list = field(default_factory=list)
    tagging_added: list = field(default_factory=list)
    tagging_removed: list = field(default_factory=list)
    expansion_added: list = field(default_factory=list)
    expansion_removed: list = field(default_factory=list)

    def total(self):
        return (len(self.taxonomy_added) + len(self.taxonomy_removed)
                + len(self.tagging_added) + len(self.tagging_removed)
                + len(self.expansion_added) + len(self.expansion_removed))


@dataclass
class Unhandled:
    relation: Relation
    reason: str


@dataclass
class UpdateResult:
    taxonomy: object
    rules: object
    changes: ChangeLog
    unhandled: list
    consumed_known: list
    consumed_equivalence: list
    consumed_topblock: list
    consumed_expansion: list
    taxonomy_dirty: bool
    tagging_dirty: bool
    expansion_dirty: bool


def parse_stats(text):
    '''Parses a stats TSV back into Relations.

    The rel columns are recomputed from the integer counts so that threshold
    comparisons never depend on the 6-decimal formatting; rows violating
    count_i <= count_j are normalized by swapping endpoints.
    '''
    relations = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        fields = line.split('\t')
        if fields[0] == 't_i':
            continue
        if len(fields) != 7:
            raise ValueError('stats line %d: expected 7 tab-separated fields' % lineno)
        try:
            t_i = parse_item(fields[0])
            t_j = parse_item(fields[1])
            count_i, count_j, count_ij = (int(fields[k]) for k in (2, 3, 4))
        except (TaxonomyError, ValueError) as exc:
            raise ValueError('stats line %d: %s' % (lineno, exc)) from None
        if count_ij < 1 or count_ij > min(count_i, count_j):
            raise ValueError('stats line %d: inconsistent counts %d/%d/%d'
                             % (lineno, count_i, count_j, count_ij))
        if count_i > count_j:
            t_i, t_j, count_i, count_j = t_j, t_i, count_j, count_i
        relations.append(Relation(t_i, t_j, count_i, count_j, count_ij,
                                  count_ij / count_i, count_ij / count_j))
    return relations


def is_strong(relation, config):
    '''Support and joint-frequency thresholds (both inclusive).'''
    return relation.count_i >= config.n and relation.rel_ij >= config.T


def _under_os(item):
    return isinstance(item, TagPath) and item.components[:2] == ('FILE', 'OS')


def involves_os_tag(relation):
    '''True when either endpoint lies in the FILE:OS subtree.'''
    return _under_os(relation.t_i) or _under_os(relation.t_j)


def filter_strong(relations, config):
    '''Strong relations minus those touching operating-system tags.'''
    return [r for r in relations if is_strong(r, config) and not involves_os_tag(r)]


def is_equivalent(relation, config):
    '''A strong relation whose joint frequency passes T in both directions.'''
    return relation.rel_ji >= config.T


def resolve_item(item, taxonomy, rules):
    '''Canonical form of a relation endpoint against the current knowledge base.

    A tag still present in the taxonomy is canonical as-is.  Otherwise the
    item's name is chased through single-destination tagging rules, then looked
    up in the taxonomy's name index; a name with no home is an unknown token.
    Returns None when the name hits a generic or multi-destination rule: such a
    token is already fully covered, so relations about it carry no news.
    '''
    if isinstance(item, TagPath) and item in taxonomy:
        return item
    name = item_name(item)
    path = None
    seen = set()
    while name not in seen:
        seen.add(name)
        rule = rules.tagging.get(name)
        if rule is None:
            break
        if len(rule.destinations) != 1:
            return None
        path = next(iter(rule.destinations))
        name = path.name
    else:
        return None
    if path is not None:
        return path
    found = taxonomy.resolve_name(name)
    return found if found is not None else UnknownToken(name)


def _known_resolved(a, b, taxonomy, rules, equivalence):
    if a is None or b is None:
        return True
    if a == b:
        return True
    if (isinstance(a, TagPath) and isinstance(b, TagPath)
            and a in taxonomy and b in taxonomy):
        if taxonomy.is_ancestor(b, a):
            return True
        if equivalence and taxonomy.is_ancestor(a, b):
            return True
    if isinstance(a, TagPath):
        rule = rules.expansion.get(a)
        if rule is not None and b in rule.targets:
            return True
    return False


def is_known(relation, taxonomy, rules, config=None):
    '''True when the relation is already captured by the knowledge base.

    Endpoints are alias-resolved first; the relation is known when they
    resolve to the same item, when the resolved t_j is a taxonomy ancestor of
    the resolved t_i (either direction for equivalences, which need a config
    to be recognized), or when an expansion rule from the resolved t_i already
    contains the resolved t_j.
    '''
    a = resolve_item(relation.t_i, taxonomy, rules)
    b = resolve_item(relation.t_j, taxonomy, rules)
    equivalence = config is not None and is_equivalent(relation, config)
    return _known_resolved(a, b, taxonomy, rules, equivalence)


class _ActionError(Exception):
    '''A single update action failed validation; the relation goes to unhandled.'''


class _WorkState:
    '''Mutable copies of the artifacts plus change tracking for one inference run.'''

    def __init__(self, taxonomy, rules):
        self.taxonomy = taxonomy.copy()
        self.rules = rules.copy()
        self.changes = ChangeLog()
        self.taxonomy_dirty = False
        self.tagging_dirty = False
        self.expansion_dirty = False

    def add_nodes(self, *paths):
        '''Adds taxonomy nodes; validates every path before touching anything.'''
        probe = self.taxonomy.copy()
        try:
            for path in paths:
                probe.add(path)
        except TaxonomyError as exc:
            raise _ActionError(str(exc)) from None
        for path in paths:
            for node in self.taxonomy.add(path):
                self.changes.taxonomy_added.append(node)
                self.taxonomy_dirty = True

    def add_alias(self, token, dest):
        '''Adds tagging rule token -> dest; retires any tag named `token`.

        Retiring a tag rewrites every reference to it: destinations of other
        tagging rules and sources/targets of expansion rules all move to
        `dest`, keeping the artifacts reloadable.
        '''
        if token in self.rules.tagging:
            raise _ActionError('token %r already has a tagging rule' % (token,))
        if dest.name == token:
            raise _ActionError('alias %r -> %s maps a token to its own name'
                               % (token, dest))
        if not dest.is_tag:
            raise _ActionError('alias destination %s is structural' % (dest,))
        old = self.taxonomy.resolve_name(token)
        if old is not None and self.taxonomy.has_children(old):
            raise _ActionError('cannot retire %s: node has children' % (old,))
        if old is not None:
            for other in self.rules.tagging.values():
                if old in other.destinations and other.token == dest.name:
                    raise _ActionError(
                        'rewriting rule %r to %s would alias the rule to itself'
                        % (other.token, dest))
        if dest not in self.taxonomy:
            probe = self.taxonomy.copy()
            if old is not None:
                probe.remove(old)
            try:
                probe.add(dest)
            except TaxonomyError as exc:
                raise _ActionError(str(exc)) from None
        new_expansion = edges_removed = edges_added = None
        if old is not None:
            new_expansion, edges_removed, edges_added = _remap_expansion(
                self.rules.expansion, old, dest)

        # all validations passed; commit
        if old is not None:
            self.taxonomy.remove(old)
            self.changes.taxonomy_removed.append(old)
            self.taxonomy_dirty = True
        if dest not in self.taxonomy:
            for node in self.taxonomy.add(dest):
                self.changes.taxonomy_added.append(node)
            self.taxonomy_dirty = True
        self.rules.tagging[token] = TaggingRule(token, (dest,))
        self.changes.tagging_added.append(token)
        self.tagging_dirty = True
        if old is not None:
            for other_token, other in list(self.rules.tagging.items()):
                if other_token != token and old in other.destinations:
                    rewritten = (other.destinations - {old}) | {dest}
                    self.rules.tagging[other_token] = TaggingRule(other_token, rewritten)
                    self.tagging_dirty = True
            if edges_removed or edges_added:
                self.rules.expansion = new_expansion
                self.changes.expansion_removed.extend(edges_removed)
                self.changes.expansion_added.extend(edges_added)
                self.expansion_dirty = True

    def add_expansion_edge(self, source, target):
        '''Adds target to the expansion rule of source, creating the rule if needed.'''
        if source not in self.taxonomy or not source.is_tag:
            raise _ActionError('expansion source %s is not a tag in the taxonomy'
                               % (source,))
        if target not in self.taxonomy or not target.is_tag:
            raise _ActionError('expansion target %s is not a tag in the taxonomy'
                               % (target,))
        if target == source or _is_path_prefix(target, source):
            raise _ActionError('expansion %s => %s is already implicit'
                               % (source, target))
        existing = self.rules.expansion.get(source)
        targets = existing.targets if existing is not None else frozenset()
        if target in targets:
            raise _ActionError('expansion %s => %s already present' % (source, target))
        if _expansion_reaches(self.rules.expansion, target, source):
            raise _ActionError('expansion %s => %s would create a cycle'
                               % (source, target))
        self.rules.expansion[source] = ExpansionRule(source, targets | {target})
        self.changes.expansion_added.append((source, target))
        self.expansion_dirty = True


def _is_path_prefix(a, b):
    alen = len(a.components)
    return alen < len(b.components) and b.components[:alen] == a.components


def _expansion_reaches(expansion, start, goal):
    '''True when `goal` is reachable from `start` along expansion edges.'''
    stack = [start]
    seen = set()
    while stack:
        node = stack.pop()
        if node == goal:
            return True
        if node in seen:
            continue
        seen.add(node)
        rule = expansion.get(node)
        if rule is not None:
            stack.extend(rule.targets)
    return False


def _expansion_edges(expansion):
    return {(source, target)
            for source, rule in expansion.items() for target in rule.targets}


def _remap_expansion(expansion, old, new):
    '''Rewrites all references to a retired tag; validates the result.

    Returns (new mapping, removed edges, added edges).  Targets that would
    become the rule's own source (or an ancestor of it) are dropped; a rule
    remapped onto an existing source merges target sets.  Raises _ActionError
    when the rewrite would create a cycle.
    '''
    referenced = old in expansion or any(
        old in rule.targets for rule in expansion.values())
    if not referenced:
        return expansion, [], []
    result = {}
    for source, rule in expansion.items():
        new_source = new if source == old else source
        targets = {new if t == old else t for t in rule.targets}
        targets = {t for t in targets
                   if t != new_source and not _is_path_prefix(t, new_source)}
        if new_source in result:
            targets |= result[new_source].targets
        if targets:
            result[new_source] = ExpansionRule(new_source, targets)
    try:
        _check_expansion_acyclic(result)
    except RuleError as exc:
        raise _ActionError('retiring %s: %s' % (old, exc)) from None
    before = _expansion_edges(expansion)
    after = _expansion_edges(result)
    key = lambda edge: (str(edge[0]), str(edge[1]))
    return result, sorted(before - after, key=key), sorted(after - before, key=key)


def _act_unk_fam(state, a, b):
    state.add_alias(a.text, b)


def _act_unk_class_or_beh(state, a, b):
    state.add_nodes(TagPath(('FAM', a.text)))


def _act_unk_file(state, a, b):
    state.add_nodes(b.child(a.text))


def _act_unk_unk(state, a, b):
    # both tokens become families; deliberately no alias between them
    state.add_nodes(TagPath(('FAM', a.text)), TagPath(('FAM', b.text)))


def _act_fam_unk(state, a, b):
    state.add_alias(a.name, TagPath(('FAM', b.text)))


def _act_file_unk(state, a, b):
    state.add_alias(a.name, a.parent().child(b.text))


def _act_fam_fam(state, a, b):
    state.add_alias(a.name, b)


_TOP_BLOCK = {
    ('UNK', 'FAM'): _act_unk_fam,
    ('UNK', 'CLASS'): _act_unk_class_or_beh,
    ('UNK', 'BEH'): _act_unk_class_or_beh,
    ('UNK', 'FILE'): _act_unk_file,
    ('UNK', 'UNK'): _act_unk_unk,
    ('FAM', 'UNK'): _act_fam_unk,
    ('FILE', 'UNK'): _act_file_unk,
    ('FAM', 'FAM'): _act_fam_fam,
}

_BOTTOM_BLOCK = {
    ('FAM', 'FILE'), ('FAM', 'BEH'), ('FAM', 'CLASS'),
    ('CLASS', 'FILE'), ('CLASS', 'BEH'),
}


def infer(strong, taxonomy, rules, config=None):
    '''Runs the rule matrix over strong relations until nothing changes.

    Iterative phase: relations are visited in sorted canonical order against
    the evolving artifacts; known relations are dropped, equivalences become
    alias rules, matrix rows for unknown tokens are applied, anything else is
    kept for the next round.  The loop ends when a round consumes nothing.
    Terminal phase: remaining tag-to-tag relations with a matrix row become
    expansion rules; the rest is reported unhandled.
    '''
    if config is None:
        config = UpdateConfig()
    state = _WorkState(taxonomy, rules)
    remaining = sorted(strong, key=Relation.key)
    unhandled = []
    consumed_known = []
    consumed_equivalence = []
    consumed_topblock = []
    consumed_expansion = []

    progress = True
    while progress and remaining:
        progress = False
        kept = []
        for relation in remaining:
            a = resolve_item(relation.t_i, state.taxonomy, state.rules)
            b = resolve_item(relation.t_j, state.taxonomy, state.rules)
            equivalence = is_equivalent(relation, config)
            if _known_resolved(a, b, state.taxonomy, state.rules, equivalence):
                consumed_known.append(relation)
                progress = True
                continue
            if equivalence:
                token = item_name(a)
                dest = b if isinstance(b, TagPath) else TagPath(('FAM', b.text))
                try:
                    state.add_alias(token, dest)
                except _ActionError as exc:
                    unhandled.append(Unhandled(relation, str(exc)))
                else:
                    consumed_equivalence.append(relation)
                progress = True
                continue
            action = _TOP_BLOCK.get((item_category(a), item_category(b)))
            if action is not None:
                try:
                    action(state, a, b)
                except _ActionError as exc:
                    unhandled.append(Unhandled(relation, str(exc)))
                else:
                    consumed_topblock.append(relation)
                progress = True
                continue
            kept.append(relation)
        remaining = kept

    for relation in remaining:
        a = resolve_item(relation.t_i, state.taxonomy, state.rules)
        b = resolve_item(relation.t_j, state.taxonomy, state.rules)
        equivalence = is_equivalent(relation, config)
        if _known_resolved(a, b, state.taxonomy, state.rules, equivalence):
            consumed_known.append(relation)
            continue
        pair = (item_category(a), item_category(b))
        if pair in _BOTTOM_BLOCK:
            try:
                state.add_expansion_edge(a, b)
            except _ActionError as exc:
                unhandled.append(Unhandled(relation, str(exc)))
            else:
                consumed_expansion.append(relation)
        else:
            unhandled.append(Unhandled(
                relation, 'no update rule for category pair (%s, %s)' % pair))

    return UpdateResult(
        taxonomy=state.taxonomy,
        rules=state.rules,
        changes=state.changes,
        unhandled=unhandled,
        consumed_known=consumed_known,
        consumed_equivalence=consumed_equivalence,
        consumed_topblock=consumed_topblock,
        consumed_expansion=consumed_expansion,
        taxonomy_dirty=state.taxonomy_dirty,
        tagging_dirty=state.tagging_dirty,
        expansion_dirty=state.expansion_dirty,
    )


def format_unhandled(unhandled):
    '''TSV report: the stats columns plus a reason column.'''
    lines = [STATS_HEADER + '\treason']
    for entry in sorted(unhandled, key=lambda u: u.relation.key()):
        lines.append('%s\t%s' % (entry.relation.format_row(), entry.reason))
    return '\n'.join(lines) + '\n'


def format_changelog(result, relations_all, relations_strong, relations_os_removed):
    '''Counts block plus one line per added (+) or removed (-) entry.'''
    changes = result.changes
    lines = [
        'relations all %d' % relations_all,
        'relations strong %d' % relations_strong,
        'relations os_removed %d' % relations_os_removed,
        'relations known %d' % len(result.consumed_known),
        'relations out %d' % len(result.unhandled),
        'taxonomy added %d' % len(changes.taxonomy_added),
        'taxonomy removed %d' % len(changes.taxonomy_removed),
        'tagging added %d' % len(changes.tagging_added),
        'tagging removed %d' % len(changes.tagging_removed),
        'expansion added %d' % len(changes.expansion_added),
        'expansion removed %d' % len(changes.expansion_removed),
    ]
    entries = []
    for sign, paths in (('+', changes.taxonomy_added), ('-', changes.taxonomy_removed)):
        entries.extend('taxonomy %s %s' % (sign, path) for path in sorted(paths, key=str))
    for sign, tokens in (('+', changes.tagging_added), ('-', changes.tagging_removed)):
        entries.extend('tagging %s %s' % (sign, token) for token in sorted(tokens))
    for sign, edges in (('+', changes.expansion_added), ('-', changes.expansion_removed)):
        entries.extend('expansion %s %s => %s' % (sign, source, target)
                       for source, target in sorted(edges, key=lambda e: (str(e[0]), str(e[1]))))
    if entries:
        lines.append('')
        lines.extend(entries)
    return '\n'.join(lines) + '\n'
