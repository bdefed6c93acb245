'''Per-sample labeling pipeline and dataset-level co-occurrence statistics.

For every engine label of a sample: tokenize, apply tagging rules, expand.
Every item (tag or unknown token) remembers the set of engines whose label
produced it; items seen by fewer than two engines are pruned.  The same
per-engine item extraction, taken before expansion, feeds the co-occurrence
counters used by the update engine.
'''

import itertools
from collections import Counter

from .taxonomy import TagPath, UnknownToken, render_item
from .tokenizer import tokenize

#: unknown tokens shorter than this are dropped (after tagging, not before)
MIN_UNKNOWN_LEN = 4

#: items must be produced by at least this many engines to survive
MIN_ENGINES = 2

STATS_HEADER = 't_i\tt_j\t|t_i|\t|t_j|\t|(t_i,t_j)|\trel_ij\trel_ji'


class SampleReport:
    '''One input sample: id (preferring sha256) plus engine -> raw label map.'''

    __slots__ = ('sample_id', 'av_labels')

    HASH_FIELDS = ('sha256', 'sha1', 'md5')

    def __init__(self, sample_id, av_labels):
        self.sample_id = sample_id
        self.av_labels = av_labels

    @classmethod
    def from_dict(cls, obj):
        '''Builds a report from one decoded JSONL object; raises ValueError if unusable.'''
        if not isinstance(obj, dict):
            raise ValueError('sample is not a JSON object')
        sample_id = None
        for field in cls.HASH_FIELDS:
            value = obj.get(field)
            if isinstance(value, str) and value.strip():
                sample_id = value.strip()
                break
        if sample_id is None:
            raise ValueError('no usable hash field (%s)' % '/'.join(cls.HASH_FIELDS))
        raw_labels = obj.get('av_labels')
        if raw_labels is None:
            raw_labels = {}
        if not isinstance(raw_labels, dict):
            raise ValueError('av_labels is not an object')
        av_labels = {}
        for engine, label in raw_labels.items():
            # tolerate dirty dumps: keep only usable engine/label string pairs
            if isinstance(engine, str) and engine and isinstance(label, str):
                av_labels[engine] = label
        return cls(sample_id, av_labels)


class TagAssignment:
    '''An output item together with the engines whose labels produced it.'''

    __slots__ = ('item', 'engines')

    def __init__(self, item, engines):
        self.item = item
        self.engines = frozenset(engines)

    @property
    def count(self):
        return len(self.engines)

    def __eq__(self, other):
        return (isinstance(other, TagAssignment)
                and self.item == other.item and self.engines == other.engines)

    def __repr__(self):
        return 'TagAssignment(%s, %d engines)' % (render_item(self.item), self.count)


class TagRanking:
    '''Pruned assignments of one sample, ordered by engine count.'''

    __slots__ = ('sample_id', 'assignments')

    def __init__(self, sample_id, assignments):
        self.sample_id = sample_id
        self.assignments = assignments

    def __iter__(self):
        return iter(self.assignments)

    def __len__(self):
        return len(self.assignments)

    def format_line(self):
        '''`<sample_id>\\t<item>|<count>,...`; bare sample_id when empty.'''
        if not self.assignments:
            return self.sample_id
        items = ','.join('%s|%d' % (render_item(a.item), a.count) for a in self.assignments)
        return '%s\t%s' % (self.sample_id, items)


class Relation:
    '''Seven-value co-occurrence record for one unordered item pair.

    t_i is the less frequent item (ties broken lexicographically), therefore
    rel_ij >= rel_ji always holds.
    '''

    __slots__ = ('t_i', 't_j', 'count_i', 'count_j', 'count_ij', 'rel_ij', 'rel_ji')

    def __init__(self, t_i, t_j, count_i, count_j, count_ij, rel_ij, rel_ji):
        self.t_i = t_i
        self.t_j = t_j
        self.count_i = count_i
        self.count_j = count_j
        self.count_ij = count_ij
        self.rel_ij = rel_ij
        self.rel_ji = rel_ji

    def key(self):
        return (render_item(self.t_i), render_item(self.t_j))

    def as_tuple(self):
        return (render_item(self.t_i), render_item(self.t_j),
                self.count_i, self.count_j, self.count_ij, self.rel_ij, self.rel_ji)

    def __eq__(self, other):
        return isinstance(other, Relation) and self.as_tuple() == other.as_tuple()

    def __hash__(self):
        return hash(self.as_tuple())

    def __repr__(self):
        return 'Relation(%s, %s, %d/%d/%d)' % (
            render_item(self.t_i), render_item(self.t_j),
            self.count_i, self.count_j, self.count_ij)

    def format_row(self):
        return '%s\t%s\t%d\t%d\t%d\t%.6f\t%.6f' % (
            render_item(self.t_i), render_item(self.t_j),
            self.count_i, self.count_j, self.count_ij, self.rel_ij, self.rel_ji)


def tag_tokens(tokens, rules, taxonomy):
    '''Maps tokens to (tags, unknown tokens).

    Per token: an explicit tagging rule wins (a generic rule drops the token);
    otherwise a token equal to a unique tag name maps implicitly; otherwise the
    token is unknown.  Unknown tokens shorter than MIN_UNKNOWN_LEN are dropped
    only at this point, so short tokens can still match rules and tag names.
    '''
    tags = set()
    unknowns = set()
    for token in tokens:
        rule = rules.tagging.get(token)
        if rule is not None:
            tags.update(rule.destinations)
            continue
        path = taxonomy.resolve_name(token)
        if path is not None:
            tags.add(path)
        elif len(token) >= MIN_UNKNOWN_LEN:
            unknowns.add(token)
    return tags, unknowns


def expand(tags, rules, taxonomy):
    '''Least fixed point of expansion rules plus taggable taxonomy ancestors.'''
    result = set(tags)
    queue = list(tags)
    while queue:
        tag = queue.pop()
        rule = rules.expansion.get(tag)
        if rule is not None:
            for target in rule.targets:
                if target not in result:
                    result.add(target)
                    queue.append(target)
        for ancestor in taxonomy.tag_ancestors(tag):
            if ancestor not in result:
                result.add(ancestor)
                queue.append(ancestor)
    return result


def _engine_items(report, rules, taxonomy, allowlist=None):
    '''Yields (engine, tags, unknown token strings) per processed engine label.'''
    for engine, label in report.av_labels.items():
        if allowlist is not None and engine.lower() not in allowlist:
            continue
        tags, unknowns = tag_tokens(tokenize(label), rules, taxonomy)
        yield engine, tags, unknowns


def analyze_sample(report, rules, taxonomy, allowlist=None, with_stats=False):
    '''One pass over a sample's labels: (TagRanking, pre-expansion stat items).

    The ranking uses post-expansion items; the statistics item set uses the
    pre-expansion union, both under the same >= MIN_ENGINES presence filter.
    The second element is None unless with_stats is set.
    '''
    expanded_engines = {}
    raw_engines = {} if with_stats else None
    for engine, tags, unknowns in _engine_items(report, rules, taxonomy, allowlist):
        unknown_items = [UnknownToken(u) for u in unknowns]
        for item in itertools.chain(expand(tags, rules, taxonomy), unknown_items):
            expanded_engines.setdefault(item, set()).add(engine)
        if with_stats:
            for item in itertools.chain(tags, unknown_items):
                raw_engines.setdefault(item, set()).add(engine)
    assignments = [TagAssignment(item, engines)
                   for item, engines in expanded_engines.items()
                   if len(engines) >= MIN_ENGINES]
    assignments.sort(key=lambda a: (-a.count, render_item(a.item)))
    ranking = TagRanking(report.sample_id, assignments)
    stat_items = None
    if with_stats:
        stat_items = {item for item, engines in raw_engines.items()
                      if len(engines) >= MIN_ENGINES}
    return ranking, stat_items


def label_sample(report, rules, taxonomy, allowlist=None):
    '''Tokenize, tag and expand every engine label; prune and rank the items.'''
    ranking, _ = analyze_sample(report, rules, taxonomy, allowlist)
    return ranking


def compat_family(ranking):
    '''Single most likely family: best-ranked FAM tag or unknown token, or None.

    At equal engine count a family tag beats an unknown token, then the
    lexicographically smallest name wins.
    '''
    best = None
    best_key = None
    for assignment in ranking:
        item = assignment.item
        if isinstance(item, TagPath):
            if item.category != 'FAM':
                continue
            candidate = (-assignment.count, 0, item.name)
        elif isinstance(item, UnknownToken):
            candidate = (-assignment.count, 1, item.text)
        else:
            continue
        if best_key is None or candidate < best_key:
            best_key = candidate
            best = candidate[2]
    return best


def format_compat_line(sample_id, family):
    '''`<sample_id>\\t<family>`, with a SINGLETON placeholder when family is None.'''
    if family is None:
        return '%s\tSINGLETON:%s' % (sample_id, sample_id)
    return '%s\t%s' % (sample_id, family)


class CooccurrenceCounter:
    '''Streaming per-item and per-pair sample counters.

    add_items ingests one sample's item set; merge combines counters built over
    disjoint partitions (commutative and associative, so parallel workers can
    each build one and merge in any order).
    '''

    def __init__(self):
        self.item_counts = Counter()
        self.pair_counts = Counter()

    def add_items(self, items):
        ordered = sorted(items, key=render_item)
        for item in ordered:
            self.item_counts[item] += 1
        for pair in itertools.combinations(ordered, 2):
            self.pair_counts[pair] += 1

    def merge(self, other):
        self.item_counts.update(other.item_counts)
        self.pair_counts.update(other.pair_counts)
        return self

    def relations(self):
        '''Finalizes orientation (t_i least frequent) and joint frequencies.'''
        relations = []
        for (a, b), count_ab in self.pair_counts.items():
            count_a = self.item_counts[a]
            count_b = self.item_counts[b]
            if (count_a, render_item(a)) <= (count_b, render_item(b)):
                t_i, t_j, count_i, count_j = a, b, count_a, count_b
            else:
                t_i, t_j, count_i, count_j = b, a, count_b, count_a
            relations.append(Relation(t_i, t_j, count_i, count_j, count_ab,
                                      count_ab / count_i, count_ab / count_j))
        relations.sort(key=Relation.key)
        return relations


def cooccurrence_stats(reports, rules, taxonomy, allowlist=None):
    '''Relations over a report stream (pre-expansion items, >= 2-engine filter).'''
    counter = CooccurrenceCounter()
    for report in reports:
        _, items = analyze_sample(report, rules, taxonomy, allowlist, with_stats=True)
        counter.add_items(items)
    return counter.relations()


def format_stats(relations):
    '''Stats TSV content: header plus one row per relation, sorted.'''
    lines = [STATS_HEADER]
    lines.extend(r.format_row() for r in sorted(relations, key=Relation.key))
    return '\n'.join(lines) + '\n'
