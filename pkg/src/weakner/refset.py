"""Reference sets (gazetteers) and high-precision mention search.

Two matching styles are supported, mirroring how a curated name list is
typically used against text:

* exact search: a run of consecutive tokens whose single-space-joined text
  equals a name (optionally case-insensitive);
* partial search: a single token matches when one of its hyphen- or
  slash-delimited components equals a name under case folding, so a name
  like TIGAR is found inside "Flag-tagged-TIGAR".

Filtering (dictionary words out, short names out) happens before matching
and is what turns a noisy gazetteer into a usable one.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .corpus import Dataset, EntitySpan, SoftLabeling, TagSet, bio_decode
from .errors import EmptyReferenceSet, WeaknerError

_COMPONENT_SPLIT = re.compile(r"[-/]")


@dataclass(frozen=True)
class ReferenceSet:
    """A deduplicated set of entity surface forms for one entity type."""

    names: frozenset
    entity_type: str

    def __post_init__(self):
        object.__setattr__(self, "names", frozenset(self.names))
        if any(not n for n in self.names):
            raise WeaknerError("reference set contains an empty name")

    def __len__(self):
        return len(self.names)


@dataclass(frozen=True)
class MatchPolicy:
    """Configuration of the filtering and matching rules.

    dictionary_filter holds lowercase words; a name is dropped when its
    lowercased form is in the dictionary or when it is shorter than
    min_name_length characters.
    """

    case_sensitive: bool = True
    min_name_length: int = 1
    dictionary_filter: frozenset | None = None
    allow_partial: bool = False

    def __post_init__(self):
        if self.min_name_length < 1:
            raise WeaknerError("min_name_length must be >= 1")
        if self.dictionary_filter is not None:
            object.__setattr__(self, "dictionary_filter", frozenset(self.dictionary_filter))

    def keeps(self, name: str) -> bool:
        if len(name) < self.min_name_length:
            return False
        if self.dictionary_filter is not None and name.lower() in self.dictionary_filter:
            return False
        return True


def exact_policy() -> MatchPolicy:
    """Plain case-sensitive exact search, no filtering."""
    return MatchPolicy()


def filtered_policy(dictionary, min_name_length: int = 4) -> MatchPolicy:
    """Dictionary- and length-filtered, case-insensitive, partial-match search."""
    return MatchPolicy(
        case_sensitive=False,
        min_name_length=min_name_length,
        dictionary_filter=frozenset(w.lower() for w in dictionary),
        allow_partial=True,
    )


@dataclass(frozen=True, order=True)
class RefMatch:
    """A matched mention: sentence index, inclusive token range, name, type."""

    sentence: int
    first: int
    last: int
    name: str
    entity_type: str

    def span(self) -> EntitySpan:
        return EntitySpan(self.sentence, self.first, self.last, self.entity_type)


def load_reference_set(path, entity_type: str) -> ReferenceSet:
    """Load one surface form per line; blank lines skipped, BOM stripped."""
    names = set()
    with open(path, encoding="utf-8-sig") as fh:
        for line in fh:
            name = line.strip()
            if name:
                names.add(name)
    if not names:
        raise EmptyReferenceSet(f"no names in {path}")
    return ReferenceSet(frozenset(names), entity_type)


def load_dictionary(path) -> frozenset:
    """Load a word list, one word per line, lowercased."""
    with open(path, encoding="utf-8-sig") as fh:
        return frozenset(line.strip().lower() for line in fh if line.strip())


def filter_names(refset: ReferenceSet, policy: MatchPolicy) -> ReferenceSet:
    """Names surviving the policy's dictionary and length rules.

    Idempotent; the input set is left untouched. The result may be empty
    (an empty set simply produces no matches).
    """
    kept = frozenset(n for n in refset.names if policy.keeps(n))
    return ReferenceSet(kept, refset.entity_type)


def _fold(text: str, case_sensitive: bool) -> str:
    return text if case_sensitive else text.casefold()


def _name_index(names, case_sensitive: bool):
    """Map folded surface form -> canonical name (longest, then smallest)."""
    index = {}
    for name in names:
        key = _fold(name, case_sensitive)
        cur = index.get(key)
        if cur is None or len(name) > len(cur) or (len(name) == len(cur) and name < cur):
            index[key] = name
    return index


def token_components(text: str):
    """Hyphen/slash-delimited components of a token (the token itself if none)."""
    return [c for c in _COMPONENT_SPLIT.split(text) if c]


def find_matches(corpus: Dataset, refset: ReferenceSet, policy: MatchPolicy):
    """Find non-overlapping gazetteer mentions in every sentence.

    Exact mode: any 1..k-token window whose single-space-joined text equals
    a name under the policy's case rule (k = longest name in tokens).
    Partial mode additionally matches a single token when one of its
    hyphen/slash components equals a name under case folding.

    Overlaps resolve leftmost-longest; ties go to the longer matched name,
    then the lexicographically smaller one. Deterministic.
    """
    exact = _name_index(refset.names, policy.case_sensitive)
    partial = _name_index(refset.names, case_sensitive=False) if policy.allow_partial else {}
    max_window = max((name.count(" ") + 1 for name in refset.names), default=1)

    matches = []
    for s, sent in enumerate(corpus.sentences):
        texts = sent.texts()
        n = len(texts)
        candidates = []
        for i in range(n):
            for w in range(1, max_window + 1):
                if i + w > n:
                    break
                joined = _fold(" ".join(texts[i:i + w]), policy.case_sensitive)
                name = exact.get(joined)
                if name is not None:
                    candidates.append((i, i + w - 1, name))
            if policy.allow_partial:
                for comp in token_components(texts[i]):
                    name = partial.get(comp.casefold())
                    if name is not None:
                        candidates.append((i, i, name))
        matches.extend(
            RefMatch(s, first, last, name, refset.entity_type)
            for first, last, name in _resolve_overlaps(candidates)
        )
    return matches


def _resolve_overlaps(candidates):
    """Greedy leftmost-longest selection over (first, last, name) triples."""
    ranked = sorted(
        set(candidates),
        key=lambda c: (c[0], -(c[1] - c[0]), -len(c[2]), c[2]),
    )
    chosen = []
    next_free = 0
    for first, last, name in ranked:
        if first >= next_free:
            chosen.append((first, last, name))
            next_free = last + 1
    return chosen


def gold_spans(gold: Dataset, tags: TagSet):
    """Entity spans of a fully labeled dataset (hard labels required)."""
    spans = []
    for s, labels in enumerate(gold.labels):
        if labels is None or isinstance(labels, SoftLabeling):
            raise WeaknerError("audit needs a fully hard-labeled gold dataset")
        spans.extend(bio_decode(labels, tags, sentence=s))
    return spans


def audit_matcher(matches, gold: Dataset, tags: TagSet, criterion: str = "exact"):
    """Mention-level precision/recall of matches against gold entity spans.

    criterion "exact" counts a match only when (sentence, range, type) all
    agree; "overlap" credits any same-type token overlap.
    """
    gold_set = gold_spans(gold, tags)
    if criterion == "exact":
        gold_keys = {(sp.sentence, sp.first, sp.last, sp.entity_type) for sp in gold_set}
        tp = sum(
            (m.sentence, m.first, m.last, m.entity_type) in gold_keys for m in matches
        )
        found = {
            (m.sentence, m.first, m.last, m.entity_type) for m in matches
        } & gold_keys
        recall_hits = len(found)
    elif criterion == "overlap":
        def overlaps(m, sp):
            return (
                m.sentence == sp.sentence
                and m.entity_type == sp.entity_type
                and m.first <= sp.last
                and sp.first <= m.last
            )

        tp = sum(any(overlaps(m, sp) for sp in gold_set) for m in matches)
        recall_hits = sum(any(overlaps(m, sp) for m in matches) for sp in gold_set)
    else:
        raise WeaknerError(f"unknown audit criterion {criterion!r}")

    precision = tp / len(matches) if matches else 0.0
    recall = recall_hits / len(gold_set) if gold_set else 0.0
    return precision, recall
