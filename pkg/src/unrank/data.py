"""Corpus model for corrective unranking.

A corpus is a set of labelled query-document pairs. Forgetting is expressed
as a pair of id sets (queries to remove, documents to remove), which induce
a forget set of pairs; the complement is the retain set. A substitute map
assigns each to-be-forgotten document a replacement, yielding a corrected
corpus in which the substitutes inherit the forgotten pairs' labels.

All types are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ValidationError

QueryId = str
DocId = str


class RelevanceLabel(Enum):
    """Binary relevance judgement. Graded labels must be thresholded upstream."""

    POSITIVE = "+"
    NEGATIVE = "-"

    @classmethod
    def from_tsv(cls, token: str) -> "RelevanceLabel":
        if token == "1":
            return cls.POSITIVE
        if token == "0":
            return cls.NEGATIVE
        raise ValidationError(f"relevance label must be 1 or 0, got {token!r}")

    def to_tsv(self) -> str:
        return "1" if self is RelevanceLabel.POSITIVE else "0"


Pair = tuple[QueryId, DocId, RelevanceLabel]

# Tab breaks the TSV formats, pipe breaks the "qid|did" substitute keys.
_FORBIDDEN_ID_CHARS = ("\t", "\n", "\r", "|")


def check_id(kind: str, value: str) -> str:
    """Validate an opaque identifier; returns it unchanged."""
    if not value:
        raise ValidationError(f"empty {kind} id")
    if value.startswith("#"):
        raise ValidationError(f"{kind} id {value!r} may not start with '#'")
    for ch in _FORBIDDEN_ID_CHARS:
        if ch in value:
            raise ValidationError(f"{kind} id {value!r} contains forbidden character {ch!r}")
    return value


@dataclass(frozen=True)
class Dataset:
    """A labelled pairwise retrieval corpus plus entity-level feature vectors.

    Attributes:
        queries: all query ids, sorted.
        docs_of: per query, its (doc id, label) judgements sorted by doc id.
        query_features: feature vector per query id, all of length d_feat.
        doc_features: feature vector per document id, all of length d_feat.
        universe: every document id that appears in some judgement, sorted.
        d_feat: shared feature dimensionality.

    Invariants enforced at construction: each (query, document) pair appears
    at most once, and every query has at least one positive and one negative
    document.
    """

    queries: tuple[QueryId, ...]
    docs_of: Mapping[QueryId, tuple[tuple[DocId, RelevanceLabel], ...]]
    query_features: Mapping[QueryId, np.ndarray]
    doc_features: Mapping[DocId, np.ndarray]
    universe: tuple[DocId, ...]
    d_feat: int

    @classmethod
    def build(
        cls,
        pairs: Iterable[tuple[QueryId, DocId, RelevanceLabel]],
        query_features: Mapping[QueryId, np.ndarray],
        doc_features: Mapping[DocId, np.ndarray],
    ) -> "Dataset":
        """Assemble and validate a dataset from raw judgements and features."""
        labels: dict[tuple[QueryId, DocId], RelevanceLabel] = {}
        per_query: dict[QueryId, dict[DocId, RelevanceLabel]] = {}
        for qid, did, label in pairs:
            check_id("query", qid)
            check_id("document", did)
            key = (qid, did)
            if key in labels:
                raise ValidationError(f"duplicate judgement for pair ({qid}, {did})")
            labels[key] = label
            per_query.setdefault(qid, {})[did] = label
        if not per_query:
            raise ValidationError("dataset has no judgements")

        docs_of: dict[QueryId, tuple[tuple[DocId, RelevanceLabel], ...]] = {}
        for qid in sorted(per_query):
            judged = per_query[qid]
            n_pos = sum(1 for lab in judged.values() if lab is RelevanceLabel.POSITIVE)
            if n_pos == 0:
                raise ValidationError(f"query {qid} has no positive document")
            if n_pos == len(judged):
                raise ValidationError(f"query {qid} has no negative document")
            docs_of[qid] = tuple(sorted(judged.items()))

        universe = tuple(sorted({did for _, did in labels}))
        d_feat = _validate_features(docs_of, query_features, doc_features, universe)
        q_feats = {q: _as_feature(query_features[q]) for q in docs_of}
        d_feats = {d: _as_feature(doc_features[d]) for d in universe}
        return cls(
            queries=tuple(sorted(docs_of)),
            docs_of=docs_of,
            query_features=q_feats,
            doc_features=d_feats,
            universe=universe,
            d_feat=d_feat,
        )

    def docs(self, qid: QueryId) -> tuple[DocId, ...]:
        return tuple(did for did, _ in self.docs_of[qid])

    def positives(self, qid: QueryId) -> tuple[DocId, ...]:
        return tuple(d for d, lab in self.docs_of[qid] if lab is RelevanceLabel.POSITIVE)

    def negatives(self, qid: QueryId) -> tuple[DocId, ...]:
        return tuple(d for d, lab in self.docs_of[qid] if lab is RelevanceLabel.NEGATIVE)

    def label_of(self, qid: QueryId, did: DocId) -> RelevanceLabel:
        for d, lab in self.docs_of[qid]:
            if d == did:
                return lab
        raise ValidationError(f"pair ({qid}, {did}) not in dataset")

    def pairs(self) -> frozenset[Pair]:
        return frozenset(
            (q, d, lab) for q, judged in self.docs_of.items() for d, lab in judged
        )

    def positive_pairs(self) -> tuple[Pair, ...]:
        out = []
        for q in self.queries:
            for d, lab in self.docs_of[q]:
                if lab is RelevanceLabel.POSITIVE:
                    out.append((q, d, lab))
        return tuple(out)

    @property
    def n_pairs(self) -> int:
        return sum(len(judged) for judged in self.docs_of.values())


def _as_feature(vec: np.ndarray) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def _validate_features(docs_of, query_features, doc_features, universe) -> int:
    d_feat: int | None = None
    for qid in docs_of:
        if qid not in query_features:
            raise ValidationError(f"missing feature vector for query {qid}")
        vec = np.asarray(query_features[qid], dtype=np.float64)
        if vec.ndim != 1:
            raise ValidationError(f"feature vector for query {qid} is not one-dimensional")
        if d_feat is None:
            d_feat = vec.shape[0]
        if vec.shape[0] != d_feat:
            raise ValidationError(f"feature length mismatch for query {qid}")
        if not np.all(np.isfinite(vec)):
            raise ValidationError(f"non-finite feature value for query {qid}")
    assert d_feat is not None
    for did in universe:
        if did not in doc_features:
            raise ValidationError(f"missing feature vector for document {did}")
        vec = np.asarray(doc_features[did], dtype=np.float64)
        if vec.ndim != 1 or vec.shape[0] != d_feat:
            raise ValidationError(f"feature length mismatch for document {did}")
        if not np.all(np.isfinite(vec)):
            raise ValidationError(f"non-finite feature value for document {did}")
    return d_feat


@dataclass(frozen=True)
class ForgetSpec:
    """Removal request: queries whose positives must go, documents that must go."""

    forget_queries: frozenset[QueryId]
    forget_docs: frozenset[DocId]

    @classmethod
    def make(cls, forget_queries: Iterable[QueryId] = (), forget_docs: Iterable[DocId] = ()) -> "ForgetSpec":
        return cls(frozenset(forget_queries), frozenset(forget_docs))

    def to_json_dict(self) -> dict:
        return {
            "forget_queries": sorted(self.forget_queries),
            "forget_docs": sorted(self.forget_docs),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ForgetSpec":
        return cls.make(obj.get("forget_queries", ()), obj.get("forget_docs", ()))


@dataclass(frozen=True)
class ForgetSet:
    """The pairs whose learned relevance must be removed.

    per_query maps each affected query to its to-be-forgotten documents;
    forget_queries_index is the set of affected queries.
    """

    pairs: frozenset[Pair]
    per_query: Mapping[QueryId, frozenset[DocId]]
    forget_queries_index: frozenset[QueryId]

    @classmethod
    def from_pairs(cls, pairs: Iterable[Pair]) -> "ForgetSet":
        pair_set = frozenset(pairs)
        per_query: dict[QueryId, set[DocId]] = {}
        for q, d, _ in pair_set:
            per_query.setdefault(q, set()).add(d)
        frozen = {q: frozenset(ds) for q, ds in per_query.items()}
        return cls(pair_set, frozen, frozenset(frozen))

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class RetainSet:
    """Complement of a forget set within its dataset."""

    pairs: frozenset[Pair]

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class SubstituteMap:
    """Replacement document for each to-be-forgotten (query, document) pair."""

    subs: Mapping[tuple[QueryId, DocId], DocId]

    def substitute_for(self, qid: QueryId, did: DocId) -> DocId:
        try:
            return self.subs[(qid, did)]
        except KeyError:
            raise ValidationError(f"no substitute recorded for pair ({qid}, {did})") from None

    def to_json_dict(self) -> dict:
        return {
            "substitutes": {f"{q}|{d}": sub for (q, d), sub in sorted(self.subs.items())}
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SubstituteMap":
        subs: dict[tuple[QueryId, DocId], DocId] = {}
        for key, sub in obj.get("substitutes", {}).items():
            if "|" not in key:
                raise ValidationError(f"substitute key {key!r} is not of the form 'qid|did'")
            qid, did = key.split("|", 1)
            subs[(check_id("query", qid), check_id("document", did))] = check_id("document", sub)
        return cls(subs)


@dataclass(frozen=True)
class CorrectedDataset:
    """The corpus after substitution.

    star_pairs is the corrected pair set: substitute pairs carrying the
    forgotten pairs' labels, union the retain set. docs_star_of is the
    per-query document list after substitution; when a substitute collides
    with a retained judgement of the same query the substitute's label wins.
    """

    base: Dataset
    star_pairs: frozenset[Pair]
    docs_star_of: Mapping[QueryId, tuple[tuple[DocId, RelevanceLabel], ...]]

    def docs_star(self, qid: QueryId) -> tuple[DocId, ...]:
        return tuple(did for did, _ in self.docs_star_of[qid])

    def as_dataset(self) -> Dataset:
        """Materialise the corrected corpus as a plain dataset (for training)."""
        pairs = [
            (q, d, lab) for q, judged in self.docs_star_of.items() for d, lab in judged
        ]
        return Dataset.build(pairs, self.base.query_features, self.base.doc_features)


def build_forget_set(
    dataset: Dataset,
    spec: ForgetSpec,
    include_negative_doc_removal: bool = False,
) -> ForgetSet:
    """Expand a removal request into the induced set of forgotten pairs.

    Query removal contributes every positive pair of each listed query.
    Document removal contributes, for each listed document, its positive
    pairs; pass include_negative_doc_removal=True to also sweep in pairs
    where the document was judged irrelevant.
    """
    known_docs = set(dataset.universe)
    for qid in spec.forget_queries:
        if qid not in dataset.docs_of:
            raise ValidationError(f"forget spec names unknown query {qid}")
    for did in spec.forget_docs:
        if did not in known_docs:
            raise ValidationError(f"forget spec names unknown document {did}")

    pairs: set[Pair] = set()
    for qid in spec.forget_queries:
        for did in dataset.positives(qid):
            pairs.add((qid, did, RelevanceLabel.POSITIVE))
    if spec.forget_docs:
        for qid in dataset.queries:
            for did, lab in dataset.docs_of[qid]:
                if did in spec.forget_docs:
                    if lab is RelevanceLabel.POSITIVE or include_negative_doc_removal:
                        pairs.add((qid, did, lab))
    return ForgetSet.from_pairs(pairs)


def partition(dataset: Dataset, forget: ForgetSet) -> tuple[ForgetSet, RetainSet]:
    """Split the corpus into the forget set and its complement."""
    all_pairs = dataset.pairs()
    if not forget.pairs <= all_pairs:
        extra = sorted((q, d) for q, d, _ in forget.pairs - all_pairs)
        raise ValidationError(f"forget set contains pairs outside the dataset: {extra}")
    return forget, RetainSet(all_pairs - forget.pairs)


def apply_substitutes(
    dataset: Dataset,
    forget: ForgetSet,
    subs: SubstituteMap,
) -> CorrectedDataset:
    """Build the corrected corpus: replace each forgotten document in its
    query's list with its substitute, keeping the label."""
    _validate_substitutes(dataset, forget, subs)
    _, retain = partition(dataset, forget)

    star_pairs: set[Pair] = set(retain.pairs)
    sub_label: dict[QueryId, dict[DocId, RelevanceLabel]] = {}
    for q, d, lab in forget.pairs:
        sub = subs.subs[(q, d)]
        star_pairs.add((q, sub, lab))
        sub_label.setdefault(q, {})[sub] = lab

    docs_star_of: dict[QueryId, tuple[tuple[DocId, RelevanceLabel], ...]] = {}
    for q in dataset.queries:
        forgotten = forget.per_query.get(q, frozenset())
        judged = {d: lab for d, lab in dataset.docs_of[q] if d not in forgotten}
        judged.update(sub_label.get(q, {}))  # substitute label wins on collision
        docs_star_of[q] = tuple(sorted(judged.items()))
    return CorrectedDataset(base=dataset, star_pairs=frozenset(star_pairs), docs_star_of=docs_star_of)


def _validate_substitutes(dataset: Dataset, forget: ForgetSet, subs: SubstituteMap) -> None:
    forget_keys = {(q, d) for q, d, _ in forget.pairs}
    missing = sorted(forget_keys - set(subs.subs))
    if missing:
        raise ValidationError(f"substitute map is missing forget pairs: {missing}")
    extra = sorted(set(subs.subs) - forget_keys)
    if extra:
        raise ValidationError(f"substitute map covers pairs outside the forget set: {extra}")
    known_docs = set(dataset.universe)
    seen_per_query: dict[QueryId, dict[DocId, DocId]] = {}
    for (q, d), sub in sorted(subs.subs.items()):
        if sub not in known_docs:
            raise ValidationError(f"substitute {sub} for pair ({q}, {d}) is not in the corpus")
        if sub in forget.per_query.get(q, frozenset()):
            raise ValidationError(f"substitute {sub} for pair ({q}, {d}) is itself forgotten for {q}")
        if sub in dataset.positives(q):
            raise ValidationError(f"substitute {sub} for pair ({q}, {d}) is a positive of {q}")
        prior = seen_per_query.setdefault(q, {})
        if sub in prior:
            raise ValidationError(
                f"substitute {sub} assigned to both ({q}, {prior[sub]}) and ({q}, {d}); "
                "substitutes must be distinct within a query"
            )
        prior[sub] = d


# ---------------------------------------------------------------------------
# File formats: pairs TSV, feature TSV, forget/substitute JSON.
# ---------------------------------------------------------------------------

def load_pairs(path: str | Path) -> list[tuple[QueryId, DocId, RelevanceLabel]]:
    """Read `query_id<TAB>doc_id<TAB>label` records; '#' lines are comments."""
    out = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ValidationError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}")
        qid, did, token = fields
        out.append((check_id("query", qid), check_id("document", did), RelevanceLabel.from_tsv(token)))
    return out


def write_pairs(pairs: Iterable[tuple[QueryId, DocId, RelevanceLabel]], path: str | Path) -> None:
    rows = sorted((q, d) for q, d, _ in pairs)
    labels = {(q, d): lab for q, d, lab in pairs}
    lines = [f"{q}\t{d}\t{labels[(q, d)].to_tsv()}" for q, d in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_features(path: str | Path) -> dict[str, np.ndarray]:
    """Read `entity_id<TAB>v1<TAB>...<TAB>vN` feature records."""
    out: dict[str, np.ndarray] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) < 2:
            raise ValidationError(f"{path}:{lineno}: feature record needs an id and at least one value")
        entity = check_id("entity", fields[0])
        if entity in out:
            raise ValidationError(f"{path}:{lineno}: duplicate feature record for {entity}")
        try:
            out[entity] = np.array([float(v) for v in fields[1:]], dtype=np.float64)
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: bad float in feature record: {exc}") from None
    return out


def write_features(features: Mapping[str, np.ndarray], path: str | Path) -> None:
    lines = []
    for entity in sorted(features):
        values = "\t".join(repr(float(v)) for v in features[entity])
        lines.append(f"{entity}\t{values}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset(pairs_path: str | Path, query_features_path: str | Path, doc_features_path: str | Path) -> Dataset:
    """Ingest a corpus from its pairs file and the two feature files.

    Feature files may contain extra entities (for example a shared file
    covering both the train and test splits); they are ignored.
    """
    return Dataset.build(
        load_pairs(pairs_path),
        load_features(query_features_path),
        load_features(doc_features_path),
    )


def write_dataset(dataset: Dataset, pairs_path: str | Path, query_features_path: str | Path, doc_features_path: str | Path) -> None:
    write_pairs(dataset.pairs(), pairs_path)
    write_features(dataset.query_features, query_features_path)
    write_features(dataset.doc_features, doc_features_path)


def load_forget_spec(path: str | Path) -> ForgetSpec:
    return ForgetSpec.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def write_forget_spec(spec: ForgetSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(spec.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_substitute_map(path: str | Path) -> SubstituteMap:
    return SubstituteMap.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def write_substitute_map(subs: SubstituteMap, path: str | Path) -> None:
    Path(path).write_text(json.dumps(subs.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
