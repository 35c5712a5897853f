"""Evaluation suite: ranking tables and the forget/correct/retain metrics.

All metrics are rank-based, so they are invariant under any strictly
monotone rescaling of a query's scores. Ties are broken by ascending
document id to keep every number reproducible.

Each metric accepts either ScorerParams or any callable(query_id, doc_id)
-> float, which the tests use to feed hand-built score tables.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

from .data import (
    CorrectedDataset,
    Dataset,
    DocId,
    ForgetSet,
    ForgetSpec,
    QueryId,
    SubstituteMap,
    apply_substitutes,
    build_forget_set,
)
from .errors import ValidationError
from .scorers import ScorerParams, score

ScoreFn = Callable[[QueryId, DocId], float]
Model = Union[ScorerParams, ScoreFn]


def as_score_fn(model: Model, dataset: Dataset) -> ScoreFn:
    """Adapt a model to an id-based scoring function over one corpus."""
    if isinstance(model, ScorerParams):
        def fn(qid: QueryId, did: DocId) -> float:
            return score(model, dataset.query_features[qid], dataset.doc_features[did])

        return fn
    return model


@dataclass(frozen=True)
class RankTable:
    """Documents of one query ordered by descending score (ties: ascending id)."""

    ordered: tuple[tuple[DocId, float], ...]
    rank_of: Mapping[DocId, int]


def rank_documents(model: Model, dataset: Dataset, qid: QueryId, docs: Iterable[DocId]) -> RankTable:
    doc_list = sorted(set(docs))
    if not doc_list:
        raise ValidationError(f"cannot rank an empty document set for query {qid}")
    fn = as_score_fn(model, dataset)
    scored = [(d, fn(qid, d)) for d in doc_list]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return RankTable(
        ordered=tuple(scored),
        rank_of={d: i + 1 for i, (d, _) in enumerate(scored)},
    )


def p_forget(model: Model, forget: ForgetSet, dataset: Dataset) -> float:
    """Mean reciprocal rank of the best-ranked forgotten document per affected
    query, ranked among the query's original documents. Lower is better."""
    if not forget.forget_queries_index:
        raise ValidationError("p_forget needs a non-empty forget set")
    total = 0.0
    for q in sorted(forget.forget_queries_index):
        table = rank_documents(model, dataset, q, dataset.docs(q))
        best = min(table.rank_of[d] for d in forget.per_query[q])
        total += 1.0 / best
    return total / len(forget.forget_queries_index)


def p_correct(
    model: Model,
    teacher: Model,
    forget: ForgetSet,
    subs: SubstituteMap,
    dataset: Dataset,
    corrected: CorrectedDataset | None = None,
) -> float:
    """One minus the mean squared gap between the teacher's reciprocal rank of
    each forgotten document and the student's reciprocal rank of its
    substitute (teacher ranks over the original lists, student over the
    corrected ones). Higher is better; 1 is perfect correction."""
    if not forget.pairs:
        raise ValidationError("p_correct needs a non-empty forget set")
    if corrected is None:
        corrected = apply_substitutes(dataset, forget, subs)
    total = 0.0
    teacher_tables: dict[QueryId, RankTable] = {}
    student_tables: dict[QueryId, RankTable] = {}
    for q, d, _ in sorted(forget.pairs):
        if q not in teacher_tables:
            teacher_tables[q] = rank_documents(teacher, dataset, q, dataset.docs(q))
            student_tables[q] = rank_documents(model, dataset, q, corrected.docs_star(q))
        d_sub = subs.substitute_for(q, d)
        gap = 1.0 / teacher_tables[q].rank_of[d] - 1.0 / student_tables[q].rank_of[d_sub]
        total += gap * gap
    return 1.0 - total / len(forget.pairs)


def _best_positive_mrr(model: Model, dataset: Dataset) -> float:
    total = 0.0
    for q in dataset.queries:
        positives = dataset.positives(q)
        if not positives:
            raise ValidationError(f"query {q} has no positive document")
        table = rank_documents(model, dataset, q, dataset.docs(q))
        total += 1.0 / min(table.rank_of[d] for d in positives)
    return total / len(dataset.queries)


def p_retain(model: Model, dataset: Dataset) -> float:
    """MRR of the best-ranked positive per query over the given corpus."""
    return _best_positive_mrr(model, dataset)


def p_test(model: Model, testset: Dataset) -> float:
    """Same as p_retain but on the held-out split."""
    return _best_positive_mrr(model, testset)


def p_delta_retain(
    model: Model,
    teacher: Model,
    dataset: Dataset,
    corrected: CorrectedDataset,
    forget: ForgetSet,
) -> float:
    """Mean squared per-document reciprocal-rank shift on surviving positives:
    the student ranks over the corrected lists, the teacher over the original
    ones. Queries with no surviving positive are skipped and excluded from
    the denominator. Zero means ranks are undisturbed."""
    per_query_means = []
    for q in dataset.queries:
        forgotten = forget.per_query.get(q, frozenset())
        survivors = [d for d in dataset.positives(q) if d not in forgotten]
        if not survivors:
            continue
        teacher_table = rank_documents(teacher, dataset, q, dataset.docs(q))
        student_table = rank_documents(model, dataset, q, corrected.docs_star(q))
        acc = 0.0
        for d in survivors:
            gap = 1.0 / student_table.rank_of[d] - 1.0 / teacher_table.rank_of[d]
            acc += gap * gap
        per_query_means.append(acc / len(survivors))
    if not per_query_means:
        raise ValidationError("p_delta_retain: no query has a surviving positive")
    return sum(per_query_means) / len(per_query_means)


def normalised_unlearn_time(
    unlearn_epoch_seconds: Sequence[float],
    train_epoch_seconds: Sequence[float],
    n_unlearn_epochs: int,
) -> float:
    """Total unlearning cost in units of one base-training epoch:
    (mean unlearn epoch / mean train epoch) * number of unlearn epochs."""
    if not unlearn_epoch_seconds or not train_epoch_seconds:
        raise ValidationError("epoch duration lists must be non-empty")
    if min(unlearn_epoch_seconds) <= 0 or min(train_epoch_seconds) <= 0:
        raise ValidationError("epoch durations must be positive")
    train_mean = float(np.mean(train_epoch_seconds))
    if train_mean == 0.0:
        raise ValidationError("mean training epoch duration is zero")
    return float(np.mean(unlearn_epoch_seconds)) / train_mean * n_unlearn_epochs


REPORT_COLUMNS = (
    "p_forget_query",
    "p_forget_doc",
    "p_correct_query",
    "p_correct_doc",
    "p_retain",
    "p_test",
    "p_delta_retain",
    "unlearn_time_normalised",
)


@dataclass(frozen=True)
class MetricsReport:
    """One evaluation of a checkpoint. Fields are None when undefined for the
    run at hand (no removal of that type, or no timing data)."""

    p_forget_query: float | None
    p_forget_doc: float | None
    p_correct_query: float | None
    p_correct_doc: float | None
    p_retain: float
    p_test: float
    p_delta_retain: float
    unlearn_time_normalised: float | None

    def to_json_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        writer.writerow(
            ["" if getattr(self, c) is None else repr(getattr(self, c)) for c in REPORT_COLUMNS]
        )
        return buf.getvalue()

    def write(self, json_path: str | Path, csv_path: str | Path) -> None:
        Path(json_path).write_text(
            json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        Path(csv_path).write_text(self.to_csv_text(), encoding="utf-8")


def build_report(
    model: Model,
    teacher: Model,
    dataset: Dataset,
    testset: Dataset,
    spec: ForgetSpec,
    forget: ForgetSet,
    subs: SubstituteMap,
    corrected: CorrectedDataset,
    unlearn_epoch_seconds: Sequence[float] | None = None,
    train_epoch_seconds: Sequence[float] | None = None,
    include_negative_doc_removal: bool = False,
) -> MetricsReport:
    """Assemble the full report for one checkpoint.

    Forgetting and correction are reported separately for the query-removal
    and document-removal parts of the request (a pair selected by both
    counts toward both). Retention is measured on the corrected corpus, so
    it credits substitutes that took over the vacated positions; the
    teacher's own retention should be read off the original corpus instead.
    """
    query_part = (
        build_forget_set(dataset, ForgetSpec.make(spec.forget_queries, ()), include_negative_doc_removal)
        if spec.forget_queries
        else None
    )
    doc_part = (
        build_forget_set(dataset, ForgetSpec.make((), spec.forget_docs), include_negative_doc_removal)
        if spec.forget_docs
        else None
    )

    def forget_metric(part: ForgetSet | None) -> float | None:
        if part is None or not part.pairs:
            return None
        return p_forget(model, part, dataset)

    def correct_metric(part: ForgetSet | None) -> float | None:
        if part is None or not part.pairs:
            return None
        part_subs = SubstituteMap({key: subs.subs[key] for key in ((q, d) for q, d, _ in part.pairs)})
        return p_correct(model, teacher, part, part_subs, dataset, corrected)

    timing = None
    if unlearn_epoch_seconds and train_epoch_seconds:
        timing = normalised_unlearn_time(
            unlearn_epoch_seconds, train_epoch_seconds, len(unlearn_epoch_seconds)
        )
    return MetricsReport(
        p_forget_query=forget_metric(query_part),
        p_forget_doc=forget_metric(doc_part),
        p_correct_query=correct_metric(query_part),
        p_correct_doc=correct_metric(doc_part),
        p_retain=p_retain(model, corrected.as_dataset()),
        p_test=p_test(model, testset),
        p_delta_retain=p_delta_retain(model, teacher, dataset, corrected, forget),
        unlearn_time_normalised=timing,
    )
