"""Independent brute-force implementations used to cross-check the library.

Everything here avoids the library's ranking code on purpose: ranks come
from pairwise comparisons instead of sorting, and each metric is a direct
transcription of its formula over explicit loops.
"""

from __future__ import annotations

from unrank.data import CorrectedDataset, Dataset, ForgetSet, RelevanceLabel, SubstituteMap
from unrank.metrics import Model, as_score_fn


def brute_rank(scores: dict[str, float], doc: str) -> int:
    """1-based rank of doc among `scores` by descending score, ties broken by
    ascending id, computed by counting rather than sorting."""
    better = sum(1 for d, s in scores.items() if s > scores[doc])
    tied_before = sum(1 for d, s in scores.items() if s == scores[doc] and d < doc)
    return 1 + better + tied_before


def _scores(model: Model, dataset: Dataset, q: str, docs) -> dict[str, float]:
    fn = as_score_fn(model, dataset)
    return {d: fn(q, d) for d in docs}


def oracle_p_forget(model: Model, forget: ForgetSet, dataset: Dataset) -> float:
    total = 0.0
    queries = sorted(forget.forget_queries_index)
    for q in queries:
        scores = _scores(model, dataset, q, dataset.docs(q))
        best = min(brute_rank(scores, d) for d in forget.per_query[q])
        total += 1.0 / best
    return total / len(queries)


def oracle_p_correct(
    model: Model,
    teacher: Model,
    forget: ForgetSet,
    subs: SubstituteMap,
    dataset: Dataset,
    corrected: CorrectedDataset,
) -> float:
    total = 0.0
    for q, d, _ in sorted(forget.pairs):
        teacher_scores = _scores(teacher, dataset, q, dataset.docs(q))
        student_scores = _scores(model, dataset, q, corrected.docs_star(q))
        d_sub = subs.subs[(q, d)]
        gap = 1.0 / brute_rank(teacher_scores, d) - 1.0 / brute_rank(student_scores, d_sub)
        total += gap * gap
    return 1.0 - total / len(forget.pairs)


def oracle_best_positive_mrr(model: Model, dataset: Dataset) -> float:
    total = 0.0
    for q in dataset.queries:
        scores = _scores(model, dataset, q, dataset.docs(q))
        positives = [d for d, lab in dataset.docs_of[q] if lab is RelevanceLabel.POSITIVE]
        total += 1.0 / min(brute_rank(scores, d) for d in positives)
    return total / len(dataset.queries)


def oracle_p_delta_retain(
    model: Model,
    teacher: Model,
    dataset: Dataset,
    corrected: CorrectedDataset,
    forget: ForgetSet,
) -> float:
    means = []
    for q in dataset.queries:
        gone = forget.per_query.get(q, frozenset())
        survivors = [
            d for d, lab in dataset.docs_of[q]
            if lab is RelevanceLabel.POSITIVE and d not in gone
        ]
        if not survivors:
            continue
        teacher_scores = _scores(teacher, dataset, q, dataset.docs(q))
        student_scores = _scores(model, dataset, q, corrected.docs_star(q))
        acc = 0.0
        for d in survivors:
            gap = 1.0 / brute_rank(student_scores, d) - 1.0 / brute_rank(teacher_scores, d)
            acc += gap * gap
        means.append(acc / len(survivors))
    return sum(means) / len(means)
