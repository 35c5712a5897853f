"""Corrective unranking distillation (CuRD).

The trained model acts as a frozen teacher; the student starts as a copy
and is nudged by one-sided hinge losses until (a) each forgotten pair
scores no higher than a quantile of the teacher's scores over a fixed
negative sample for that query, (b) each substitute scores at least the
teacher's score for the pair it replaces, and (c) retained positives and
the sampled negatives stay pinned to the teacher's scores from the side
that matters for ranking.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .data import Dataset, DocId, ForgetSet, QueryId, RelevanceLabel, SubstituteMap
from .errors import NumericError, ValidationError
from .scorers import PairLoss, ScorerParams, TeacherSnapshot, grad, score, sgd_step


@dataclass(frozen=True)
class UnlearnConfig:
    """Knobs for one unlearning run.

    k is the per-query negative sample size; gamma the quantile level of
    the forget target. lambda_fc and lambda_r weight the forget/correct
    and retain terms (both default to 1). If early_stop_loss is set, the
    run ends once the mean per-item loss of an epoch falls below it.
    """

    k: int = 5
    gamma: float = 0.0
    lambda_fc: float = 1.0
    lambda_r: float = 1.0
    epochs: int = 15
    lr: float = 0.05
    seed: int = 0
    early_stop_loss: float | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValidationError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.lambda_fc < 0 or self.lambda_r < 0:
            raise ValidationError("loss weights must be non-negative")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr <= 0:
            raise ValidationError(f"lr must be positive, got {self.lr}")


@dataclass(frozen=True)
class NegativeSample:
    """Per-query negative documents, drawn once and held fixed for a run."""

    per_query: Mapping[QueryId, tuple[DocId, ...]]


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    fc_loss: float | None
    retain_loss: float | None
    wall_seconds: float


@dataclass(frozen=True)
class UnlearnResult:
    params: ScorerParams
    epochs: tuple[EpochLog, ...]
    method: str

    @property
    def epoch_seconds(self) -> tuple[float, ...]:
        return tuple(row.wall_seconds for row in self.epochs)


def sample_negatives(dataset: Dataset, k: int, seed: int) -> NegativeSample:
    """Draw k negatives per query: without replacement when the query has at
    least k negatives, with replacement otherwise."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    rng = np.random.default_rng(seed)
    per_query: dict[QueryId, tuple[DocId, ...]] = {}
    for q in dataset.queries:
        negs = dataset.negatives(q)
        if not negs:
            raise ValidationError(f"query {q} has no negative documents to sample")
        chosen = rng.choice(np.array(negs, dtype=object), size=k, replace=k > len(negs))
        per_query[q] = tuple(str(d) for d in chosen)
    return NegativeSample(per_query)


def quantile(scores: Sequence[float], gamma: float) -> float:
    """Linear-interpolation quantile: gamma=0 is the minimum, gamma=1 the maximum."""
    values = sorted(float(s) for s in scores)
    if not values:
        raise ValidationError("quantile of an empty score list")
    if not 0.0 <= gamma <= 1.0:
        raise ValidationError(f"gamma must lie in [0, 1], got {gamma}")
    if len(values) == 1:
        return values[0]
    pos = gamma * (len(values) - 1)
    lo = int(np.floor(pos))
    hi = int(np.ceil(pos))
    if lo == hi:
        return values[lo]
    frac = pos - lo
    return values[lo] * (1.0 - frac) + values[hi] * frac


def hinge(a: float, b: float) -> float:
    """One-sided penalty max(0, a - b)."""
    return max(0.0, a - b)


def fc_loss(
    params: ScorerParams,
    teacher: TeacherSnapshot,
    dataset: Dataset,
    pair: tuple[QueryId, DocId],
    sub: DocId,
    qtl: float,
) -> float:
    """Forget-and-correct loss for one forgotten pair.

    First term pushes the student's score for the pair down to the quantile
    target; second term lifts the substitute up to the teacher's original
    score. Overshoot in either direction is free.
    """
    q, d = pair
    qf = dataset.query_features[q]
    s_pair = score(params, qf, dataset.doc_features[d])
    s_sub = score(params, qf, dataset.doc_features[sub])
    t_pair = score(teacher, qf, dataset.doc_features[d])
    return hinge(s_pair, qtl) + hinge(t_pair, s_sub)


def retain_loss(
    params: ScorerParams,
    teacher: TeacherSnapshot,
    dataset: Dataset,
    q: QueryId,
    d_pos: DocId,
    negs: Sequence[DocId],
) -> float:
    """Retention loss for one surviving positive and the query's negative sample.

    Penalises the student scoring the positive below the teacher, and any
    sampled negative above the teacher.
    """
    if not negs:
        raise ValidationError(f"retain loss for query {q} needs a non-empty negative sample")
    qf = dataset.query_features[q]
    pos_feat = dataset.doc_features[d_pos]
    total = hinge(score(teacher, qf, pos_feat), score(params, qf, pos_feat))
    for d_neg in negs:
        nf = dataset.doc_features[d_neg]
        total += hinge(score(params, qf, nf), score(teacher, qf, nf)) / len(negs)
    return total


@dataclass(frozen=True)
class _ForgetItem:
    q: QueryId
    d: DocId
    sub: DocId
    qtl: float
    teacher_score: float


@dataclass(frozen=True)
class _RetainItem:
    q: QueryId
    d_pos: DocId
    negs: tuple[DocId, ...]


def _forget_pair_loss(dataset: Dataset, item: _ForgetItem, lam: float) -> PairLoss:
    qf = dataset.query_features[item.q]
    pairs = ((qf, dataset.doc_features[item.d]), (qf, dataset.doc_features[item.sub]))
    qtl, t_pair = item.qtl, item.teacher_score

    def fn(scores: np.ndarray) -> tuple[float, np.ndarray]:
        down = hinge(float(scores[0]), qtl)
        up = hinge(t_pair, float(scores[1]))
        coeffs = np.array(
            [lam if scores[0] > qtl else 0.0, -lam if t_pair > scores[1] else 0.0]
        )
        return lam * (down + up), coeffs

    return PairLoss(pairs=pairs, fn=fn)


def _retain_pair_loss(
    dataset: Dataset,
    teacher_scores: Mapping[tuple[QueryId, DocId], float],
    item: _RetainItem,
    lam: float,
) -> PairLoss:
    qf = dataset.query_features[item.q]
    pairs = tuple([(qf, dataset.doc_features[item.d_pos])] + [(qf, dataset.doc_features[n]) for n in item.negs])
    t_pos = teacher_scores[(item.q, item.d_pos)]
    t_negs = np.array([teacher_scores[(item.q, n)] for n in item.negs])
    k = len(item.negs)

    def fn(scores: np.ndarray) -> tuple[float, np.ndarray]:
        value = hinge(t_pos, float(scores[0]))
        coeffs = np.zeros(len(scores))
        coeffs[0] = -lam if t_pos > scores[0] else 0.0
        for i in range(k):
            value += hinge(float(scores[1 + i]), float(t_negs[i])) / k
            if scores[1 + i] > t_negs[i]:
                coeffs[1 + i] = lam / k
        return lam * value, coeffs

    return PairLoss(pairs=pairs, fn=fn)


def _teacher_score_cache(
    teacher: TeacherSnapshot,
    dataset: Dataset,
    keys: set[tuple[QueryId, DocId]],
) -> dict[tuple[QueryId, DocId], float]:
    cache: dict[tuple[QueryId, DocId], float] = {}
    for q, d in keys:
        cache[(q, d)] = score(teacher, dataset.query_features[q], dataset.doc_features[d])
    return cache


def quantile_targets(
    teacher: TeacherSnapshot,
    dataset: Dataset,
    negatives: NegativeSample,
    queries: Sequence[QueryId],
    gamma: float,
) -> dict[QueryId, float]:
    """Per-query forget target: the gamma-quantile of the teacher's scores
    over that query's fixed negative sample. Teacher-only, so independent of
    anything the student does later."""
    targets: dict[QueryId, float] = {}
    for q in sorted(queries):
        qf = dataset.query_features[q]
        sample_scores = [score(teacher, qf, dataset.doc_features[n]) for n in negatives.per_query[q]]
        targets[q] = quantile(sample_scores, gamma)
    return targets


def curd_unlearn(
    teacher: TeacherSnapshot,
    dataset: Dataset,
    forget: ForgetSet,
    subs: SubstituteMap,
    cfg: UnlearnConfig,
    on_epoch: Callable[[int, ScorerParams], None] | None = None,
) -> UnlearnResult:
    """Run the full distillation loop and return the corrected student.

    The work list holds one item per forgotten pair and one per retained
    positive pair; it is reshuffled each epoch with a seeded permutation,
    and one plain SGD step is taken per item. Deterministic under the seed.
    """
    negatives = sample_negatives(dataset, cfg.k, cfg.seed)
    forget_keys = {(q, d) for q, d, _ in forget.pairs}
    for q, d in sorted(forget_keys):
        subs.substitute_for(q, d)  # raises when a forget pair is uncovered

    qtl_by_query = quantile_targets(teacher, dataset, negatives, list(forget.forget_queries_index), cfg.gamma)

    needed: set[tuple[QueryId, DocId]] = set(forget_keys)
    items: list[_ForgetItem | _RetainItem] = []
    for q in dataset.queries:
        negs = negatives.per_query[q]
        for d, lab in dataset.docs_of[q]:
            if (q, d) in forget_keys:
                items.append(
                    _ForgetItem(q=q, d=d, sub=subs.substitute_for(q, d), qtl=qtl_by_query[q], teacher_score=0.0)
                )
            elif lab is RelevanceLabel.POSITIVE:
                items.append(_RetainItem(q=q, d_pos=d, negs=negs))
                needed.add((q, d))
                needed.update((q, n) for n in negs)

    teacher_scores = _teacher_score_cache(teacher, dataset, needed)
    items = [
        it if isinstance(it, _RetainItem) else _ForgetItem(it.q, it.d, it.sub, it.qtl, teacher_scores[(it.q, it.d)])
        for it in items
    ]

    params = teacher
    rng = np.random.default_rng(cfg.seed)
    logs: list[EpochLog] = []
    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(len(items))
        fc_sum = 0.0
        retain_sum = 0.0
        for idx in order:
            item = items[idx]
            if isinstance(item, _ForgetItem):
                loss = _forget_pair_loss(dataset, item, cfg.lambda_fc)
            else:
                loss = _retain_pair_loss(dataset, teacher_scores, item, cfg.lambda_r)
            try:
                value, gradient = grad(params, loss)
            except NumericError as exc:
                raise NumericError(f"epoch {epoch}, item {idx} ({item.q}): {exc}") from exc
            if isinstance(item, _ForgetItem):
                fc_sum += value
            else:
                retain_sum += value
            if np.any(gradient):
                params = sgd_step(params, gradient, cfg.lr)
        logs.append(
            EpochLog(
                epoch=epoch,
                fc_loss=fc_sum,
                retain_loss=retain_sum,
                wall_seconds=time.perf_counter() - started,
            )
        )
        if on_epoch is not None:
            on_epoch(epoch, params)
        if cfg.early_stop_loss is not None and items:
            if (fc_sum + retain_sum) / len(items) < cfg.early_stop_loss:
                break
    return UnlearnResult(params=params, epochs=tuple(logs), method="curd")
