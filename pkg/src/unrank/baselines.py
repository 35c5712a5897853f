"""Comparison unlearners sharing the scorer/trainer infrastructure.

retrain      -- fresh model fitted to the corrected corpus only.
cf           -- continue training the teacher on the corrected corpus and
                let catastrophic forgetting erode the removed pairs.
amnesiac     -- swap forgotten documents and sampled negatives at score
                level, then push substitutes above those negatives.
neggrad      -- gradient ascent on the base pairwise loss over the forget
                pairs, then fine-tune on the corrected corpus.
badt         -- distil from a randomly initialised "bad" teacher on the
                forget pairs and from the real teacher on the corrected
                corpus, by squared error.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .curd import EpochLog, UnlearnResult
from .data import CorrectedDataset, Dataset, ForgetSet, QueryId, SubstituteMap, apply_substitutes
from .errors import NumericError, ValidationError
from .scorers import (
    PairLoss,
    ScorerKind,
    ScorerParams,
    TeacherSnapshot,
    grad,
    init_params,
    score,
    score_gradient,
    sgd_step,
)
from .training import TrainConfig, TrainResult, train


class BaselineMethod(str, Enum):
    RETRAIN = "retrain"
    CF = "cf"
    AMNESIAC = "amnesiac"
    NEGGRAD = "neggrad"
    BADT = "badt"


@dataclass(frozen=True)
class BaselineConfig:
    method: BaselineMethod = BaselineMethod.RETRAIN
    epochs: int = 40
    lr: float = 0.05
    seed: int = 0
    amnesiac_negatives: int = 10
    neggrad_ascent_epochs: int = 5
    neggrad_ascent_lr: float | None = None  # None: reuse lr; 0 disables the ascent phase
    margin: float = 1.0
    negatives_per_positive: int = 4
    patience: int = 5
    min_delta: float = 1e-4

    def __post_init__(self):
        # epochs = 0 is allowed so that "continue training for zero epochs"
        # degenerates to the identity, which the tests rely on.
        if self.epochs < 0:
            raise ValidationError(f"epochs must be >= 0, got {self.epochs}")
        if self.lr <= 0:
            raise ValidationError(f"lr must be positive, got {self.lr}")
        if self.amnesiac_negatives < 1:
            raise ValidationError("amnesiac_negatives must be >= 1")
        if self.neggrad_ascent_epochs < 0:
            raise ValidationError("neggrad_ascent_epochs must be >= 0")

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            margin=self.margin,
            lr=self.lr,
            epochs=self.epochs,
            negatives_per_positive=self.negatives_per_positive,
            seed=self.seed,
            patience=self.patience,
            min_delta=self.min_delta,
        )


def _train_epoch_logs(result: TrainResult, start_epoch: int = 1) -> list[EpochLog]:
    return [
        EpochLog(epoch=start_epoch + i, fc_loss=None, retain_loss=row.loss, wall_seconds=sec)
        for i, (row, sec) in enumerate(zip(result.log, result.epoch_seconds))
    ]


def retrain(
    dataset_star: CorrectedDataset,
    scorer_kind: ScorerKind,
    cfg: BaselineConfig,
    embed_dim: int = 8,
    hidden_dim: int = 16,
) -> UnlearnResult:
    """Train from scratch on the corrected corpus."""
    result = train(
        dataset_star.as_dataset(), scorer_kind, cfg.train_config(),
        embed_dim=embed_dim, hidden_dim=hidden_dim,
    )
    return UnlearnResult(params=result.params, epochs=tuple(_train_epoch_logs(result)), method="retrain")


def catastrophic_forgetting(
    teacher: TeacherSnapshot,
    dataset_star: CorrectedDataset,
    cfg: BaselineConfig,
) -> UnlearnResult:
    """Continue training the teacher on the corrected corpus only."""
    result = train(dataset_star.as_dataset(), teacher.kind, cfg.train_config(), init=teacher)
    return UnlearnResult(params=result.params, epochs=tuple(_train_epoch_logs(result)), method="cf")


def _sample_amnesiac_negatives(
    dataset: Dataset, forget: ForgetSet, count: int, seed: int
) -> dict[QueryId, tuple[str, ...]]:
    rng = np.random.default_rng(seed)
    out: dict[QueryId, tuple[str, ...]] = {}
    for q in sorted(forget.forget_queries_index):
        negs = dataset.negatives(q)
        if not negs:
            raise ValidationError(f"query {q} has no negatives for the amnesiac swap")
        m = min(count, len(negs))
        chosen = rng.choice(np.array(negs, dtype=object), size=m, replace=False)
        out[q] = tuple(str(d) for d in chosen)
    return out


def amnesiac(
    teacher: TeacherSnapshot,
    dataset: Dataset,
    forget: ForgetSet,
    subs: SubstituteMap,
    cfg: BaselineConfig,
) -> UnlearnResult:
    """Score-level ranking swap, then substitute promotion.

    Phase 1 drives each forgotten pair below the teacher's scores for a
    sample of the query's negatives while driving those negatives above the
    pair's old score. Phase 2 pushes each substitute a margin above the same
    sampled negatives. Each phase runs for cfg.epochs epochs.
    """
    if not forget.pairs:
        return UnlearnResult(params=teacher, epochs=(), method="amnesiac")
    sampled = _sample_amnesiac_negatives(dataset, forget, cfg.amnesiac_negatives, cfg.seed)

    def teacher_score(q: QueryId, d: str) -> float:
        return score(teacher, dataset.query_features[q], dataset.doc_features[d])

    swap_losses: list[PairLoss] = []
    promote_losses: list[PairLoss] = []
    for q, d, _ in sorted(forget.pairs):
        qf = dataset.query_features[q]
        negs = sampled[q]
        m = len(negs)
        t_x = teacher_score(q, d)
        t_negs = np.array([teacher_score(q, n) for n in negs])
        pairs_swap = tuple([(qf, dataset.doc_features[d])] + [(qf, dataset.doc_features[n]) for n in negs])

        def swap_fn(scores: np.ndarray, t_x=t_x, t_negs=t_negs, m=m) -> tuple[float, np.ndarray]:
            coeffs = np.zeros(len(scores))
            value = 0.0
            for i in range(m):
                if scores[0] > t_negs[i]:
                    value += (scores[0] - t_negs[i]) / m
                    coeffs[0] += 1.0 / m
                if t_x > scores[1 + i]:
                    value += (t_x - scores[1 + i]) / m
                    coeffs[1 + i] -= 1.0 / m
            return float(value), coeffs

        swap_losses.append(PairLoss(pairs=pairs_swap, fn=swap_fn))

        d_sub = subs.substitute_for(q, d)
        pairs_promote = tuple([(qf, dataset.doc_features[d_sub])] + [(qf, dataset.doc_features[n]) for n in negs])

        def promote_fn(scores: np.ndarray, m=m, margin=cfg.margin) -> tuple[float, np.ndarray]:
            coeffs = np.zeros(len(scores))
            value = 0.0
            for i in range(m):
                gap = margin - scores[0] + scores[1 + i]
                if gap > 0:
                    value += gap
                    coeffs[0] -= 1.0
                    coeffs[1 + i] += 1.0
            return float(value), coeffs

        promote_losses.append(PairLoss(pairs=pairs_promote, fn=promote_fn))

    params = teacher
    logs: list[EpochLog] = []
    rng = np.random.default_rng(cfg.seed)
    epoch_no = 0
    for phase, losses in (("swap", swap_losses), ("promote", promote_losses)):
        for _ in range(cfg.epochs):
            epoch_no += 1
            started = time.perf_counter()
            total = 0.0
            for idx in rng.permutation(len(losses)):
                value, g = grad(params, losses[idx])
                total += value
                if np.any(g):
                    params = sgd_step(params, g, cfg.lr)
            logs.append(
                EpochLog(
                    epoch=epoch_no,
                    fc_loss=total if phase == "swap" else None,
                    retain_loss=total if phase == "promote" else None,
                    wall_seconds=time.perf_counter() - started,
                )
            )
    return UnlearnResult(params=params, epochs=tuple(logs), method="amnesiac")


def neggrad(
    teacher: TeacherSnapshot,
    dataset: Dataset,
    forget: ForgetSet,
    subs: SubstituteMap,
    cfg: BaselineConfig,
) -> UnlearnResult:
    """Gradient ascent on the forget pairs, then fine-tune on the corrected corpus.

    The ascent phase works on a single fixed batch: one margin-loss triple
    per forgotten pair with negatives sampled once, accumulated in a fixed
    order, one step per epoch in the ascent direction.
    """
    rng = np.random.default_rng(cfg.seed)
    triples: list[tuple[QueryId, str, str]] = []
    for q, d, _ in sorted(forget.pairs):
        negs = dataset.negatives(q)
        n = min(cfg.negatives_per_positive, len(negs))
        chosen = rng.choice(np.array(negs, dtype=object), size=n, replace=False)
        triples.extend((q, d, str(d_neg)) for d_neg in chosen)

    params = teacher
    logs: list[EpochLog] = []
    ascent_lr = cfg.lr if cfg.neggrad_ascent_lr is None else cfg.neggrad_ascent_lr
    for epoch in range(1, cfg.neggrad_ascent_epochs + 1):
        started = time.perf_counter()
        total = 0.0
        batch_grad = np.zeros(params.size)
        for q, d_pos, d_neg in triples:
            qf = dataset.query_features[q]
            pos_feat = dataset.doc_features[d_pos]
            neg_feat = dataset.doc_features[d_neg]
            item = cfg.margin - score(params, qf, pos_feat) + score(params, qf, neg_feat)
            if item > 0:
                total += item
                batch_grad += score_gradient(params, qf, neg_feat) - score_gradient(params, qf, pos_feat)
        if not np.all(np.isfinite(batch_grad)):
            raise NumericError(f"neggrad ascent diverged at epoch {epoch}")
        if ascent_lr > 0 and np.any(batch_grad):
            params = sgd_step(params, -batch_grad, ascent_lr)  # negated gradient: ascent
        if not np.all(np.isfinite(params.weights)):
            raise NumericError(f"neggrad ascent diverged at epoch {epoch}")
        logs.append(EpochLog(epoch=epoch, fc_loss=total, retain_loss=None, wall_seconds=time.perf_counter() - started))

    corrected = apply_substitutes(dataset, forget, subs)
    finetune = train(corrected.as_dataset(), teacher.kind, cfg.train_config(), init=params)
    logs.extend(_train_epoch_logs(finetune, start_epoch=len(logs) + 1))
    return UnlearnResult(params=finetune.params, epochs=tuple(logs), method="neggrad")


def bad_teacher(
    teacher: TeacherSnapshot,
    dataset_star: CorrectedDataset,
    forget: ForgetSet,
    subs: SubstituteMap,
    cfg: BaselineConfig,
) -> UnlearnResult:
    """Distil the student toward a randomly initialised model on the forget
    pairs and toward the real teacher on the corrected corpus, matching
    scores by squared error from both sides."""
    base = dataset_star.base
    bad = init_params(
        teacher.kind,
        teacher.shape.d_feat,
        cfg.seed + 1,
        embed_dim=teacher.shape.embed_dim or 8,
        hidden_dim=teacher.shape.hidden_dim or 16,
    )

    items: list[tuple[QueryId, str, float, bool]] = []  # (q, d, target, is_forget)
    for q, d, _ in sorted(forget.pairs):
        target = score(bad, base.query_features[q], base.doc_features[d])
        items.append((q, d, target, True))
    for q in base.queries:
        for d, _ in dataset_star.docs_star_of[q]:
            target = score(teacher, base.query_features[q], base.doc_features[d])
            items.append((q, d, target, False))

    params = teacher
    rng = np.random.default_rng(cfg.seed)
    logs: list[EpochLog] = []
    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        forget_sum = 0.0
        star_sum = 0.0
        for idx in rng.permutation(len(items)):
            q, d, target, is_forget = items[idx]
            qf = base.query_features[q]
            df = base.doc_features[d]
            s = score(params, qf, df)
            residual = s - target
            if is_forget:
                forget_sum += residual * residual
            else:
                star_sum += residual * residual
            if residual != 0.0:
                params = sgd_step(params, 2.0 * residual * score_gradient(params, qf, df), cfg.lr)
        logs.append(
            EpochLog(epoch=epoch, fc_loss=forget_sum, retain_loss=star_sum, wall_seconds=time.perf_counter() - started)
        )
    return UnlearnResult(params=params, epochs=tuple(logs), method="badt")
