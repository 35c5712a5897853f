"""Pairwise margin training for the base (teacher) model.

For every positive judgement the loop samples a handful of the query's
negatives each epoch and applies per-item SGD on the margin hinge
max(0, margin - f(q, d+) + f(q, d-)). Convergence is declared when the
training-set MRR stops improving by min_delta for `patience` consecutive
epochs; patience <= 0 disables the check and runs the full budget.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import NumericError, ValidationError
from .metrics import p_retain
from .scorers import (
    ScorerKind,
    ScorerParams,
    init_params,
    score,
    score_gradient,
    sgd_step,
)


@dataclass(frozen=True)
class TrainConfig:
    margin: float = 1.0
    lr: float = 0.05
    epochs: int = 40
    negatives_per_positive: int = 4
    seed: int = 0
    patience: int = 5
    min_delta: float = 1e-4

    def __post_init__(self):
        if self.margin <= 0:
            raise ValidationError(f"margin must be positive, got {self.margin}")
        if self.lr <= 0:
            raise ValidationError(f"lr must be positive, got {self.lr}")
        if self.epochs < 0:
            raise ValidationError(f"epochs must be >= 0, got {self.epochs}")
        if self.negatives_per_positive < 1:
            raise ValidationError("negatives_per_positive must be >= 1")


@dataclass(frozen=True)
class TrainLogRow:
    epoch: int
    loss: float
    val_mrr: float


@dataclass(frozen=True)
class TrainResult:
    params: ScorerParams
    log: tuple[TrainLogRow, ...]
    epoch_seconds: tuple[float, ...]

    @property
    def epochs_run(self) -> int:
        return len(self.log)


def train(
    dataset: Dataset,
    scorer_kind: ScorerKind,
    cfg: TrainConfig,
    init: ScorerParams | None = None,
    embed_dim: int = 8,
    hidden_dim: int = 16,
) -> TrainResult:
    """Fit a scorer to the corpus; deterministic under the seed.

    Pass `init` to continue from existing parameters (used by the
    fine-tuning baselines); otherwise fresh seeded parameters are drawn.
    """
    params = init if init is not None else init_params(
        scorer_kind, dataset.d_feat, cfg.seed, embed_dim=embed_dim, hidden_dim=hidden_dim
    )
    if params.shape.d_feat != dataset.d_feat:
        raise ValidationError(
            f"scorer expects d_feat={params.shape.d_feat} but corpus has {dataset.d_feat}"
        )
    rng = np.random.default_rng(cfg.seed)
    log: list[TrainLogRow] = []
    epoch_seconds: list[float] = []
    best_mrr = -np.inf
    stale = 0
    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        triples: list[tuple[str, str, str]] = []
        for q in dataset.queries:
            negs = dataset.negatives(q)
            n = min(cfg.negatives_per_positive, len(negs))
            for d_pos in dataset.positives(q):
                chosen = rng.choice(np.array(negs, dtype=object), size=n, replace=False)
                triples.extend((q, d_pos, str(d_neg)) for d_neg in chosen)
        order = rng.permutation(len(triples))

        loss_sum = 0.0
        for idx in order:
            q, d_pos, d_neg = triples[idx]
            qf = dataset.query_features[q]
            pos_feat = dataset.doc_features[d_pos]
            neg_feat = dataset.doc_features[d_neg]
            item_loss = cfg.margin - score(params, qf, pos_feat) + score(params, qf, neg_feat)
            if not np.isfinite(item_loss):
                raise NumericError(f"non-finite loss at epoch {epoch}, item {idx} ({q})")
            if item_loss > 0.0:
                loss_sum += item_loss
                gradient = score_gradient(params, qf, neg_feat) - score_gradient(params, qf, pos_feat)
                params = sgd_step(params, gradient, cfg.lr)
        epoch_loss = loss_sum / len(triples) if triples else 0.0

        val_mrr = p_retain(params, dataset)
        log.append(TrainLogRow(epoch=epoch, loss=epoch_loss, val_mrr=val_mrr))
        epoch_seconds.append(time.perf_counter() - started)

        if cfg.patience > 0:
            if val_mrr > best_mrr + cfg.min_delta:
                best_mrr = val_mrr
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    break
    return TrainResult(params=params, log=tuple(log), epoch_seconds=tuple(epoch_seconds))
