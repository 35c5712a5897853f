"""Parametric relevance scorers with exact gradients.

Two architectures are provided, both operating on entity-level feature
vectors in 64-bit floating point:

  * bi-encoder: two learned projection matrices; the score is the dot
    product of the projected query and document embeddings.
  * cross-mlp: query and document features are concatenated and passed
    through one tanh hidden layer; the score is a learned linear readout.

Scores are unbounded reals. Parameters are immutable; updates return new
instances, so a snapshot taken before unlearning stays frozen for free.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, ValidationError

CHECKPOINT_FORMAT_VERSION = 1


class ScorerKind(str, Enum):
    BIENCODER = "biencoder"
    CROSSMLP = "crossmlp"


@dataclass(frozen=True)
class ShapeMeta:
    """Layer sizes; embed_dim applies to the bi-encoder, hidden_dim to the cross-mlp."""

    d_feat: int
    embed_dim: int | None = None
    hidden_dim: int | None = None

    def weight_count(self, kind: ScorerKind) -> int:
        if kind is ScorerKind.BIENCODER:
            if self.embed_dim is None:
                raise ValidationError("bi-encoder shape needs embed_dim")
            return 2 * self.embed_dim * self.d_feat
        if self.hidden_dim is None:
            raise ValidationError("cross-mlp shape needs hidden_dim")
        return self.hidden_dim * (2 * self.d_feat) + 2 * self.hidden_dim


@dataclass(frozen=True)
class ScorerParams:
    """A scorer's full state: architecture tag, layer sizes, flat weight vector."""

    kind: ScorerKind
    shape: ShapeMeta
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        expected = self.shape.weight_count(self.kind)
        if w.ndim != 1 or w.shape[0] != expected:
            raise ValidationError(
                f"weight vector has length {w.shape}, expected ({expected},) for {self.kind.value}"
            )
        if not np.all(np.isfinite(w)):
            raise ValidationError("weight vector contains non-finite entries")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def with_weights(self, weights: np.ndarray) -> "ScorerParams":
        return replace(self, weights=weights)


# A trained model used as the fixed reference during unlearning. ScorerParams
# is already immutable, so the snapshot is the params object itself.
TeacherSnapshot = ScorerParams


def snapshot(params: ScorerParams) -> TeacherSnapshot:
    return params


def init_params(
    kind: ScorerKind,
    d_feat: int,
    seed: int,
    embed_dim: int = 8,
    hidden_dim: int = 16,
) -> ScorerParams:
    """Fresh parameters, each weight uniform on (-0.1, 0.1) under the seed."""
    shape = ShapeMeta(d_feat=d_feat, embed_dim=embed_dim, hidden_dim=hidden_dim)
    rng = np.random.default_rng(seed)
    weights = rng.uniform(-0.1, 0.1, size=shape.weight_count(kind))
    return ScorerParams(kind=kind, shape=shape, weights=weights)


def _biencoder_views(params: ScorerParams) -> tuple[np.ndarray, np.ndarray]:
    e, d = params.shape.embed_dim, params.shape.d_feat
    w = params.weights
    return w[: e * d].reshape(e, d), w[e * d :].reshape(e, d)


def _crossmlp_views(params: ScorerParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    h, d = params.shape.hidden_dim, params.shape.d_feat
    w = params.weights
    n_w = h * 2 * d
    return w[:n_w].reshape(h, 2 * d), w[n_w : n_w + h], w[n_w + h :]


def _check_dims(params: ScorerParams, q_feat: np.ndarray, d_feat_vec: np.ndarray) -> None:
    d = params.shape.d_feat
    if q_feat.shape != (d,) or d_feat_vec.shape != (d,):
        raise ValidationError(
            f"feature shapes {q_feat.shape}/{d_feat_vec.shape} do not match d_feat={d}"
        )


def score(params: ScorerParams, q_feat: np.ndarray, d_feat_vec: np.ndarray) -> float:
    """Relevance score for one query-document feature pair."""
    q_feat = np.asarray(q_feat, dtype=np.float64)
    d_feat_vec = np.asarray(d_feat_vec, dtype=np.float64)
    _check_dims(params, q_feat, d_feat_vec)
    if params.kind is ScorerKind.BIENCODER:
        e_q, e_d = _biencoder_views(params)
        value = float(np.dot(e_q @ q_feat, e_d @ d_feat_vec))
        layer = "projection dot product"
    else:
        w_mat, bias, readout = _crossmlp_views(params)
        hidden = np.tanh(w_mat @ np.concatenate([q_feat, d_feat_vec]) + bias)
        value = float(np.dot(readout, hidden))
        layer = "readout"
    if not np.isfinite(value):
        raise NumericError(f"non-finite score in {params.kind.value} {layer}")
    return value


def score_gradient(params: ScorerParams, q_feat: np.ndarray, d_feat_vec: np.ndarray) -> np.ndarray:
    """d(score)/d(weights), same length as the flat weight vector."""
    q_feat = np.asarray(q_feat, dtype=np.float64)
    d_feat_vec = np.asarray(d_feat_vec, dtype=np.float64)
    _check_dims(params, q_feat, d_feat_vec)
    if params.kind is ScorerKind.BIENCODER:
        e_q, e_d = _biencoder_views(params)
        q_emb = e_q @ q_feat
        d_emb = e_d @ d_feat_vec
        grad = np.concatenate([np.outer(d_emb, q_feat).ravel(), np.outer(q_emb, d_feat_vec).ravel()])
        layer = "projection"
    else:
        w_mat, bias, readout = _crossmlp_views(params)
        x = np.concatenate([q_feat, d_feat_vec])
        hidden = np.tanh(w_mat @ x + bias)
        dz = readout * (1.0 - hidden * hidden)
        grad = np.concatenate([np.outer(dz, x).ravel(), dz, hidden])
        layer = "hidden layer"
    if not np.all(np.isfinite(grad)):
        raise NumericError(f"non-finite gradient in {params.kind.value} {layer}")
    return grad


FeaturePair = tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class PairLoss:
    """A loss over the scores of a fixed list of feature pairs.

    fn maps the score vector to (loss value, d loss / d scores). Hinge
    terms use subgradient 0 at their kink, so inactive constraints stay
    silent. Every loss in this package is expressible this way.
    """

    pairs: tuple[FeaturePair, ...]
    fn: Callable[[np.ndarray], tuple[float, np.ndarray]]


def loss_value(params: ScorerParams, loss: PairLoss) -> float:
    scores = np.array([score(params, q, d) for q, d in loss.pairs])
    value, _ = loss.fn(scores)
    return float(value)


def grad(params: ScorerParams, loss: PairLoss) -> tuple[float, np.ndarray]:
    """Evaluate a pair loss and its exact gradient with respect to the weights."""
    scores = np.array([score(params, q, d) for q, d in loss.pairs])
    value, coeffs = loss.fn(scores)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape != scores.shape:
        raise ValidationError("loss fn returned a coefficient per-score vector of wrong length")
    total = np.zeros(params.size)
    for c, (q, d) in zip(coeffs, loss.pairs):
        if c != 0.0:
            total += c * score_gradient(params, q, d)
    return float(value), total


def sgd_step(params: ScorerParams, gradient: np.ndarray, lr: float) -> ScorerParams:
    """One plain gradient-descent update: w <- w - lr * gradient."""
    if lr <= 0:
        raise ValidationError(f"learning rate must be positive, got {lr}")
    gradient = np.asarray(gradient, dtype=np.float64)
    if gradient.shape != params.weights.shape:
        raise ValidationError("gradient length does not match weight vector")
    return params.with_weights(params.weights - lr * gradient)


# ---------------------------------------------------------------------------
# Checkpoints: JSON with a format-version field; floats round-trip exactly.
# ---------------------------------------------------------------------------

def save_checkpoint(params: ScorerParams, path: str | Path) -> None:
    shape: dict[str, int] = {"d_feat": params.shape.d_feat}
    if params.kind is ScorerKind.BIENCODER:
        shape["embed_dim"] = int(params.shape.embed_dim)
    else:
        shape["hidden_dim"] = int(params.shape.hidden_dim)
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": params.kind.value,
        "shape": shape,
        "weights": [float(v) for v in params.weights],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> ScorerParams:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"checkpoint {path} is not valid JSON: {exc}") from None
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValidationError(f"checkpoint {path} has unsupported format_version {version}")
    try:
        kind = ScorerKind(payload["kind"])
    except (KeyError, ValueError):
        raise ValidationError(f"checkpoint {path} has missing or unknown scorer kind") from None
    shape_obj = payload.get("shape", {})
    shape = ShapeMeta(
        d_feat=int(shape_obj["d_feat"]),
        embed_dim=int(shape_obj["embed_dim"]) if "embed_dim" in shape_obj else None,
        hidden_dim=int(shape_obj["hidden_dim"]) if "hidden_dim" in shape_obj else None,
    )
    weights = np.asarray(payload.get("weights", []), dtype=np.float64)
    return ScorerParams(kind=kind, shape=shape, weights=weights)


def scores_for(
    params: ScorerParams,
    q_feat: np.ndarray,
    doc_feats: Sequence[np.ndarray],
) -> list[float]:
    """Score one query against several documents (plain per-pair loop)."""
    return [score(params, q_feat, df) for df in doc_feats]
