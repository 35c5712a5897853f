"""Synthetic retrieval corpora with planted topic structure.

Each topic is an orthonormal centroid in feature space. A query and its
positive documents are noisy copies of the query's centroid; its negatives
are noisy copies of foreign centroids, so a dot-product scorer can separate
the labels and a trained teacher has headroom for the unlearning
experiments to measure. Forget sets are carved out of the positive pairs,
balanced between whole-query removal and per-document removal, and every
forgotten pair receives a random substitute from outside the query's own
forgotten and positive documents.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import (
    Dataset,
    ForgetSpec,
    RelevanceLabel,
    SubstituteMap,
    write_dataset,
    write_forget_spec,
    write_substitute_map,
)
from .errors import ValidationError


@dataclass(frozen=True)
class GenConfig:
    n_queries: int = 100
    docs_per_query: int = 20
    pos_per_query: int = 1
    neg_ratio: int = 19
    d_feat: int = 16
    n_topics: int = 8
    noise_sigma: float = 0.05
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.n_queries < 1:
            raise ValidationError("n_queries must be >= 1")
        if self.pos_per_query < 1:
            raise ValidationError("pos_per_query must be >= 1")
        if self.neg_ratio < 1:
            raise ValidationError("neg_ratio must be >= 1")
        expected = self.pos_per_query * (1 + self.neg_ratio)
        if self.docs_per_query != expected:
            raise ValidationError(
                f"docs_per_query={self.docs_per_query} inconsistent with "
                f"pos_per_query * (1 + neg_ratio) = {expected}"
            )
        if self.n_topics < 2:
            raise ValidationError("n_topics must be >= 2 (negatives need foreign topics)")
        if self.n_topics > self.d_feat:
            raise ValidationError("n_topics may not exceed d_feat (centroids are orthonormal)")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValidationError("test_fraction must lie strictly between 0 and 1")
        if self.noise_sigma < 0.0:
            raise ValidationError("noise_sigma must be >= 0")


@dataclass(frozen=True)
class ForgetProtocol:
    """How much to forget and how to split it between removal types.

    fraction counts pairs among all query-positive pairs; balance is the
    share routed through query removal (the rest through document removal).
    """

    fraction: float = 0.10
    balance: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValidationError("fraction must lie in [0, 1]")
        if not 0.0 <= self.balance <= 1.0:
            raise ValidationError("balance must lie in [0, 1]")


def _centroids(rng: np.random.Generator, d_feat: int, n_topics: int) -> np.ndarray:
    gaussian = rng.standard_normal((d_feat, d_feat))
    q, _ = np.linalg.qr(gaussian)
    return q[:, :n_topics].T  # one orthonormal centroid per row


def generate(cfg: GenConfig) -> tuple[Dataset, Dataset]:
    """Produce (train, test) corpora with disjoint query ids.

    The test split has round(n_queries * test_fraction) queries (at least
    one) built from the same centroids, so generalisation is measurable.
    """
    rng = np.random.default_rng(cfg.seed)
    centroids = _centroids(rng, cfg.d_feat, cfg.n_topics)
    n_test = max(1, round(cfg.n_queries * cfg.test_fraction))

    doc_counter = 0
    query_counter = 0

    def build_split(n_queries: int) -> Dataset:
        nonlocal doc_counter, query_counter
        pairs = []
        query_features: dict[str, np.ndarray] = {}
        doc_features: dict[str, np.ndarray] = {}
        for i in range(n_queries):
            topic = query_counter % cfg.n_topics
            qid = f"q{query_counter:05d}"
            query_counter += 1
            query_features[qid] = centroids[topic] + cfg.noise_sigma * rng.standard_normal(cfg.d_feat)
            for _ in range(cfg.pos_per_query):
                did = f"d{doc_counter:06d}"
                doc_counter += 1
                doc_features[did] = centroids[topic] + cfg.noise_sigma * rng.standard_normal(cfg.d_feat)
                pairs.append((qid, did, RelevanceLabel.POSITIVE))
            n_neg = cfg.pos_per_query * cfg.neg_ratio
            for j in range(n_neg):
                foreign = (topic + 1 + j % (cfg.n_topics - 1)) % cfg.n_topics
                did = f"d{doc_counter:06d}"
                doc_counter += 1
                doc_features[did] = centroids[foreign] + cfg.noise_sigma * rng.standard_normal(cfg.d_feat)
                pairs.append((qid, did, RelevanceLabel.NEGATIVE))
        return Dataset.build(pairs, query_features, doc_features)

    return build_split(cfg.n_queries), build_split(n_test)


def build_protocol(dataset: Dataset, proto: ForgetProtocol) -> tuple[ForgetSpec, SubstituteMap]:
    """Select a forget set of exactly ceil(fraction * positive pairs) pairs,
    split between query removal and document removal per the balance, and
    assign seeded random substitutes obeying the substitution constraints."""
    positive_pairs = dataset.positive_pairs()
    # Tiny guard so that float fuzz in fraction * count cannot bump the ceiling.
    target = math.ceil(proto.fraction * len(positive_pairs) - 1e-9)
    if target == 0:
        return ForgetSpec.make(), SubstituteMap({})

    rng = np.random.default_rng(proto.seed)
    target_q = round(target * proto.balance)
    target_d = target - target_q

    pos_of_doc: dict[str, list[str]] = {}
    for q, d, _ in positive_pairs:
        pos_of_doc.setdefault(d, []).append(q)

    query_queue = [str(x) for x in rng.permutation(np.array(dataset.queries, dtype=object))]
    doc_queue = [str(x) for x in rng.permutation(np.array(sorted(pos_of_doc), dtype=object))]

    covered: set[tuple[str, str]] = set()
    chosen_queries: list[str] = []
    chosen_docs: list[str] = []
    count_q = 0
    count_d = 0

    def take_query() -> bool:
        nonlocal count_q
        while query_queue:
            q = query_queue.pop()
            new_pairs = [(q, d) for d in dataset.positives(q)]
            if any(p in covered for p in new_pairs):
                continue
            if count_q + len(new_pairs) > target_q:
                continue
            covered.update(new_pairs)
            chosen_queries.append(q)
            count_q += len(new_pairs)
            return True
        return False

    def take_doc() -> bool:
        nonlocal count_d
        while doc_queue:
            d = doc_queue.pop()
            new_pairs = [(q, d) for q in pos_of_doc[d]]
            if any(p in covered for p in new_pairs):
                continue
            if any(q in chosen_queries for q in pos_of_doc[d]):
                continue
            if count_d + len(new_pairs) > target_d:
                continue
            covered.update(new_pairs)
            chosen_docs.append(d)
            count_d += len(new_pairs)
            return True
        return False

    stuck_q = stuck_d = False
    while count_q + count_d < target:
        deficit_q = target_q - count_q
        deficit_d = target_d - count_d
        prefer_query = deficit_q >= deficit_d
        progressed = take_query() if prefer_query else take_doc()
        if not progressed:
            progressed = take_doc() if prefer_query else take_query()
        if not progressed:
            stuck_q = stuck_d = True
            break
    if count_q + count_d < target:
        raise ValidationError(
            f"cannot reach {target} forget pairs with balance {proto.balance}; "
            f"achievable maximum is {count_q + count_d}"
            + (" (both removal types exhausted)" if stuck_q and stuck_d else "")
        )

    spec = ForgetSpec.make(chosen_queries, chosen_docs)
    subs = assign_substitutes(dataset, covered, proto.seed)
    return spec, subs


def assign_substitutes(
    dataset: Dataset,
    forget_pairs: Iterable[tuple[str, str]],
    seed: int,
) -> SubstituteMap:
    """Uniform random substitutes from the corpus universe, excluding each
    query's forgotten and positive documents; distinct within a query."""
    rng = np.random.default_rng(seed)
    per_query: dict[str, list[str]] = {}
    for q, d in sorted(forget_pairs):
        per_query.setdefault(q, []).append(d)
    subs: dict[tuple[str, str], str] = {}
    universe = set(dataset.universe)
    for q in sorted(per_query):
        forgotten = set(per_query[q])
        candidates = sorted(universe - forgotten - set(dataset.positives(q)))
        if len(candidates) < len(forgotten):
            raise ValidationError(
                f"query {q}: not enough candidate substitutes "
                f"({len(candidates)} available for {len(forgotten)} forgotten documents)"
            )
        chosen = rng.choice(np.array(candidates, dtype=object), size=len(forgotten), replace=False)
        for d, sub in zip(per_query[q], chosen):
            subs[(q, d)] = str(sub)
    return SubstituteMap(subs)


# ---------------------------------------------------------------------------
# File emission with a hashed manifest.
# ---------------------------------------------------------------------------

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def fraction_tag(fraction: float) -> str:
    return f"{fraction:g}"


def emit(
    cfg: GenConfig,
    protocols: Sequence[ForgetProtocol],
    outdir: str | Path,
) -> dict:
    """Generate a corpus, materialise one forget spec + substitute map per
    protocol, and write everything plus a manifest of content hashes."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    train, test = generate(cfg)

    files: dict[str, Path] = {
        "train_pairs": outdir / "train_pairs.tsv",
        "test_pairs": outdir / "test_pairs.tsv",
        "train_query_features": outdir / "train_queries.tsv",
        "train_doc_features": outdir / "train_docs.tsv",
        "test_query_features": outdir / "test_queries.tsv",
        "test_doc_features": outdir / "test_docs.tsv",
    }
    write_dataset(train, files["train_pairs"], files["train_query_features"], files["train_doc_features"])
    write_dataset(test, files["test_pairs"], files["test_query_features"], files["test_doc_features"])

    protocol_entries = []
    for proto in protocols:
        tag = fraction_tag(proto.fraction)
        spec, subs = build_protocol(train, proto)
        spec_path = outdir / f"forget_{tag}.json"
        subs_path = outdir / f"substitutes_{tag}.json"
        write_forget_spec(spec, spec_path)
        write_substitute_map(subs, subs_path)
        files[f"forget_{tag}"] = spec_path
        files[f"substitutes_{tag}"] = subs_path
        protocol_entries.append(
            {"fraction": proto.fraction, "balance": proto.balance, "seed": proto.seed}
        )

    manifest = {
        "gen_config": {
            "n_queries": cfg.n_queries,
            "docs_per_query": cfg.docs_per_query,
            "pos_per_query": cfg.pos_per_query,
            "neg_ratio": cfg.neg_ratio,
            "d_feat": cfg.d_feat,
            "n_topics": cfg.n_topics,
            "noise_sigma": cfg.noise_sigma,
            "test_fraction": cfg.test_fraction,
            "seed": cfg.seed,
        },
        "protocols": protocol_entries,
        "files": {name: {"path": p.name, "sha256": _sha256(p)} for name, p in sorted(files.items())},
    }
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest
