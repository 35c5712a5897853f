from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from unrank.curd import UnlearnConfig, UnlearnResult, curd_unlearn
from unrank.data import (
    CorrectedDataset,
    Dataset,
    ForgetSet,
    ForgetSpec,
    RelevanceLabel,
    SubstituteMap,
    apply_substitutes,
    build_forget_set,
)
from unrank.datagen import ForgetProtocol, GenConfig, build_protocol, generate
from unrank.scorers import ScorerKind, ScorerParams
from unrank.training import TrainConfig, TrainResult, train

POS = RelevanceLabel.POSITIVE
NEG = RelevanceLabel.NEGATIVE


def basis(i: int, d: int = 4) -> np.ndarray:
    vec = np.zeros(d)
    vec[i % d] = 1.0
    return vec


def tiny_dataset() -> Dataset:
    """Two queries, four docs each, separable by construction (d_feat=4)."""
    pairs = [
        ("q1", "d1", POS),
        ("q1", "d2", NEG),
        ("q1", "d3", NEG),
        ("q1", "d4", NEG),
        ("q2", "d5", POS),
        ("q2", "d3", NEG),
        ("q2", "d6", NEG),
    ]
    qf = {"q1": basis(0), "q2": basis(1)}
    df = {
        "d1": basis(0),
        "d2": basis(2),
        "d3": basis(3),
        "d4": basis(2) * 0.5,
        "d5": basis(1),
        "d6": basis(2),
    }
    return Dataset.build(pairs, qf, df)


def random_small_dataset(rng: np.random.Generator, d_feat: int = 4) -> Dataset:
    """Random corpus with <= 6 docs per query, for oracle cross-checks."""
    n_queries = int(rng.integers(2, 7))
    pairs = []
    qf: dict[str, np.ndarray] = {}
    df: dict[str, np.ndarray] = {}
    doc_no = 0
    for qi in range(n_queries):
        qid = f"q{qi}"
        qf[qid] = rng.standard_normal(d_feat)
        n_docs = int(rng.integers(2, 7))
        n_pos = int(rng.integers(1, n_docs))
        for j in range(n_docs):
            did = f"d{doc_no}"
            doc_no += 1
            df[did] = rng.standard_normal(d_feat)
            pairs.append((qid, did, POS if j < n_pos else NEG))
    return Dataset.build(pairs, qf, df)


@dataclass
class ReferenceExperiment:
    """Forget-10% on the 100-query separable corpus, trained and unlearned."""

    gen: GenConfig
    dataset: Dataset
    testset: Dataset
    train_cfg: TrainConfig
    train_result: TrainResult
    teacher: ScorerParams
    protocol: ForgetProtocol
    spec: ForgetSpec
    forget: ForgetSet
    subs: SubstituteMap
    corrected: CorrectedDataset
    unlearn_cfg: UnlearnConfig
    curd_result: UnlearnResult


REFERENCE_GEN = GenConfig(
    n_queries=100,
    docs_per_query=20,
    pos_per_query=1,
    neg_ratio=19,
    d_feat=16,
    n_topics=8,
    noise_sigma=0.05,
    test_fraction=0.2,
    seed=42,
)
REFERENCE_TRAIN = TrainConfig(
    margin=1.0, lr=0.05, epochs=40, negatives_per_positive=4, seed=44, patience=5, min_delta=1e-4
)
REFERENCE_UNLEARN = UnlearnConfig(k=5, gamma=0.0, lambda_fc=1.0, lambda_r=1.0, epochs=15, lr=0.05, seed=45)
REFERENCE_PROTOCOL = ForgetProtocol(fraction=0.10, balance=0.5, seed=43)


def build_reference(protocol_seed: int | None = None) -> ReferenceExperiment:
    dataset, testset = generate(REFERENCE_GEN)
    result = train(dataset, ScorerKind.BIENCODER, REFERENCE_TRAIN)
    proto = REFERENCE_PROTOCOL if protocol_seed is None else ForgetProtocol(
        fraction=REFERENCE_PROTOCOL.fraction, balance=REFERENCE_PROTOCOL.balance, seed=protocol_seed
    )
    spec, subs = build_protocol(dataset, proto)
    forget = build_forget_set(dataset, spec)
    corrected = apply_substitutes(dataset, forget, subs)
    curd_result = curd_unlearn(result.params, dataset, forget, subs, REFERENCE_UNLEARN)
    return ReferenceExperiment(
        gen=REFERENCE_GEN,
        dataset=dataset,
        testset=testset,
        train_cfg=REFERENCE_TRAIN,
        train_result=result,
        teacher=result.params,
        protocol=proto,
        spec=spec,
        forget=forget,
        subs=subs,
        corrected=corrected,
        unlearn_cfg=REFERENCE_UNLEARN,
        curd_result=curd_result,
    )


@pytest.fixture(scope="session")
def reference() -> ReferenceExperiment:
    return build_reference()


@pytest.fixture(scope="session")
def small_reference() -> ReferenceExperiment:
    """A 24-query version of the reference setup for cheaper end-to-end tests."""
    gen = GenConfig(
        n_queries=24,
        docs_per_query=10,
        pos_per_query=1,
        neg_ratio=9,
        d_feat=8,
        n_topics=4,
        noise_sigma=0.05,
        test_fraction=0.25,
        seed=7,
    )
    dataset, testset = generate(gen)
    train_cfg = TrainConfig(lr=0.05, epochs=30, negatives_per_positive=3, seed=8, patience=5)
    result = train(dataset, ScorerKind.BIENCODER, train_cfg)
    proto = ForgetProtocol(fraction=0.25, balance=0.5, seed=9)
    spec, subs = build_protocol(dataset, proto)
    forget = build_forget_set(dataset, spec)
    corrected = apply_substitutes(dataset, forget, subs)
    ucfg = UnlearnConfig(k=3, gamma=0.0, epochs=20, lr=0.05, seed=10)
    curd_result = curd_unlearn(result.params, dataset, forget, subs, ucfg)
    return ReferenceExperiment(
        gen=gen,
        dataset=dataset,
        testset=testset,
        train_cfg=train_cfg,
        train_result=result,
        teacher=result.params,
        protocol=proto,
        spec=spec,
        forget=forget,
        subs=subs,
        corrected=corrected,
        unlearn_cfg=ucfg,
        curd_result=curd_result,
    )
