from __future__ import annotations

import numpy as np
import pytest

from unrank.data import (
    Dataset,
    ForgetSet,
    ForgetSpec,
    RelevanceLabel,
    SubstituteMap,
    apply_substitutes,
    build_forget_set,
    load_dataset,
    load_forget_spec,
    load_pairs,
    load_substitute_map,
    partition,
    write_dataset,
    write_forget_spec,
    write_substitute_map,
)
from unrank.errors import ValidationError

from .conftest import NEG, POS, basis, tiny_dataset


class TestDatasetBuild:
    def test_rejects_duplicate_pair(self):
        pairs = [("q1", "d1", POS), ("q1", "d1", NEG), ("q1", "d2", NEG)]
        with pytest.raises(ValidationError, match="duplicate"):
            Dataset.build(pairs, {"q1": basis(0)}, {"d1": basis(0), "d2": basis(1)})

    def test_rejects_query_without_negative(self):
        pairs = [("q1", "d1", POS)]
        with pytest.raises(ValidationError, match="no negative"):
            Dataset.build(pairs, {"q1": basis(0)}, {"d1": basis(0)})

    def test_rejects_query_without_positive(self):
        pairs = [("q1", "d1", NEG), ("q1", "d2", NEG)]
        with pytest.raises(ValidationError, match="no positive"):
            Dataset.build(pairs, {"q1": basis(0)}, {"d1": basis(0), "d2": basis(1)})

    def test_rejects_missing_feature(self):
        pairs = [("q1", "d1", POS), ("q1", "d2", NEG)]
        with pytest.raises(ValidationError, match="missing feature vector for document d2"):
            Dataset.build(pairs, {"q1": basis(0)}, {"d1": basis(0)})

    def test_partitions_positive_and_negative(self):
        ds = tiny_dataset()
        assert ds.positives("q1") == ("d1",)
        assert set(ds.negatives("q1")) == {"d2", "d3", "d4"}
        assert set(ds.positives("q1")) | set(ds.negatives("q1")) == set(ds.docs("q1"))
        assert set(ds.positives("q1")) & set(ds.negatives("q1")) == set()

    def test_rejects_bad_ids(self):
        with pytest.raises(ValidationError, match="forbidden"):
            Dataset.build([("q|1", "d1", POS), ("q|1", "d2", NEG)], {"q|1": basis(0)}, {"d1": basis(0), "d2": basis(1)})


class TestBuildForgetSet:
    def test_query_removal_selects_only_positive_pairs(self):
        ds = tiny_dataset()
        forget = build_forget_set(ds, ForgetSpec.make(forget_queries=["q1"]))
        assert forget.pairs == frozenset({("q1", "d1", POS)})

    def test_document_removal_single_matching_pair(self):
        ds = tiny_dataset()
        forget = build_forget_set(ds, ForgetSpec.make(forget_docs=["d5"]))
        assert forget.pairs == frozenset({("q2", "d5", POS)})

    def test_union_of_overlapping_requests_is_a_set(self):
        ds = tiny_dataset()
        forget = build_forget_set(ds, ForgetSpec.make(forget_queries=["q1"], forget_docs=["d1"]))
        assert forget.pairs == frozenset({("q1", "d1", POS)})
        assert len(forget) == 1

    def test_document_removal_skips_negative_pairs_by_default(self):
        ds = tiny_dataset()
        forget = build_forget_set(ds, ForgetSpec.make(forget_docs=["d3"]))
        assert forget.pairs == frozenset()
        literal = build_forget_set(ds, ForgetSpec.make(forget_docs=["d3"]), include_negative_doc_removal=True)
        assert literal.pairs == frozenset({("q1", "d3", NEG), ("q2", "d3", NEG)})

    def test_unknown_ids_are_named(self):
        ds = tiny_dataset()
        with pytest.raises(ValidationError, match="qX"):
            build_forget_set(ds, ForgetSpec.make(forget_queries=["qX"]))
        with pytest.raises(ValidationError, match="dX"):
            build_forget_set(ds, ForgetSpec.make(forget_docs=["dX"]))

    def test_derived_index_fields(self):
        ds = tiny_dataset()
        forget = build_forget_set(ds, ForgetSpec.make(forget_queries=["q1", "q2"]))
        assert forget.forget_queries_index == frozenset({"q1", "q2"})
        assert forget.per_query["q1"] == frozenset({"d1"})

    def test_rebuild_is_idempotent_and_order_independent(self):
        ds = tiny_dataset()
        spec_a = ForgetSpec.make(forget_queries=["q2", "q1"], forget_docs=["d1", "d5"])
        spec_b = ForgetSpec.make(forget_queries=["q1", "q2"], forget_docs=["d5", "d1"])
        first = build_forget_set(ds, spec_a)
        second = build_forget_set(ds, spec_b)
        third = build_forget_set(ds, spec_a)
        assert first.pairs == second.pairs == third.pairs


class TestPartition:
    def test_counts_add_up(self):
        ds = tiny_dataset()
        forget = build_forget_set(ds, ForgetSpec.make(forget_queries=["q1"]))
        _, retain = partition(ds, forget)
        assert len(forget) + len(retain) == ds.n_pairs
        assert forget.pairs | retain.pairs == ds.pairs()
        assert forget.pairs & retain.pairs == frozenset()

    def test_empty_forget_keeps_everything(self):
        ds = tiny_dataset()
        forget = ForgetSet.from_pairs(())
        _, retain = partition(ds, forget)
        assert retain.pairs == ds.pairs()

    def test_full_query_removal_leaves_only_negatives(self):
        ds = tiny_dataset()
        forget = build_forget_set(ds, ForgetSpec.make(forget_queries=list(ds.queries)))
        _, retain = partition(ds, forget)
        assert all(lab is NEG for _, _, lab in retain.pairs)

    def test_foreign_pairs_rejected(self):
        ds = tiny_dataset()
        rogue = ForgetSet.from_pairs([("q1", "d9", POS)])
        with pytest.raises(ValidationError, match="outside the dataset"):
            partition(ds, rogue)


class TestApplySubstitutes:
    def test_direct_mapping(self):
        ds = tiny_dataset()
        forget = build_forget_set(ds, ForgetSpec.make(forget_queries=["q1"]))
        subs = SubstituteMap({("q1", "d1"): "d5"})
        corrected = apply_substitutes(ds, forget, subs)
        assert ("q1", "d5", POS) in corrected.star_pairs
        assert ("q1", "d1", POS) not in corrected.star_pairs
        assert len(corrected.star_pairs) == ds.n_pairs

    def test_substitute_colliding_with_negative_keeps_one_copy_labelled_positive(self):
        ds = tiny_dataset()
        forget = build_forget_set(ds, ForgetSpec.make(forget_queries=["q1"]))
        subs = SubstituteMap({("q1", "d1"): "d2"})  # d2 is an existing negative of q1
        corrected = apply_substitutes(ds, forget, subs)
        star_docs = corrected.docs_star("q1")
        assert star_docs.count("d2") == 1
        assert dict(corrected.docs_star_of["q1"])["d2"] is POS
        # both triples survive in the corrected pair set, so its size is unchanged
        assert ("q1", "d2", POS) in corrected.star_pairs
        assert ("q1", "d2", NEG) in corrected.star_pairs
        assert len(corrected.star_pairs) == ds.n_pairs

    def test_missing_substitute_is_an_error(self):
        ds = tiny_dataset()
        forget = build_forget_set(ds, ForgetSpec.make(forget_queries=["q1", "q2"]))
        subs = SubstituteMap({("q1", "d1"): "d6"})
        with pytest.raises(ValidationError, match=r"missing forget pairs.*q2.*d5"):
            apply_substitutes(ds, forget, subs)

    def test_substitute_constraints_enforced(self):
        ds = tiny_dataset()
        forget = build_forget_set(ds, ForgetSpec.make(forget_queries=["q1"]))
        with pytest.raises(ValidationError, match="itself forgotten"):
            apply_substitutes(ds, forget, SubstituteMap({("q1", "d1"): "d1"}))
        forget2 = build_forget_set(ds, ForgetSpec.make(forget_docs=["d1"]))
        with pytest.raises(ValidationError, match="not in the corpus"):
            apply_substitutes(ds, forget2, SubstituteMap({("q1", "d1"): "dZ"}))

    def test_corrected_doc_lists_exclude_forgotten_docs(self):
        ds = tiny_dataset()
        forget = build_forget_set(ds, ForgetSpec.make(forget_queries=["q1"]))
        corrected = apply_substitutes(ds, forget, SubstituteMap({("q1", "d1"): "d6"}))
        for q in ds.queries:
            gone = forget.per_query.get(q, frozenset())
            assert not set(corrected.docs_star(q)) & gone

    def test_as_dataset_roundtrips_features(self):
        ds = tiny_dataset()
        forget = build_forget_set(ds, ForgetSpec.make(forget_queries=["q1"]))
        corrected = apply_substitutes(ds, forget, SubstituteMap({("q1", "d1"): "d6"}))
        star = corrected.as_dataset()
        assert star.positives("q1") == ("d6",)
        assert star.d_feat == ds.d_feat


class TestFileFormats:
    def test_pairs_roundtrip(self, tmp_path):
        ds = tiny_dataset()
        write_dataset(ds, tmp_path / "pairs.tsv", tmp_path / "q.tsv", tmp_path / "d.tsv")
        again = load_dataset(tmp_path / "pairs.tsv", tmp_path / "q.tsv", tmp_path / "d.tsv")
        assert again.pairs() == ds.pairs()
        for q in ds.queries:
            np.testing.assert_array_equal(again.query_features[q], ds.query_features[q])
        for d in ds.universe:
            np.testing.assert_array_equal(again.doc_features[d], ds.doc_features[d])

    def test_comments_and_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "pairs.tsv"
        path.write_text("# header comment\nq1\td1\t1\n\nq1\td2\t0\n", encoding="utf-8")
        assert load_pairs(path) == [("q1", "d1", POS), ("q1", "d2", NEG)]

    def test_bad_label_rejected(self, tmp_path):
        path = tmp_path / "pairs.tsv"
        path.write_text("q1\td1\t2\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="label"):
            load_pairs(path)

    def test_forget_spec_json_roundtrip(self, tmp_path):
        spec = ForgetSpec.make(forget_queries=["q2", "q1"], forget_docs=["d9"])
        write_forget_spec(spec, tmp_path / "spec.json")
        assert load_forget_spec(tmp_path / "spec.json") == spec

    def test_substitute_map_json_roundtrip(self, tmp_path):
        subs = SubstituteMap({("q1", "d1"): "d9", ("q2", "d5"): "d1"})
        write_substitute_map(subs, tmp_path / "subs.json")
        assert dict(load_substitute_map(tmp_path / "subs.json").subs) == dict(subs.subs)

    def test_extra_feature_rows_are_ignored(self, tmp_path):
        ds = tiny_dataset()
        write_dataset(ds, tmp_path / "pairs.tsv", tmp_path / "q.tsv", tmp_path / "d.tsv")
        with open(tmp_path / "q.tsv", "a", encoding="utf-8") as fh:
            fh.write("q_unused\t1.0\t0.0\t0.0\t0.0\n")
        again = load_dataset(tmp_path / "pairs.tsv", tmp_path / "q.tsv", tmp_path / "d.tsv")
        assert again.queries == ds.queries
