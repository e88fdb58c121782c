import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trialsize.candidates import extract_candidates
from trialsize.corpus import build_abstract
from trialsize.embeddings import ClusterModel
from trialsize.features import (
    ALL_GROUPS,
    CONTEXTUAL,
    LEXICAL,
    STRUCTURAL,
    FeatureVocabulary,
    Lexicons,
    NamedFeature,
    contextual_features,
    feature_groups,
    fit_scaling,
    lexical_features,
    load_lexicon_file,
    structural_features,
    vectorize,
)

LEX = Lexicons.default()
CLUSTERS = ClusterModel(
    k=5,
    centroids=np.zeros((5, 2)),
    assignment={"patient": 2, "patients": 2, "from": 0, "hospitals": 4, "and": 0},
)


def single_candidate(text, category="METHODS", label=None, value=None):
    abstract = build_abstract(
        {
            "id": "t",
            "gold_size": None,
            "sections": [{"category": category, "label": label, "text": text}],
        }
    )
    cands = extract_candidates(abstract)
    if value is not None:
        cands = [c for c in cands if c.value == value]
    assert len(cands) == 1, cands
    return cands[0], abstract


class TestContextual:
    def test_population_indicator_and_distance(self):
        cand, _ = single_candidate(
            "Between 1996 and 2001, 1477 patients from 70 hospitals.", value=1477
        )
        names = {f.name: f.value for f in contextual_features(cand, CLUSTERS, LEX)}
        assert names["pop_in_window"] == 1.0
        assert names["pop_dist"] == 1.0

    def test_temporal_adjacency(self):
        cand, _ = single_candidate("Subjects were 37 years old.", value=37)
        names = {f.name for f in contextual_features(cand, CLUSTERS, LEX)}
        assert "temporal_adj" in names

    def test_no_temporal_when_not_adjacent(self):
        cand, _ = single_candidate("About 37 of the years-long cohort.", value=37)
        names = {f.name for f in contextual_features(cand, CLUSTERS, LEX)}
        assert "temporal_adj" not in names

    def test_pad_slots_at_sentence_start(self):
        cand, _ = single_candidate("76 patients enrolled.")
        names = {f.name: f.value for f in contextual_features(cand, CLUSTERS, LEX)}
        assert names["ctx[-1]=<pad>"] == 1.0
        assert names["ctx[-3]=<pad>"] == 1.0
        # padding maps to the sentinel cluster id, which is k
        assert names["cluster[-1]=5"] == 1.0

    def test_term_and_cluster_features(self):
        cand, _ = single_candidate("the 76 patients were", value=76)
        names = {f.name for f in contextual_features(cand, CLUSTERS, LEX)}
        assert "ctx[+1]=patient" in names
        assert "cluster[+1]=2" in names  # "patients" assigned cluster 2
        assert "cluster[+0]=5" in names  # the number itself is unassigned
        assert any(n.startswith("ctxstr=") for n in names)

    def test_six_positional_term_features(self):
        cand, _ = single_candidate("a b c 76 d e f", value=76)
        positional = [
            f.name for f in contextual_features(cand, CLUSTERS, LEX)
            if f.name.startswith("ctx[")
        ]
        assert len(positional) == 6
        assert "ctx[0]=76" not in positional


class TestLexical:
    def test_year_flag_inside_range(self):
        cand, _ = single_candidate("published in 1995 it was", value=1995)
        assert "year" in {f.name for f in lexical_features(cand)}

    def test_year_flag_outside_range(self):
        cand, _ = single_candidate("treated 1477 patients", value=1477)
        assert "year" not in {f.name for f in lexical_features(cand)}

    def test_year_range_inclusive(self):
        for year in (1950, 2020):
            cand, _ = single_candidate(f"cohort of {year} people", value=year)
            assert "year" in {f.name for f in lexical_features(cand)}

    def test_ngram_counts(self):
        cand, _ = single_candidate("76 patients enrolled")
        grams = [f.name for f in lexical_features(cand) if f.name.startswith("ngram")]
        assert len([g for g in grams if g.startswith("ngram1=")]) == 3
        assert len([g for g in grams if g.startswith("ngram2=")]) == 2
        assert len([g for g in grams if g.startswith("ngram3=")]) == 1
        assert "ngram2=76 patient" in grams


class TestStructural:
    def test_category_indicator(self):
        cand, abstract = single_candidate("We enrolled 76 patients.", category="METHODS")
        names = {f.name for f in structural_features(cand, abstract, LEX)}
        assert "cat=METHODS" in names

    def test_likely_label(self):
        cand, abstract = single_candidate(
            "We enrolled 76 patients.", label="Patients and methods"
        )
        names = {f.name: f.value for f in structural_features(cand, abstract, LEX)}
        assert names["label=patients and methods"] == 1.0
        assert names["likely_label"] == 1.0

    def test_unlikely_label(self):
        cand, abstract = single_candidate("We enrolled 76 patients.", label="Funding")
        names = {f.name for f in structural_features(cand, abstract, LEX)}
        assert "label=funding" in names
        assert "likely_label" not in names

    def test_degenerate_positions(self):
        cand, abstract = single_candidate("76")
        values = {f.name: f.value for f in structural_features(cand, abstract, LEX)}
        assert values["cand_pos_abs"] == 0.0
        assert values["cand_pos_rel"] == 0.0
        assert values["sent_pos_abs"] == 0.0
        assert values["sent_pos_rel"] == 0.0

    def test_positions_mid_document(self):
        abstract = build_abstract(
            {
                "id": "t",
                "gold_size": None,
                "sections": [
                    {"category": "METHODS", "label": None,
                     "text": "No numbers here. Then we enrolled 76 patients."},
                    {"category": "RESULTS", "label": None, "text": "Fine outcome."},
                ],
            }
        )
        (cand,) = extract_candidates(abstract)
        values = {f.name: f.value for f in structural_features(cand, abstract, LEX)}
        assert values["sent_pos_abs"] == 1.0
        assert values["sent_pos_rel"] == pytest.approx(1 / 3)
        assert values["cand_pos_abs"] == 3.0
        assert 0.0 <= values["cand_pos_rel"] <= 1.0


class TestGroups:
    def test_empty_selection_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            feature_groups(())

    def test_unknown_group_rejected(self):
        with pytest.raises(ValueError, match="unknown"):
            feature_groups(("contextual", "syntax"))

    def test_single_family_has_no_foreign_names(self):
        cand, abstract = single_candidate("We enrolled 76 patients in 1995.", value=76)
        extract = feature_groups({CONTEXTUAL})
        names = {f.name for f in extract(cand, abstract, CLUSTERS, LEX)}
        assert names
        assert not any(n.startswith(("ngram", "year", "cat=", "label=")) for n in names)

    def test_union_of_families(self):
        cand, abstract = single_candidate("We enrolled 76 patients.")
        full = feature_groups(ALL_GROUPS)(cand, abstract, CLUSTERS, LEX)
        parts = []
        for group in (CONTEXTUAL, LEXICAL, STRUCTURAL):
            parts.extend(feature_groups({group})(cand, abstract, CLUSTERS, LEX))
        assert {f.name for f in full} == {f.name for f in parts}

    def test_families_are_namespace_disjoint(self):
        cand, abstract = single_candidate(
            "Between 1996 and 2001, 1477 patients from 70 hospitals.",
            label="Patients and methods",
            value=1477,
        )
        family_names = [
            {f.name for f in feature_groups({g})(cand, abstract, CLUSTERS, LEX)}
            for g in (CONTEXTUAL, LEXICAL, STRUCTURAL)
        ]
        for i in range(3):
            for j in range(i + 1, 3):
                assert not family_names[i] & family_names[j]

    def test_extraction_pure(self):
        cand, abstract = single_candidate("We enrolled 76 patients.")
        extract = feature_groups(ALL_GROUPS)
        one = extract(cand, abstract, CLUSTERS, LEX)
        two = extract(cand, abstract, CLUSTERS, LEX)
        assert one == two


class TestVectorize:
    def test_unfrozen_inserts(self):
        vocab = FeatureVocabulary()
        vec = vectorize([NamedFeature("a"), NamedFeature("b")], vocab)
        assert vec.entries == {0: 1.0, 1: 1.0}

    def test_frozen_drops_unseen(self):
        vocab = FeatureVocabulary()
        vectorize([NamedFeature("a")], vocab)
        vocab.freeze()
        vec = vectorize([NamedFeature("zzz"), NamedFeature("a")], vocab)
        assert vec.entries == {0: 1.0}

    def test_frozen_all_unseen_empty(self):
        vocab = FeatureVocabulary()
        vocab.freeze()
        assert vectorize([NamedFeature("x")], vocab).entries == {}

    def test_numeric_scaling(self):
        scaling = {"cand_pos_abs": (2.0, 10.0)}
        vocab = FeatureVocabulary()
        vec = vectorize([NamedFeature("cand_pos_abs", 10.0)], vocab, scaling)
        assert vec.entries[0] == 1.0
        vec = vectorize([NamedFeature("cand_pos_abs", 2.0)], vocab, scaling)
        assert vec.entries[0] == 0.0
        vec = vectorize([NamedFeature("cand_pos_abs", 99.0)], vocab, scaling)
        assert vec.entries[0] == 1.0  # clamped

    def test_fit_scaling_ranges(self):
        lists = [
            [NamedFeature("cand_pos_abs", 3.0), NamedFeature("year")],
            [NamedFeature("cand_pos_abs", 9.0)],
        ]
        scaling = fit_scaling(lists)
        assert scaling == {"cand_pos_abs": (3.0, 9.0)}

    def test_purity(self):
        vocab = FeatureVocabulary()
        feats = [NamedFeature("a"), NamedFeature("pop_dist", 2.0)]
        scaling = {"pop_dist": (1.0, 3.0)}
        assert vectorize(feats, vocab, scaling) == vectorize(feats, vocab, scaling)

    @given(st.lists(st.text(alphabet="abcdef", min_size=1, max_size=4), max_size=20))
    def test_frozen_ids_below_training_size(self, names):
        vocab = FeatureVocabulary()
        vectorize([NamedFeature(f"train_{i}") for i in range(7)], vocab)
        vocab.freeze()
        vec = vectorize([NamedFeature(n) for n in names], vocab)
        assert all(i < 7 for i in vec.entries)


class TestLexicons:
    def test_defaults_are_stemmed(self):
        assert "particip" in LEX.population_terms
        assert "volunt" in LEX.population_terms
        assert "dai" in LEX.temporal_terms

    def test_file_override(self, tmp_path):
        path = tmp_path / "pop.txt"
        path.write_text("# comment\nnurses\n\ndonors  # inline\n")
        words = load_lexicon_file(path)
        assert words == ["nurses", "donors"]
        lex = Lexicons.from_words(words, ["hour"], ["cohort"])
        assert "nurs" in lex.population_terms
        assert "donor" in lex.population_terms

    def test_json_roundtrip(self):
        assert Lexicons.from_json(LEX.to_json()) == LEX
