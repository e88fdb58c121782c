import pytest
from hypothesis import given
from hypothesis import strategies as st

from trialsize.candidates import (
    PAD,
    corpus_candidate_count,
    extract_candidates,
    label_candidates,
)
from trialsize.corpus import build_abstract
from trialsize.synthetic import generate_corpus

CLUSTERED_SENTENCE = (
    "Between 1996 and 2001, 1477 patients from 70 hospitals in 14 countries "
    "were enrolled."
)

ARM_SENTENCE = (
    "Patients were randomized to 3 months treatment with either INH before "
    "meals (n = 76) or rosiglitazone 4 mg twice a day (n = 69)."
)


def abstract_from(text, gold=None, category="METHODS"):
    return build_abstract(
        {
            "id": "t",
            "gold_size": gold,
            "sections": [{"category": category, "label": None, "text": text}],
        }
    )


class TestExtract:
    def test_clustered_numbers(self):
        values = [c.value for c in extract_candidates(abstract_from(CLUSTERED_SENTENCE))]
        assert values == [1996, 2001, 1477, 70, 14]

    def test_below_threshold_dropped(self):
        assert extract_candidates(abstract_from("We randomized 9 patients.")) == []

    def test_threshold_configurable(self):
        cands = extract_candidates(abstract_from("We randomized 9 patients."), min_value=5)
        assert [c.value for c in cands] == [9]

    def test_arm_sizes_become_candidates(self):
        values = [c.value for c in extract_candidates(abstract_from(ARM_SENTENCE))]
        assert values == [76, 69]

    def test_empty_when_no_integers(self):
        assert extract_candidates(abstract_from("Nothing numeric here.")) == []

    def test_context_window_shape(self):
        (cand,) = extract_candidates(abstract_from("Exactly 120 patients enrolled."))
        assert len(cand.context) == 7
        assert cand.context[3] == "120"
        assert cand.context[0] == PAD  # sentence start padding
        assert cand.context[2] == "exactli"

    def test_word_number_candidates(self):
        (cand,) = extract_candidates(
            abstract_from("We enrolled seventy-six patients today.")
        )
        assert cand.value == 76
        assert cand.surface == "seventy-six"

    def test_document_order_across_sections(self):
        abstract = build_abstract(
            {
                "id": "t",
                "gold_size": None,
                "sections": [
                    {"category": "METHODS", "label": None, "text": "First 30 then 40."},
                    {"category": "RESULTS", "label": None, "text": "Later 50 more."},
                ],
            }
        )
        cands = extract_candidates(abstract)
        assert [c.value for c in cands] == [30, 40, 50]
        assert [c.section_index for c in cands] == [0, 0, 1]

    def test_positions_resolve_back_to_tokens(self):
        abstract = abstract_from(CLUSTERED_SENTENCE + " Afterwards 33 left.")
        for cand in extract_candidates(abstract):
            sentence = abstract.sentence(cand.sentence_index)
            token = sentence.tokens[cand.token_position]
            assert token.numeric_value == cand.value


class TestLabel:
    def test_gold_marks_single_candidate(self):
        labeled = label_candidates(abstract_from(CLUSTERED_SENTENCE, gold=1477))
        marks = {lc.candidate.value: lc.is_size for lc in labeled}
        assert marks == {1996: False, 2001: False, 1477: True, 70: False, 14: False}

    def test_unwinnable_abstract_has_zero_positives(self):
        labeled = label_candidates(abstract_from(ARM_SENTENCE, gold=145))
        assert [lc.candidate.value for lc in labeled] == [76, 69]
        assert not any(lc.is_size for lc in labeled)

    def test_repeated_gold_all_positive(self):
        labeled = label_candidates(
            abstract_from("We enrolled 50 men. All 50 completed.", gold=50)
        )
        assert [lc.is_size for lc in labeled] == [True, True]

    def test_missing_gold_errors(self):
        with pytest.raises(ValueError, match="gold_size"):
            label_candidates(abstract_from(CLUSTERED_SENTENCE))

    @given(
        st.lists(st.integers(min_value=5, max_value=60), min_size=1, max_size=12),
        st.integers(min_value=5, max_value=60),
    )
    def test_positive_count_matches_brute_scan(self, values, gold):
        text = " ".join(f"Group took {v} units." for v in values)
        abstract = abstract_from(text, gold=gold)
        labeled = label_candidates(abstract)
        expected = sum(1 for v in values if v >= 10 and v == gold)
        assert sum(lc.is_size for lc in labeled) == expected


class TestCount:
    def test_empty_corpus(self):
        assert corpus_candidate_count([]) == 0

    def test_single_abstract(self):
        assert corpus_candidate_count([abstract_from(CLUSTERED_SENTENCE)]) == 5

    def test_synthetic_scale_near_reference(self):
        corpus = generate_corpus(201, seed=7)
        count = corpus_candidate_count(corpus)
        assert abs(count - 1530) <= 155  # ~7.6 candidates per abstract
