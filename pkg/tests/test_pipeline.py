import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trialsize.corpus import build_abstract
from trialsize.embeddings import ClusterModel
from trialsize.features import Lexicons
from trialsize.pipeline import (
    ABLATION_ROWS,
    ablate,
    clopper_pearson,
    cross_validate,
    evaluate,
    format_ablation_table,
    format_bound,
    format_report_row,
    predict_size,
    prediction_to_record,
    select_winner,
)
from trialsize.svm import GridSpec, grid_search

CLUSTERS = ClusterModel(k=2, centroids=np.zeros((2, 2)), assignment={"patient": 0})
LEX = Lexicons.default()
SMALL_GRID = GridSpec(cost_values=(1.0, 8.0), gamma_values=(0.05, 0.5))


def abstract_of(text, gold, idx=0):
    return build_abstract(
        {
            "id": f"p{idx}",
            "gold_size": gold,
            "sections": [{"category": "METHODS", "label": None, "text": text}],
        }
    )


def separable_corpus(n, seed=0, prefix_idx=0):
    rng = np.random.default_rng(seed)
    corpus = []
    for i in range(n):
        size = int(rng.integers(30, 400))
        noise = int(rng.integers(30, 400))
        while noise == size:
            noise = int(rng.integers(30, 400))
        corpus.append(
            abstract_of(
                f"We enrolled {size} patients for treatment. "
                f"Follow-up lasted {noise} days in total.",
                gold=size,
                idx=prefix_idx + i,
            )
        )
    return corpus


@pytest.fixture(scope="module")
def trained_model():
    _, model, _ = grid_search(
        separable_corpus(24), SMALL_GRID,
        ("contextual", "lexical", "structural"), CLUSTERS, LEX,
    )
    return model


class TestSelectWinner:
    def test_empty(self):
        assert select_winner([]) is None

    def test_tie_goes_to_earliest(self):
        scored = [(object(), 0.4), (object(), 0.4), (object(), 0.2)]
        assert select_winner(scored) == 0

    def test_max_wins(self):
        scored = [(object(), 0.1), (object(), 0.9), (object(), 0.5)]
        assert select_winner(scored) == 1

    @given(
        st.lists(st.floats(min_value=0.001, max_value=0.999), min_size=1, max_size=10),
        st.sampled_from([
            lambda p: 2.0 * p + 1.0,
            lambda p: p**3,
            lambda p: float(np.log(p)),
            lambda p: p / (2.0 - p),
        ]),
    )
    @settings(max_examples=300)
    def test_argmax_invariant_under_increasing_transforms(self, probs, transform):
        scored = [(i, p) for i, p in enumerate(probs)]
        transformed = [(i, transform(p)) for i, p in scored]
        assert select_winner(scored) == select_winner(transformed)


class TestPredict:
    def test_single_candidate_forced(self, trained_model):
        abstract = abstract_of("Only 55 patients came.", gold=None, idx=900)
        prediction = predict_size(trained_model, abstract)
        assert prediction.predicted_value == 55
        assert prediction.winning_candidate.value == 55

    def test_zero_candidates(self, trained_model):
        abstract = abstract_of("No integers to speak of.", gold=None, idx=901)
        prediction = predict_size(trained_model, abstract)
        assert prediction.predicted_value is None
        assert prediction.probability is None
        assert prediction.candidate_probabilities == []

    def test_clustered_sentence_unique_selection(self, trained_model):
        abstract = abstract_of(
            "Between 1996 and 2001, 1477 patients from 70 hospitals in 14 "
            "countries were enrolled.",
            gold=None,
            idx=902,
        )
        prediction = predict_size(trained_model, abstract)
        assert prediction.predicted_value in {1996, 2001, 1477, 70, 14}
        assert len(prediction.candidate_probabilities) == 5

    def test_prediction_record_runner_up(self, trained_model):
        abstract = abstract_of(
            "We enrolled 120 patients. Follow-up lasted 77 days.", gold=None, idx=903
        )
        record = prediction_to_record(predict_size(trained_model, abstract))
        assert record["size"] in {120, 77}
        assert record["runner_up"]["size"] in {120, 77}
        assert record["runner_up"]["size"] != record["size"]


class TestClopperPearson:
    def test_paper_reference_intervals(self):
        assert clopper_pearson(40, 50) == (
            pytest.approx(0.6628, abs=5e-4), pytest.approx(0.8997, abs=5e-4)
        )
        assert clopper_pearson(38, 50) == (
            pytest.approx(0.6183, abs=5e-4), pytest.approx(0.8694, abs=5e-4)
        )
        assert clopper_pearson(42, 50) == (
            pytest.approx(0.7089, abs=5e-4), pytest.approx(0.9283, abs=5e-4)
        )

    def test_boundaries(self):
        low, high = clopper_pearson(0, 20)
        assert low == 0.0 and 0 < high < 1
        low, high = clopper_pearson(20, 20)
        assert high == 1.0 and 0 < low < 1

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            clopper_pearson(5, 0)
        with pytest.raises(ValueError):
            clopper_pearson(7, 5)
        with pytest.raises(ValueError):
            clopper_pearson(1, 5, confidence=1.0)

    @given(st.integers(min_value=0, max_value=30))
    def test_monotone_in_successes(self, s):
        n = 30
        low_a, high_a = clopper_pearson(s, n)
        if s < n:
            low_b, high_b = clopper_pearson(s + 1, n)
            assert low_b >= low_a - 1e-12
            assert high_b >= high_a - 1e-12

    @given(st.integers(min_value=0, max_value=25), st.integers(min_value=1, max_value=25))
    def test_wider_confidence_nests(self, s, n):
        s = min(s, n)
        low95, high95 = clopper_pearson(s, n, 0.95)
        low99, high99 = clopper_pearson(s, n, 0.99)
        assert low99 <= low95 + 1e-12
        assert high99 >= high95 - 1e-12

    def test_interval_contains_point_estimate(self):
        for s, n in [(1, 7), (3, 9), (44, 50)]:
            low, high = clopper_pearson(s, n)
            assert low <= s / n <= high


class TestFormatting:
    def test_bound_formats(self):
        assert format_bound(0.0453) == "4.5"
        assert format_bound(0.2431) == "24"
        assert format_bound(0.7569) == "76"
        assert format_bound(0.9547) == "95"

    def test_report_row_mirrors_reference_layout(self, trained_model):
        corpus = separable_corpus(10, seed=3, prefix_idx=400)
        report = evaluate(trained_model, corpus)
        row = format_report_row("all", report)
        assert row.startswith("all")
        assert "–" in row


class TestEvaluate:
    def test_perfect_and_counted_errors(self, trained_model):
        corpus = separable_corpus(12, seed=5, prefix_idx=300)
        report = evaluate(trained_model, corpus)
        assert report.n_abstracts == 12
        assert report.accuracy == report.n_correct / 12
        assert report.ci_low <= report.accuracy <= report.ci_high
        recount = sum(1 for _, _, _, correct in report.per_abstract if correct)
        assert recount == report.n_correct

    def test_no_candidate_abstract_counts_as_error(self, trained_model):
        corpus = [abstract_of("Zero numerals here.", gold=44, idx=310)]
        report = evaluate(trained_model, corpus)
        assert report.n_correct == 0
        assert report.per_abstract[0][2] is None

    def test_missing_gold_rejected(self, trained_model):
        with pytest.raises(ValueError, match="gold"):
            evaluate(trained_model, [abstract_of("We saw 44 patients.", gold=None)])


@pytest.fixture(scope="module")
def rows():
    train = separable_corpus(18, seed=1, prefix_idx=0)
    test = separable_corpus(8, seed=2, prefix_idx=100)
    grid = GridSpec(cost_values=(2.0,), gamma_values=(0.1,))
    return ablate(train, test, grid, CLUSTERS, LEX)


class TestAblate:
    def test_all_seven_rows(self, rows):
        assert [r.name for r in rows] == [name for name, _ in ABLATION_ROWS]
        assert all(r.report is not None for r in rows)

    def test_selections_match_names(self, rows):
        by_name = {r.name: set(r.selection) for r in rows}
        assert by_name["all"] == {"contextual", "lexical", "structural"}
        assert by_name["lexical"] == {"lexical"}
        assert by_name["-contextual"] == {"lexical", "structural"}

    def test_table_renders_every_row(self, rows):
        table = format_ablation_table(rows)
        for name, _ in ABLATION_ROWS:
            assert name in table

    def test_row_errors_do_not_stop_others(self):
        # gold never appears as a candidate -> single-class training data
        train = [abstract_of("We saw 44 patients.", gold=9999, idx=i) for i in range(4)]
        test = separable_corpus(4, seed=3, prefix_idx=200)
        grid = GridSpec(cost_values=(1.0,), gamma_values=(0.1,))
        rows = ablate(train, test, grid, CLUSTERS, LEX)
        assert len(rows) == len(ABLATION_ROWS)
        assert all(r.report is None and r.error for r in rows)


class TestCrossValidate:
    def test_fold_count_and_determinism(self):
        corpus = separable_corpus(12, seed=9)
        grid = GridSpec(cost_values=(2.0,), gamma_values=(0.1,))
        mean_one, reports_one = cross_validate(corpus, 3, grid, CLUSTERS, LEX, seed=5)
        mean_two, reports_two = cross_validate(corpus, 3, grid, CLUSTERS, LEX, seed=5)
        assert mean_one == mean_two
        assert [r.per_abstract for r in reports_one] == [r.per_abstract for r in reports_two]
        assert len(reports_one) == 3
        assert sum(r.n_abstracts for r in reports_one) == 12

    def test_leave_one_out(self):
        corpus = separable_corpus(5, seed=11)
        grid = GridSpec(cost_values=(2.0,), gamma_values=(0.1,))
        _, reports = cross_validate(corpus, 5, grid, CLUSTERS, LEX, seed=1)
        assert all(r.n_abstracts == 1 for r in reports)

    def test_bad_k_rejected(self):
        corpus = separable_corpus(4)
        grid = GridSpec(cost_values=(1.0,), gamma_values=(0.1,))
        with pytest.raises(ValueError):
            cross_validate(corpus, 1, grid, CLUSTERS, LEX)
        with pytest.raises(ValueError, match="exceeds"):
            cross_validate(corpus, 9, grid, CLUSTERS, LEX)

    def test_separable_corpus_generalizes(self):
        corpus = separable_corpus(40, seed=13)
        grid = GridSpec(cost_values=(1.0, 8.0), gamma_values=(0.05, 0.5))
        mean_acc, _ = cross_validate(corpus, 10, grid, CLUSTERS, LEX, seed=2)
        assert mean_acc >= 0.95
