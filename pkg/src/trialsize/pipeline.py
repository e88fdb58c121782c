"""End-to-end decoding and evaluation: per-abstract argmax, accuracy with
exact binomial confidence intervals, ablation rows and cross-validation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaincinv

from . import features as feat_mod
from .candidates import Candidate
from .corpus import Abstract
from .svm import GridSpec, SvmModel, grid_search, score_candidates


@dataclass
class Prediction:
    abstract_id: str
    predicted_value: int | None
    winning_candidate: Candidate | None
    probability: float | None
    candidate_probabilities: list[tuple[Candidate, float]]


@dataclass
class EvalReport:
    n_abstracts: int
    n_correct: int
    accuracy: float
    ci_low: float
    ci_high: float
    per_abstract: list[tuple[str, int, int | None, bool]]  # id, gold, predicted, correct

    def to_json(self) -> dict:
        return {
            "n_abstracts": self.n_abstracts,
            "n_correct": self.n_correct,
            "accuracy": self.accuracy,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "per_abstract": [
                {"id": i, "gold": g, "predicted": p, "correct": c}
                for i, g, p, c in self.per_abstract
            ],
        }


def select_winner(scored: list[tuple[Candidate, float]]) -> int | None:
    """Index of the highest-probability candidate; ties break to the earliest
    document position (the input is in document order)."""
    if not scored:
        return None
    best = 0
    for i in range(1, len(scored)):
        if scored[i][1] > scored[best][1]:
            best = i
    return best


def predict_size(model: SvmModel, abstract: Abstract) -> Prediction:
    """Decode one abstract: extract, vectorize, score, argmax."""
    scored = score_candidates(model, abstract)
    winner = select_winner(scored)
    if winner is None:
        return Prediction(
            abstract_id=abstract.id, predicted_value=None,
            winning_candidate=None, probability=None,
            candidate_probabilities=[],
        )
    cand, prob = scored[winner]
    return Prediction(
        abstract_id=abstract.id, predicted_value=cand.value,
        winning_candidate=cand, probability=prob,
        candidate_probabilities=scored,
    )


def clopper_pearson(successes: int, n: int, confidence: float = 0.95):
    """Exact binomial interval from inverse regularized incomplete betas."""
    if n <= 0:
        raise ValueError("n must be positive")
    if not 0 <= successes <= n:
        raise ValueError(f"successes {successes} outside [0, {n}]")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie strictly between 0 and 1")
    alpha = 1.0 - confidence
    low = 0.0 if successes == 0 else float(
        betaincinv(successes, n - successes + 1, alpha / 2.0)
    )
    high = 1.0 if successes == n else float(
        betaincinv(successes + 1, n - successes, 1.0 - alpha / 2.0)
    )
    return low, high


def evaluate(model: SvmModel, corpus, confidence: float = 0.95) -> EvalReport:
    """Abstract-level accuracy; an absent prediction counts as an error."""
    per_abstract = []
    n_correct = 0
    for abstract in corpus:
        if abstract.gold_size is None:
            raise ValueError(f"abstract {abstract.id!r} has no gold_size")
        prediction = predict_size(model, abstract)
        correct = prediction.predicted_value == abstract.gold_size
        n_correct += int(correct)
        per_abstract.append(
            (abstract.id, abstract.gold_size, prediction.predicted_value, correct)
        )
    n = len(per_abstract)
    if n == 0:
        raise ValueError("empty corpus")
    low, high = clopper_pearson(n_correct, n, confidence)
    return EvalReport(
        n_abstracts=n, n_correct=n_correct, accuracy=n_correct / n,
        ci_low=low, ci_high=high, per_abstract=per_abstract,
    )


def format_bound(fraction: float) -> str:
    """Confidence bound as a percentage: integer, one decimal under 10%."""
    pct = 100.0 * fraction
    if pct < 10.0:
        return f"{pct:.1f}"
    return f"{pct:.0f}"


def format_report_row(name: str, report: EvalReport) -> str:
    return (
        f"{name:<14} {100.0 * report.accuracy:>5.0f} "
        f"({format_bound(report.ci_low)} – {format_bound(report.ci_high)})"
    )


ABLATION_ROWS = (
    ("all", feat_mod.ALL_GROUPS),
    ("contextual", (feat_mod.CONTEXTUAL,)),
    ("structural", (feat_mod.STRUCTURAL,)),
    ("lexical", (feat_mod.LEXICAL,)),
    ("-contextual", (feat_mod.LEXICAL, feat_mod.STRUCTURAL)),
    ("-structural", (feat_mod.CONTEXTUAL, feat_mod.LEXICAL)),
    ("-lexical", (feat_mod.CONTEXTUAL, feat_mod.STRUCTURAL)),
)


@dataclass
class AblationRow:
    name: str
    selection: tuple[str, ...]
    report: EvalReport | None
    error: str | None = None


def ablate(
    train_corpus,
    test_corpus,
    grid: GridSpec,
    clusters,
    lexicons,
    jobs: int = 1,
    **train_kwargs,
) -> list[AblationRow]:
    """The seven feature-selection rows: everything, each single family, each
    leave-one-out. A failed row records its error and the rest continue."""
    rows = []
    for name, selection in ABLATION_ROWS:
        try:
            _, model, _ = grid_search(
                train_corpus, grid, selection, clusters, lexicons,
                jobs=jobs, **train_kwargs,
            )
            rows.append(AblationRow(name, selection, evaluate(model, test_corpus)))
        except Exception as exc:  # keep remaining rows alive
            rows.append(AblationRow(name, selection, None, error=str(exc)))
    return rows


def format_ablation_table(rows: list[AblationRow]) -> str:
    lines = [f"{'Features':<14} {'Acc':>5} (95% CI)"]
    for row in rows:
        if row.report is None:
            lines.append(f"{row.name:<14} error: {row.error}")
        else:
            lines.append(format_report_row(row.name, row.report))
    return "\n".join(lines)


def cross_validate(
    corpus,
    k: int,
    grid: GridSpec,
    clusters,
    lexicons,
    seed: int = 0,
    selection=feat_mod.ALL_GROUPS,
    jobs: int = 1,
    **train_kwargs,
):
    """Abstract-level k-fold cross-validation with a seed-stable shuffle.

    Folds partition abstracts (never candidates); each fold's model comes
    from a fresh grid search on the remaining folds. Returns (mean accuracy,
    fold reports).
    """
    corpus = list(corpus)
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > len(corpus):
        raise ValueError(f"k={k} exceeds corpus size {len(corpus)}")
    order = np.random.default_rng(seed).permutation(len(corpus))
    folds = np.array_split(order, k)
    reports = []
    for fold in folds:
        held = set(int(i) for i in fold)
        train = [a for i, a in enumerate(corpus) if i not in held]
        test = [a for i, a in enumerate(corpus) if i in held]
        _, model, _ = grid_search(
            train, grid, selection, clusters, lexicons, jobs=jobs, **train_kwargs
        )
        reports.append(evaluate(model, test))
    mean_accuracy = float(np.mean([r.accuracy for r in reports]))
    return mean_accuracy, reports


def prediction_to_record(p: Prediction) -> dict:
    runner_up = None
    if len(p.candidate_probabilities) > 1:
        ranked = sorted(
            range(len(p.candidate_probabilities)),
            key=lambda i: (-p.candidate_probabilities[i][1], i),
        )
        cand, prob = p.candidate_probabilities[ranked[1]]
        runner_up = {"size": cand.value, "probability": prob}
    return {
        "id": p.abstract_id,
        "size": p.predicted_value,
        "probability": p.probability,
        "runner_up": runner_up,
    }
