"""Rule stage: integer candidates and gold labeling.

Every normalized integer token with value >= 10 becomes a candidate, in
document order. Year-like values are kept (a lexical feature flags them
downstream) and duplicates stay separate so positional features survive.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import Abstract

PAD = "<pad>"
DEFAULT_MIN_VALUE = 10
WINDOW = 3  # context positions n-3 .. n+3


@dataclass(frozen=True)
class Candidate:
    abstract_id: str
    section_index: int
    sentence_index: int  # abstract-global
    token_position: int
    value: int
    surface: str
    context: tuple[str, ...]  # 7 stems, candidate at slot 3, PAD beyond bounds
    context_lower: tuple[str, ...]  # same window, lowercased surfaces
    sentence_stems: tuple[str, ...]


@dataclass(frozen=True)
class LabeledCandidate:
    candidate: Candidate
    is_size: bool


def extract_candidates(abstract: Abstract, min_value: int = DEFAULT_MIN_VALUE) -> list[Candidate]:
    """All integer mentions with value >= min_value, in document order."""
    found = []
    sentence_index = 0
    for section_index, section in enumerate(abstract.sections):
        for sentence in section.sentences:
            stems = tuple(t.stem for t in sentence.tokens)
            lowers = tuple(t.lower for t in sentence.tokens)
            for token in sentence.tokens:
                if token.numeric_value is None or token.numeric_value < min_value:
                    continue
                n = token.position
                window = range(n - WINDOW, n + WINDOW + 1)
                context = tuple(
                    stems[k] if 0 <= k < len(stems) else PAD for k in window
                )
                context_lower = tuple(
                    lowers[k] if 0 <= k < len(lowers) else PAD for k in window
                )
                found.append(
                    Candidate(
                        abstract_id=abstract.id,
                        section_index=section_index,
                        sentence_index=sentence_index,
                        token_position=n,
                        value=token.numeric_value,
                        surface=token.surface,
                        context=context,
                        context_lower=context_lower,
                        sentence_stems=stems,
                    )
                )
            sentence_index += 1
    return found


def label_candidates(abstract: Abstract, min_value: int = DEFAULT_MIN_VALUE) -> list[LabeledCandidate]:
    """Mark every candidate whose value equals the annotated size.

    All occurrences of the gold value are positive; abstracts whose gold
    value never surfaces as a candidate contribute only negatives.
    """
    if abstract.gold_size is None:
        raise ValueError(f"abstract {abstract.id!r} has no gold_size")
    return [
        LabeledCandidate(candidate=c, is_size=(c.value == abstract.gold_size))
        for c in extract_candidates(abstract, min_value)
    ]


def corpus_candidate_count(corpus, min_value: int = DEFAULT_MIN_VALUE) -> int:
    return sum(len(extract_candidates(a, min_value)) for a in corpus)


def candidate_to_record(c: Candidate) -> dict:
    return {
        "abstract_id": c.abstract_id,
        "sentence_index": c.sentence_index,
        "token_position": c.token_position,
        "value": c.value,
        "surface": c.surface,
        "context": list(c.context),
    }
