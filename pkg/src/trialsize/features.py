"""The three feature families over candidates, and the sparse vectorizer.

Feature names are namespaced so the families never collide:

    contextual:  ctx[-1]=of   ctxstr=...   cluster[+2]=77
                 pop_in_window   pop_dist   temporal_adj
    lexical:     ngram1=...   ngram2=...   ngram3=...   year
    structural:  cat=METHODS   label=...   likely_label
                 cand_pos_abs   cand_pos_rel   sent_pos_abs   sent_pos_rel

Indicators carry value 1.0; numeric features carry their measurement and
are min-max scaled at vectorization time with ranges fitted on training
data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .candidates import PAD, WINDOW, Candidate
from .corpus import Abstract
from .embeddings import ClusterModel, cluster_of
from .porter import stem

CONTEXTUAL = "contextual"
LEXICAL = "lexical"
STRUCTURAL = "structural"
ALL_GROUPS = (CONTEXTUAL, LEXICAL, STRUCTURAL)

YEAR_MIN, YEAR_MAX = 1950, 2020

NUMERIC_FEATURES = frozenset(
    {"pop_dist", "cand_pos_abs", "cand_pos_rel", "sent_pos_abs", "sent_pos_rel"}
)

DEFAULT_POPULATION_WORDS = (
    "patient", "subject", "participant", "man", "men", "woman", "women",
    "child", "children", "adult", "adolescent", "infant", "volunteer",
    "individual", "male", "female", "elderly", "boy", "girl",
)

DEFAULT_TEMPORAL_WORDS = (
    "year", "month", "week", "day", "hour", "minute", "yr", "mo", "wk",
)

DEFAULT_LIKELY_LABELS = (
    "patient", "participant", "method", "population", "subject",
)


@dataclass(frozen=True)
class NamedFeature:
    name: str
    value: float = 1.0


@dataclass(frozen=True)
class Lexicons:
    """Population/temporal stems and likely-label substrings.

    Entries are stemmed (terms) or lowercased (label substrings) at
    construction so user-supplied word lists match tokens the same way the
    defaults do.
    """

    population_terms: frozenset[str]
    temporal_terms: frozenset[str]
    likely_labels: frozenset[str]

    @classmethod
    def from_words(cls, population, temporal, likely_labels) -> "Lexicons":
        return cls(
            population_terms=frozenset(stem(w.lower()) for w in population),
            temporal_terms=frozenset(stem(w.lower()) for w in temporal),
            likely_labels=frozenset(w.lower() for w in likely_labels),
        )

    @classmethod
    def default(cls) -> "Lexicons":
        return cls.from_words(
            DEFAULT_POPULATION_WORDS, DEFAULT_TEMPORAL_WORDS, DEFAULT_LIKELY_LABELS
        )

    def to_json(self) -> dict:
        return {
            "population_terms": sorted(self.population_terms),
            "temporal_terms": sorted(self.temporal_terms),
            "likely_labels": sorted(self.likely_labels),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Lexicons":
        # already-normalized entries, no re-stemming
        return cls(
            population_terms=frozenset(data["population_terms"]),
            temporal_terms=frozenset(data["temporal_terms"]),
            likely_labels=frozenset(data["likely_labels"]),
        )


def load_lexicon_file(path) -> list[str]:
    """One term per line; blank lines and '#' comments ignored."""
    terms = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                terms.append(line)
    return terms


class FeatureVocabulary:
    """Name -> dense integer id map; inserts until frozen, drops after."""

    def __init__(self, index: dict[str, int] | None = None, frozen: bool = False):
        self.index = dict(index) if index else {}
        self.frozen = frozen

    def __len__(self) -> int:
        return len(self.index)

    def id_of(self, name: str) -> int | None:
        found = self.index.get(name)
        if found is None and not self.frozen:
            found = len(self.index)
            self.index[name] = found
        return found

    def freeze(self) -> "FeatureVocabulary":
        self.frozen = True
        return self


@dataclass
class FeatureVector:
    entries: dict[int, float] = field(default_factory=dict)

    def norm_sq(self) -> float:
        return sum(v * v for v in self.entries.values())


def contextual_features(c: Candidate, clusters: ClusterModel, lex: Lexicons) -> list[NamedFeature]:
    """Window terms, the joined context string, per-slot cluster ids, and the
    population/temporal cues."""
    feats = []
    offsets = range(-WINDOW, WINDOW + 1)
    for off, term in zip(offsets, c.context):
        if off != 0:
            feats.append(NamedFeature(f"ctx[{off:+d}]={term}"))
    feats.append(NamedFeature("ctxstr=" + "|".join(c.context)))
    for off, word in zip(offsets, c.context_lower):
        cid = clusters.oov_id if word == PAD else cluster_of(clusters, word)
        feats.append(NamedFeature(f"cluster[{off:+d}]={cid}"))
    pop_dist = None
    for off, term in zip(offsets, c.context):
        if off != 0 and term in lex.population_terms:
            if pop_dist is None or abs(off) < pop_dist:
                pop_dist = abs(off)
    if pop_dist is not None:
        feats.append(NamedFeature("pop_in_window"))
        feats.append(NamedFeature("pop_dist", float(pop_dist)))
    if c.context[WINDOW - 1] in lex.temporal_terms or c.context[WINDOW + 1] in lex.temporal_terms:
        feats.append(NamedFeature("temporal_adj"))
    return feats


def lexical_features(c: Candidate) -> list[NamedFeature]:
    """All 1-/2-/3-grams of the candidate's sentence, plus the year flag."""
    feats = []
    stems = c.sentence_stems
    for n in (1, 2, 3):
        for i in range(len(stems) - n + 1):
            feats.append(NamedFeature(f"ngram{n}=" + " ".join(stems[i : i + n])))
    if YEAR_MIN <= c.value <= YEAR_MAX:
        feats.append(NamedFeature("year"))
    return feats


def structural_features(c: Candidate, a: Abstract, lex: Lexicons) -> list[NamedFeature]:
    """Section category/label cues and the positional measurements."""
    feats = []
    section = a.sections[c.section_index]
    if section.category is not None:
        feats.append(NamedFeature(f"cat={section.category}"))
    if section.label is not None:
        label = section.label.lower()
        feats.append(NamedFeature(f"label={label}"))
        if any(sub in label for sub in lex.likely_labels):
            feats.append(NamedFeature("likely_label"))
    sentence = a.sentence(c.sentence_index)
    n_tokens = max(1, len(sentence.tokens))
    n_sentences = max(1, a.n_sentences)
    feats.append(NamedFeature("cand_pos_abs", float(c.token_position)))
    feats.append(NamedFeature("cand_pos_rel", c.token_position / n_tokens))
    feats.append(NamedFeature("sent_pos_abs", float(c.sentence_index)))
    feats.append(NamedFeature("sent_pos_rel", c.sentence_index / n_sentences))
    return feats


def feature_groups(selection):
    """Extractor running exactly the selected families.

    Returns f(candidate, abstract, clusters, lexicons) -> list[NamedFeature].
    """
    chosen = tuple(g for g in ALL_GROUPS if g in set(selection))
    if not chosen:
        raise ValueError("empty feature-group selection")
    unknown = set(selection) - set(ALL_GROUPS)
    if unknown:
        raise ValueError(f"unknown feature groups: {sorted(unknown)}")

    def extract(c: Candidate, a: Abstract, clusters: ClusterModel, lex: Lexicons):
        feats: list[NamedFeature] = []
        if CONTEXTUAL in chosen:
            feats.extend(contextual_features(c, clusters, lex))
        if LEXICAL in chosen:
            feats.extend(lexical_features(c))
        if STRUCTURAL in chosen:
            feats.extend(structural_features(c, a, lex))
        return feats

    return extract


def fit_scaling(feature_lists) -> dict[str, tuple[float, float]]:
    """Per-numeric-feature (min, max) over training extractions."""
    ranges: dict[str, tuple[float, float]] = {}
    for feats in feature_lists:
        for f in feats:
            if f.name in NUMERIC_FEATURES:
                lo, hi = ranges.get(f.name, (f.value, f.value))
                ranges[f.name] = (min(lo, f.value), max(hi, f.value))
    return ranges


def _scale(name: str, value: float, scaling) -> float:
    rng = scaling.get(name)
    if rng is None:
        return value
    lo, hi = rng
    if hi > lo:
        return min(1.0, max(0.0, (value - lo) / (hi - lo)))
    return 1.0 if value >= hi else 0.0


def vectorize(
    features: list[NamedFeature],
    vocab: FeatureVocabulary,
    scaling: dict[str, tuple[float, float]] | None = None,
) -> FeatureVector:
    """Resolve names through the vocabulary; unseen names insert while the
    vocabulary is unfrozen and are dropped once it is frozen."""
    scaling = scaling or {}
    entries: dict[int, float] = {}
    for f in features:
        idx = vocab.id_of(f.name)
        if idx is None:
            continue
        value = f.value
        if f.name in NUMERIC_FEATURES:
            value = _scale(f.name, value, scaling)
        entries[idx] = value
    return FeatureVector(entries=entries)
