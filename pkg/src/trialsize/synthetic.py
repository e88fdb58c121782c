"""Synthetic trial-abstract generator for desk-scale experiments.

The real annotated corpora behind this task are not redistributable, so the
end-to-end tests and demos run on generated abstracts instead. Each abstract
plants one true enrollment count next to population terms and surrounds it
with the distractors that make the task nontrivial: year mentions,
site/country counts clustered in the same sentence, age ranges, follow-up
durations and completion counts. A small fraction of abstracts state only
per-arm sizes ("(n = 76)"), so their total is unrecoverable, mirroring how
real abstracts sometimes behave.
"""

from __future__ import annotations

import numpy as np

from .corpus import Abstract, build_abstract

POPULATIONS = (
    "patients", "participants", "subjects", "adults", "women", "men",
    "volunteers", "children",
)
VERBS = ("enrolled", "randomized", "recruited", "included")
SITES = ("hospitals", "centres", "sites", "clinics")
CONDITIONS = (
    "chronic migraine", "type 2 diabetes", "acute asthma", "major depression",
    "chronic heart failure", "rheumatoid arthritis", "persistent hypertension",
    "advanced osteoarthritis", "recurrent angina", "severe psoriasis",
)
DRUGS = (
    "relamipril", "dextrovan", "aflunomide", "cortezam", "nivolterol",
    "paradexine", "veltrazol", "omirastat",
)
FREQUENCIES = ("twice daily", "once daily", "every morning", "every evening")
METHOD_LABELS = (
    "Patients and methods", "Methods", "Participants", "Study population",
)


def _draw(rng, lo: int, hi: int, used: set[int]) -> int:
    for _ in range(1000):
        value = int(rng.integers(lo, hi + 1))
        if value not in used and not (1950 <= value <= 2020):
            used.add(value)
            return value
    raise RuntimeError("value space exhausted")


def _draw_year(rng, lo: int, hi: int, used: set[int]) -> int:
    for _ in range(1000):
        value = int(rng.integers(lo, hi + 1))
        if value not in used:
            used.add(value)
            return value
    raise RuntimeError("year space exhausted")


def generate_record(rng, abstract_id: str, arm_split_rate: float = 0.02) -> dict:
    """One abstract in the on-disk corpus schema."""
    used: set[int] = set()
    size = _draw(rng, 24, 1500, used)
    pop = str(rng.choice(POPULATIONS))
    verb = str(rng.choice(VERBS))
    condition = str(rng.choice(CONDITIONS))
    drug = str(rng.choice(DRUGS))
    site = str(rng.choice(SITES))

    background = [
        f"Effective treatment options for {condition} remain limited."
    ]
    if rng.random() < 0.5:
        y0 = _draw_year(rng, 1984, 2008, used)
        background.append(
            f"Trials published since {y0} have reported conflicting results."
        )

    methods = []
    arm_split = rng.random() < arm_split_rate and size >= 40
    style = rng.random()
    if arm_split:
        n1 = int(size // 2 + rng.integers(-size // 6 - 1, size // 6 + 1))
        n1 = max(10, min(size - 10, n1))
        n2 = size - n1
        used.update((n1, n2))
        other = str(rng.choice([d for d in DRUGS if d != drug]))
        methods.append(
            f"Eligible {pop} with {condition} were randomized to either "
            f"{drug} (n = {n1}) or {other} (n = {n2})."
        )
    elif style < 0.6:
        n_sites = _draw(rng, 10, 95, used)
        n_countries = _draw(rng, 10, 30, used)
        y1 = _draw_year(rng, 1992, 2014, used)
        y2 = _draw_year(rng, y1 + 1, min(2020, y1 + 6), used)
        methods.append(
            f"Across {n_sites} {site} in {n_countries} countries, "
            f"{size} {pop} were {verb} between {y1} and {y2}."
        )
    elif style < 0.8:
        methods.append(f"We {verb} {size} {pop} with {condition}.")
    else:
        methods.append(f"A total of {size} {pop} were {verb} in this trial.")
    if rng.random() < 0.6:
        age_low = _draw(rng, 18, 55, used)
        age_high = _draw(rng, age_low + 5, min(90, age_low + 35), used)
        methods.append(f"Eligible {pop} were aged {age_low} to {age_high} years.")
    dose = int(rng.integers(2, 9))
    weeks = _draw(rng, 12, 96, used)
    methods.append(
        f"Participants received {dose} mg of {drug} "
        f"{rng.choice(FREQUENCIES)} for {weeks} weeks."
    )

    results = []
    if not arm_split and rng.random() < 0.45:
        completed = max(10, size - int(rng.integers(2, max(3, size // 6))))
        if completed in used or completed == size:
            completed = max(10, size - 1)
        used.add(completed)
        results.append(
            f"Overall, {completed} of the {size} randomized {pop} "
            f"completed the study."
        )
    else:
        completed = _draw(rng, 10, max(11, size - 1), used)
        results.append(f"Overall {completed} {pop} completed follow-up.")
    results.append(
        f"Symptom scores fell by {rng.integers(2, 9)}.{rng.integers(0, 9)} "
        f"points (p = 0.0{rng.integers(1, 9)})."
    )

    conclusions = [
        f"{drug.capitalize()} was well tolerated in {pop} with {condition}."
    ]

    sections = [
        {"category": "BACKGROUND", "label": None, "text": " ".join(background)},
        {
            "category": "METHODS",
            "label": str(rng.choice(METHOD_LABELS)) if rng.random() < 0.8 else None,
            "text": " ".join(methods),
        },
        {"category": "RESULTS", "label": "Results" if rng.random() < 0.5 else None,
         "text": " ".join(results)},
        {"category": "CONCLUSIONS", "label": None, "text": " ".join(conclusions)},
    ]
    return {"id": abstract_id, "gold_size": size, "sections": sections}


def generate_records(n: int, seed: int = 0, prefix: str = "syn",
                     arm_split_rate: float = 0.02) -> list[dict]:
    rng = np.random.default_rng(seed)
    return [
        generate_record(rng, f"{prefix}-{i:04d}", arm_split_rate)
        for i in range(n)
    ]


def generate_corpus(n: int, seed: int = 0, prefix: str = "syn",
                    arm_split_rate: float = 0.02) -> list[Abstract]:
    return [build_abstract(r) for r in generate_records(n, seed, prefix, arm_split_rate)]


def token_sentences(corpus) -> list[list[str]]:
    """Lowercase token streams for embedding training."""
    return [
        [t.lower for t in sentence.tokens]
        for abstract in corpus
        for sentence in abstract.sentences
    ]
