"""Spelled-out integer recognition: lookup tables plus a small phrase grammar.

The grammar covers everyday trial-report numbers up to the millions:

    number := group "million" [["and"] sub]  |  sub
    sub    := group "thousand" [["and"] group]  |  group
    group  := unit "hundred" [["and"] basic]  |  basic
    basic  := teen | tens-unit | tens [unit] | unit

``parse_prefix`` returns the longest valid prefix of a token run, so a run
like "seven six" yields two separate numbers and a bare magnitude word
("hundred" with no leading numeral) is not a number at all. Each production
enumerates every parse of its prefix rather than committing greedily; the
runs are a handful of words long, so the backtracking is cheap.
"""

from __future__ import annotations

UNITS = {
    "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9,
}

TEENS = {
    "ten": 10, "eleven": 11, "twelve": 12, "thirteen": 13, "fourteen": 14,
    "fifteen": 15, "sixteen": 16, "seventeen": 17, "eighteen": 18,
    "nineteen": 19,
}

TENS = {
    "twenty": 20, "thirty": 30, "forty": 40, "fifty": 50,
    "sixty": 60, "seventy": 70, "eighty": 80, "ninety": 90,
}

TENS_UNITS = {
    f"{tw}-{uw}": tv + uv
    for tw, tv in TENS.items()
    for uw, uv in UNITS.items()
}

MAGNITUDES = {"hundred": 100, "thousand": 1000, "million": 1_000_000}

NUMBER_WORDS = (
    set(UNITS) | set(TEENS) | set(TENS) | set(TENS_UNITS) | set(MAGNITUDES)
)

# words that may appear inside a run without starting one
CONNECTORS = {"and"}

Parse = tuple[int, int]  # (value, next word index)


def _basic(words: list[str], i: int) -> list[Parse]:
    if i >= len(words):
        return []
    w = words[i]
    if w in TEENS:
        return [(TEENS[w], i + 1)]
    if w in TENS_UNITS:
        return [(TENS_UNITS[w], i + 1)]
    if w in TENS:
        parses = [(TENS[w], i + 1)]
        if i + 1 < len(words) and words[i + 1] in UNITS:
            parses.append((TENS[w] + UNITS[words[i + 1]], i + 2))
        return parses
    if w in UNITS:
        return [(UNITS[w], i + 1)]
    return []


def _skip_and(words: list[str], i: int) -> int:
    if i < len(words) and words[i] in CONNECTORS:
        return i + 1
    return i


def _group(words: list[str], i: int) -> list[Parse]:
    parses = list(_basic(words, i))
    if i < len(words) and words[i] in UNITS:
        j = i + 1
        if j < len(words) and words[j] == "hundred":
            hundreds = UNITS[words[i]] * 100
            parses.append((hundreds, j + 1))
            for value, k in _basic(words, _skip_and(words, j + 1)):
                parses.append((hundreds + value, k))
    return parses


def _sub(words: list[str], i: int) -> list[Parse]:
    parses = []
    for value, j in _group(words, i):
        parses.append((value, j))
        if j < len(words) and words[j] == "thousand":
            thousands = value * 1000
            parses.append((thousands, j + 1))
            for tail, k in _group(words, _skip_and(words, j + 1)):
                parses.append((thousands + tail, k))
    return parses


def _number(words: list[str], i: int) -> list[Parse]:
    parses = []
    for value, j in _group(words, i):
        if j < len(words) and words[j] == "million":
            millions = value * 1_000_000
            parses.append((millions, j + 1))
            for tail, k in _sub(words, _skip_and(words, j + 1)):
                if tail < 1_000_000:
                    parses.append((millions + tail, k))
    parses.extend(_sub(words, i))
    return parses


def parse_prefix(words: list[str]) -> Parse | None:
    """Longest numeric prefix of a lowercase word run.

    Returns (value, words_consumed), or None when the run does not start
    with a valid number phrase.
    """
    parses = _number(words, 0)
    if not parses:
        return None
    return max(parses, key=lambda p: p[1])
