"""Abstract ingestion: JSON-lines corpus loading, sentence splitting,
tokenization and number-word normalization.

An abstract on disk is one JSON object per line:

    {"id": "...", "gold_size": 1477 | null,
     "sections": [{"category": "METHODS", "label": "Patients and methods",
                   "text": "..."}]}
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace

from . import numwords
from .porter import stem

CATEGORIES = frozenset(
    {"BACKGROUND", "OBJECTIVE", "METHODS", "RESULTS", "CONCLUSIONS", "OTHER"}
)

# always split into their own tokens
_DETACH = frozenset("()[],;:=")
# peeled off token ends only
_SENTENCE_PUNCT = frozenset(".!?")

_THOUSANDS_RE = re.compile(r"^\d{1,3}(,\d{3})+$")
_DIGITS_RE = re.compile(r"^\d+$")


class CorpusError(Exception):
    """Raised for malformed corpus files or schema violations."""


@dataclass(frozen=True)
class Token:
    surface: str
    lower: str
    stem: str
    position: int
    char_span: tuple[int, int]
    numeric_value: int | None = None


@dataclass(frozen=True)
class Sentence:
    index_in_abstract: int
    raw: str
    tokens: tuple[Token, ...]


@dataclass(frozen=True)
class Section:
    category: str | None
    label: str | None
    sentences: tuple[Sentence, ...]


@dataclass(frozen=True)
class Abstract:
    id: str
    sections: tuple[Section, ...]
    gold_size: int | None = None

    @property
    def sentences(self) -> list[Sentence]:
        return [s for sec in self.sections for s in sec.sentences]

    @property
    def n_sentences(self) -> int:
        return sum(len(sec.sentences) for sec in self.sections)

    def sentence(self, index: int) -> Sentence:
        """Sentence by its abstract-global index."""
        for sec in self.sections:
            if index < len(sec.sentences):
                return sec.sentences[index]
            index -= len(sec.sentences)
        raise IndexError(index)

    def section_of_sentence(self, index: int) -> int:
        for si, sec in enumerate(self.sections):
            if index < len(sec.sentences):
                return si
            index -= len(sec.sentences)
        raise IndexError(index)


def split_sentences(text: str) -> list[str]:
    """Split section text into sentences.

    A boundary is a run of sentence-final punctuation at parenthesis depth
    zero, followed by whitespace and an uppercase letter or digit. Decimal
    points never match (no whitespace follows them) and boundaries inside
    parentheses are ignored, so "(n = 76)" and "4.5 mg" survive intact.
    """
    sentences = []
    start = 0
    depth = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth = max(0, depth - 1)
        elif ch in _SENTENCE_PUNCT and depth == 0:
            j = i
            while j + 1 < n and text[j + 1] in _SENTENCE_PUNCT:
                j += 1
            m = j + 1
            while m < n and text[m].isspace():
                m += 1
            if m > j + 1 and m < n and (text[m].isupper() or text[m].isdigit()):
                piece = text[start : j + 1].strip()
                if piece:
                    sentences.append(piece)
                start = m
                i = m
                continue
            i = j + 1
            continue
        i += 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def tokenize(sentence: str) -> list[Token]:
    """Whitespace tokenization with brackets, commas, semicolons, colons and
    equals signs detached anywhere, and sentence-final punctuation peeled off
    token ends. Hyphens never split ("twenty-five" stays one token) and a
    comma between digit groups is kept ("1,477").
    """
    spans: list[tuple[int, int]] = []
    i = 0
    n = len(sentence)
    while i < n:
        if sentence[i].isspace():
            i += 1
            continue
        if sentence[i] in _DETACH:
            spans.append((i, i + 1))
            i += 1
            continue
        j = i
        while j < n and not sentence[j].isspace():
            ch = sentence[j]
            if ch in _DETACH:
                if ch == "," and _is_digit_comma(sentence, j):
                    j += 1
                    continue
                break
            j += 1
        spans.extend(_peel_trailing_punct(sentence, i, j))
        i = j
    tokens = []
    for pos, (a, b) in enumerate(spans):
        surface = sentence[a:b]
        lower = surface.lower()
        tokens.append(
            Token(surface=surface, lower=lower, stem=stem(lower),
                  position=pos, char_span=(a, b))
        )
    return tokens


def _is_digit_comma(text: str, i: int) -> bool:
    return (
        0 < i < len(text) - 1
        and text[i - 1].isdigit()
        and text[i + 1].isdigit()
    )


def _peel_trailing_punct(text: str, a: int, b: int) -> list[tuple[int, int]]:
    end = b
    while end > a and text[end - 1] in _SENTENCE_PUNCT:
        end -= 1
    if end == a:  # token is all punctuation, keep whole
        return [(a, b)]
    spans = [(a, end)]
    spans.extend((k, k + 1) for k in range(end, b))
    return spans


def _parse_int_token(lower: str) -> int | None:
    if _DIGITS_RE.match(lower):
        return int(lower)
    if _THOUSANDS_RE.match(lower):
        return int(lower.replace(",", ""))
    return None


def normalize_number_words(tokens: list[Token], raw: str = "") -> list[Token]:
    """Replace maximal spelled-out number runs with single numeric tokens and
    parse digit tokens.

    A composed token covers the whole run's character span; its stem is the
    canonical digit string so features see numbers uniformly. Runs that do not
    start a valid number phrase ("hundred" with no numeral, a stray "and")
    pass through untouched.
    """
    out: list[Token] = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        value = _parse_int_token(tok.lower)
        if value is not None:
            out.append(replace(tok, numeric_value=value, stem=str(value)))
            i += 1
            continue
        if tok.lower in numwords.NUMBER_WORDS:
            run = []
            j = i
            while j < len(tokens) and (
                tokens[j].lower in numwords.NUMBER_WORDS
                or tokens[j].lower in numwords.CONNECTORS
            ):
                run.append(tokens[j].lower)
                j += 1
            parsed = numwords.parse_prefix(run)
            if parsed is not None:
                value, consumed = parsed
                first, last = tokens[i], tokens[i + consumed - 1]
                span = (first.char_span[0], last.char_span[1])
                surface = (
                    raw[span[0] : span[1]]
                    if raw
                    else " ".join(t.surface for t in tokens[i : i + consumed])
                )
                out.append(
                    Token(surface=surface, lower=surface.lower(),
                          stem=str(value), position=0, char_span=span,
                          numeric_value=value)
                )
                i += consumed
                continue
        out.append(tok)
        i += 1
    return [replace(t, position=p) for p, t in enumerate(out)]


def build_sentence(raw: str, index_in_abstract: int) -> Sentence:
    tokens = normalize_number_words(tokenize(raw), raw)
    return Sentence(index_in_abstract=index_in_abstract, raw=raw,
                    tokens=tuple(tokens))


def build_abstract(record: dict) -> Abstract:
    """Construct a tokenized Abstract from a corpus-schema dict."""
    for key in ("id", "sections"):
        if key not in record:
            raise CorpusError(f"missing field {key!r}")
    abstract_id = record["id"]
    if not isinstance(abstract_id, str) or not abstract_id:
        raise CorpusError("id must be a nonempty string")
    gold = record.get("gold_size")
    if gold is not None:
        if not isinstance(gold, int) or isinstance(gold, bool) or gold < 1:
            raise CorpusError(f"gold_size must be a positive integer, got {gold!r}")
    raw_sections = record["sections"]
    if not isinstance(raw_sections, list) or not raw_sections:
        raise CorpusError("sections must be a nonempty list")
    sections = []
    sentence_index = 0
    for k, sec in enumerate(raw_sections):
        if not isinstance(sec, dict) or "text" not in sec:
            raise CorpusError(f"section {k} missing text")
        category = sec.get("category")
        if category is not None and category not in CATEGORIES:
            raise CorpusError(f"section {k} has unknown category {category!r}")
        sentences = []
        for raw in split_sentences(sec["text"]):
            sentences.append(build_sentence(raw, sentence_index))
            sentence_index += 1
        sections.append(
            Section(category=category, label=sec.get("label"),
                    sentences=tuple(sentences))
        )
    if sentence_index == 0:
        raise CorpusError("abstract has no sentences")
    return Abstract(id=abstract_id, sections=tuple(sections), gold_size=gold)


def abstract_to_record(abstract: Abstract) -> dict:
    """Inverse of build_abstract, up to inter-sentence whitespace."""
    return {
        "id": abstract.id,
        "gold_size": abstract.gold_size,
        "sections": [
            {
                "category": sec.category,
                "label": sec.label,
                "text": " ".join(s.raw for s in sec.sentences),
            }
            for sec in abstract.sections
        ],
    }


def load_corpus(path, *, skip_bad: bool = False) -> list[Abstract]:
    """Load a JSON-lines corpus.

    Malformed lines raise CorpusError naming the line number, or are
    reported and skipped when skip_bad is set. Duplicate ids always raise.
    """
    import sys

    abstracts = []
    seen_ids = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                abstract = build_abstract(record)
                if abstract.id in seen_ids:
                    raise CorpusError(f"duplicate id {abstract.id!r}")
            except (json.JSONDecodeError, CorpusError) as exc:
                message = f"{path}:{lineno}: {exc}"
                if skip_bad:
                    print(message, file=sys.stderr)
                    continue
                raise CorpusError(message) from exc
            seen_ids.add(abstract.id)
            abstracts.append(abstract)
    return abstracts


def save_corpus(abstracts, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for abstract in abstracts:
            fh.write(json.dumps(abstract_to_record(abstract), sort_keys=True))
            fh.write("\n")


_HEADING_RE = re.compile(r"^([A-Za-z][A-Za-z ]{0,40}):\s*(.*)$")


def import_plain_text(text: str, abstract_id: str, gold_size: int | None = None) -> Abstract:
    """Convenience importer for one plain-text abstract with HEADING: lines.

    A line prefix like "METHODS:" opens a new section; the heading becomes
    the label, and the category when it matches a known category name.
    """
    sections: list[dict] = []
    current: dict | None = None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        match = _HEADING_RE.match(line)
        if match:
            heading, rest = match.group(1).strip(), match.group(2)
            upper = heading.upper()
            current = {
                "category": upper if upper in CATEGORIES else None,
                "label": heading,
                "text": rest,
            }
            sections.append(current)
        else:
            if current is None:
                current = {"category": None, "label": None, "text": line}
                sections.append(current)
            else:
                current["text"] = (current["text"] + " " + line).strip()
    return build_abstract(
        {"id": abstract_id, "gold_size": gold_size, "sections": sections}
    )
