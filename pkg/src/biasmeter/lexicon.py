"""Gender word lists and sentence classification.

A sentence is Female if it contains at least one female word and no male
word, Male in the symmetric case, and Excluded otherwise (no gender word,
or words from both lists).
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigurationError

_WORD_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric boundaries.

    Whole-token matching only: "hero" yields the token "hero", which does
    not match the lexicon entry "her".
    """
    return _WORD_RE.findall(text.lower())


class Gender(enum.Enum):
    FEMALE = "female"
    MALE = "male"
    EXCLUDED = "excluded"


@dataclass(frozen=True)
class GenderLexicon:
    female_words: frozenset[str]
    male_words: frozenset[str]

    def __post_init__(self):
        if not self.female_words or not self.male_words:
            raise ConfigurationError("both word lists must be non-empty")
        overlap = self.female_words & self.male_words
        if overlap:
            raise ConfigurationError(
                f"word(s) in both lists: {', '.join(sorted(overlap))}"
            )


@dataclass(frozen=True)
class Sentence:
    id: int
    text: str
    tokens: tuple[str, ...] = field(default=())

    @classmethod
    def from_text(cls, id: int, text: str) -> "Sentence":
        return cls(id=id, text=text, tokens=tuple(tokenize(text)))


def load_lexicon(path: str | Path) -> GenderLexicon:
    """Parse a two-section lexicon file ([female] / [male] headers)."""
    sections: dict[str, set[str]] = {"female": set(), "male": set()}
    current = None
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip().lower()
        if not line or line.startswith("#"):
            continue
        if line in ("[female]", "[male]"):
            current = line[1:-1]
            continue
        if current is None:
            raise ConfigurationError(f"{path}:{lineno}: word before any section header")
        sections[current].add(line)
    return GenderLexicon(
        female_words=frozenset(sections["female"]),
        male_words=frozenset(sections["male"]),
    )


def default_lexicon_path() -> Path:
    return Path(str(resources.files("biasmeter").joinpath("data/lexicon.txt")))


def load_default_lexicon() -> GenderLexicon:
    return load_lexicon(default_lexicon_path())


def classify_sentence(sentence: Sentence, lexicon: GenderLexicon) -> Gender:
    toks = set(sentence.tokens)
    has_f = bool(toks & lexicon.female_words)
    has_m = bool(toks & lexicon.male_words)
    if has_f and not has_m:
        return Gender.FEMALE
    if has_m and not has_f:
        return Gender.MALE
    return Gender.EXCLUDED
