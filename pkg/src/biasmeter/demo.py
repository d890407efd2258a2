"""Deterministic synthetic demo corpus.

Gendered sentences are emitted as mirrored male/female pairs so the mined
sides are symmetric; a fraction of neutral and mixed-gender lines
exercises the exclusion rules.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .probes import load_default_occupations

PLACES = ("school", "market", "office", "park", "library", "station",
          "hospital", "studio", "museum", "garden")
OBJECTS = ("book", "letter", "song", "story", "car", "meal",
           "picture", "poem", "house", "report")
ADJECTIVES = ("good", "long", "new", "old", "bright", "quiet",
              "famous", "small", "busy", "calm")

# (female, male) aligned word pairs used by the mirrored templates
SUBJECTS = (("she", "he"), ("the woman", "the man"), ("the girl", "the boy"))
RELATIONS = (("mother", "father"), ("sister", "brother"),
             ("daughter", "son"), ("wife", "husband"))
POSS = ("her", "his")
OBJ_PRON = ("her", "him")


def _article(word: str) -> str:
    return "an" if word[0] in "aeiou" else "a"


def _gendered_pair(rng: np.random.Generator, occupations) -> tuple[str, str]:
    kind = rng.integers(0, 7)
    occ = occupations[rng.integers(0, len(occupations))]
    place = PLACES[rng.integers(0, len(PLACES))]
    obj = OBJECTS[rng.integers(0, len(OBJECTS))]
    adj = ADJECTIVES[rng.integers(0, len(ADJECTIVES))]
    subj = SUBJECTS[rng.integers(0, len(SUBJECTS))]
    rel = RELATIONS[rng.integers(0, len(RELATIONS))]
    out = []
    for g in (0, 1):  # 0 = female variant, 1 = male variant
        s, p, op, rl = subj[g], POSS[g], OBJ_PRON[g], rel[g]
        if kind == 0:
            line = f"{s} is {_article(occ)} {occ}."
        elif kind == 1:
            line = f"{s} works as {_article(occ)} {occ} at the {place}."
        elif kind == 2:
            line = f"{s} wants to be {_article(occ)} {occ} one day."
        elif kind == 3:
            line = f"yesterday {s} walked to the {place}."
        elif kind == 4:
            line = f"the {rl} wrote a {obj} about the {place}."
        elif kind == 5:
            line = f"{p} {obj} at the {place} was {adj}."
        else:
            line = f"everyone at the {place} thanked {op} for the {adj} {obj}."
        out.append(line[0].upper() + line[1:])
    return out[0], out[1]


def _neutral(rng: np.random.Generator) -> str:
    place = PLACES[rng.integers(0, len(PLACES))]
    obj = OBJECTS[rng.integers(0, len(OBJECTS))]
    adj = ADJECTIVES[rng.integers(0, len(ADJECTIVES))]
    if rng.integers(0, 2) == 0:
        return f"The {obj} in the {place} is {adj}."
    return f"People at the {place} enjoyed the {adj} {obj}."


def _mixed(rng: np.random.Generator) -> str:
    obj = OBJECTS[rng.integers(0, len(OBJECTS))]
    rel_f = RELATIONS[rng.integers(0, len(RELATIONS))][0]
    return f"He told his {rel_f} about the {obj}."


def generate_demo_corpus(n_lines: int, seed: int,
                         occupations: list[str] | None = None) -> list[str]:
    occupations = occupations or load_default_occupations()
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    lines: list[str] = []
    while len(lines) < n_lines:
        roll = rng.random()
        if roll < 0.75:
            f, m = _gendered_pair(rng, occupations)
            lines.append(f)
            lines.append(m)
        elif roll < 0.95:
            lines.append(_neutral(rng))
        else:
            lines.append(_mixed(rng))
    return lines[:n_lines]


def write_demo_corpus(path: str | Path, n_lines: int, seed: int) -> None:
    Path(path).write_text(
        "\n".join(generate_demo_corpus(n_lines, seed)) + "\n", encoding="utf-8"
    )
