"""Mining gendered sentence sets from a raw one-sentence-per-line corpus."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import InsufficientDataError
from .lexicon import Gender, GenderLexicon, Sentence, classify_sentence

DEFAULT_MAX_TOKENS = 128


@dataclass(frozen=True)
class GenderedCorpus:
    female: tuple[Sentence, ...]
    male: tuple[Sentence, ...]
    n: int
    seed: int

    def __post_init__(self):
        if len(self.female) != self.n or len(self.male) != self.n:
            raise ValueError(
                f"expected {self.n} sentences per side, "
                f"got {len(self.female)} female / {len(self.male)} male"
            )


@dataclass
class MiningStats:
    n_female_matched: int = 0
    n_male_matched: int = 0
    n_excluded: int = 0
    n_too_long: int = 0


def mine_corpus(
    lines: Iterable[str],
    lexicon: GenderLexicon,
    n: int,
    seed: int,
    max_tokens: int = DEFAULT_MAX_TOKENS,
    stats: MiningStats | None = None,
) -> GenderedCorpus:
    """Classify every line and uniformly downsample each side to n.

    Deterministic given (line order, seed). Sentences longer than
    max_tokens are skipped and counted.
    """
    stats = stats if stats is not None else MiningStats()
    female: list[Sentence] = []
    male: list[Sentence] = []
    next_id = 0
    for raw in lines:
        text = raw.rstrip("\n")
        if not text.strip():
            continue
        sent = Sentence.from_text(next_id, text)
        next_id += 1
        if not sent.tokens:
            continue
        if len(sent.tokens) > max_tokens:
            stats.n_too_long += 1
            continue
        gender = classify_sentence(sent, lexicon)
        if gender is Gender.FEMALE:
            female.append(sent)
            stats.n_female_matched += 1
        elif gender is Gender.MALE:
            male.append(sent)
            stats.n_male_matched += 1
        else:
            stats.n_excluded += 1

    problems = []
    if len(female) < n:
        problems.append(f"female side has {len(female)} < {n}")
    if len(male) < n:
        problems.append(f"male side has {len(male)} < {n}")
    if problems:
        raise InsufficientDataError("; ".join(problems))

    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    f_idx = np.sort(rng.choice(len(female), size=n, replace=False))
    m_idx = np.sort(rng.choice(len(male), size=n, replace=False))
    return GenderedCorpus(
        female=tuple(female[i] for i in f_idx),
        male=tuple(male[i] for i in m_idx),
        n=n,
        seed=seed,
    )


def save_corpus(corpus: GenderedCorpus, path: str | Path) -> None:
    """Persist as line-delimited {id, gender, text} records plus a header."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {"n": corpus.n, "seed": corpus.seed}
        fh.write(json.dumps({"header": header}) + "\n")
        for gender, side in (("female", corpus.female), ("male", corpus.male)):
            for s in side:
                rec = {"id": s.id, "gender": gender, "text": s.text}
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load_corpus(path: str | Path) -> GenderedCorpus:
    female: list[Sentence] = []
    male: list[Sentence] = []
    header = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if "header" in rec:
                header = rec["header"]
                continue
            sent = Sentence.from_text(rec["id"], rec["text"])
            (female if rec["gender"] == "female" else male).append(sent)
    if header is None:
        raise ValueError(f"{path}: missing corpus header record")
    return GenderedCorpus(
        female=tuple(female), male=tuple(male), n=header["n"], seed=header["seed"]
    )


def iter_lines(path: str | Path) -> Iterator[str]:
    with open(path, encoding="utf-8") as fh:
        yield from fh
