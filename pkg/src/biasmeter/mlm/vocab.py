"""Word-level vocabulary with fixed special tokens."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable

PAD, UNK, MASK, BOS, EOS = 0, 1, 2, 3, 4
SPECIALS = ("<pad>", "<unk>", "<mask>", "<bos>", "<eos>")


@dataclass(frozen=True)
class Vocabulary:
    words: tuple[str, ...]  # index = id; starts with SPECIALS

    def __post_init__(self):
        if self.words[: len(SPECIALS)] != SPECIALS:
            raise ValueError("vocabulary must start with the special tokens")

    @property
    def size(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    @property
    def _index(self) -> dict[str, int]:
        # cached on first use; frozen dataclass, so stash via object.__setattr__
        idx = self.__dict__.get("_index_cache")
        if idx is None:
            idx = {w: i for i, w in enumerate(self.words)}
            object.__setattr__(self, "_index_cache", idx)
        return idx

    def encode(self, tokens: Iterable[str]) -> list[int]:
        idx = self._index
        return [idx.get(t, UNK) for t in tokens]

    def id_of(self, word: str) -> int | None:
        return self._index.get(word)

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.words[i] for i in ids]

    def content_words(self) -> tuple[str, ...]:
        return self.words[len(SPECIALS) :]


def build_vocab(
    token_streams: Iterable[Iterable[str]],
    max_size: int,
    forced: Iterable[str] = (),
) -> Vocabulary:
    """Keep the most frequent words up to max_size (specials included).

    Words in `forced` (the active gender lexicon) are always kept
    regardless of frequency.
    """
    counts: Counter[str] = Counter()
    empty = True
    for toks in token_streams:
        for t in toks:
            counts[t] += 1
            empty = False
    if empty:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    forced_set = set(forced)
    budget = max_size - len(SPECIALS) - len(forced_set)
    ranked = sorted(
        (w for w in counts if w not in forced_set),
        key=lambda w: (-counts[w], w),
    )
    kept = sorted(forced_set) + ranked[: max(budget, 0)]
    return Vocabulary(words=SPECIALS + tuple(kept))
