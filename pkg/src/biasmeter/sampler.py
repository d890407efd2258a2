"""Bias-controlled training set construction.

A dataset at rate r mixes round(n*r) male sentences with the remaining
n - round(n*r) female sentences, each drawn uniformly without replacement.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import GenderedCorpus


def male_count(n: int, r: float) -> int:
    """Round-half-up of n*r."""
    return int(math.floor(n * r + 0.5))


@dataclass(frozen=True)
class BiasDataset:
    r: float
    male_part: tuple[int, ...]
    female_part: tuple[int, ...]
    n: int
    seed: int

    def __post_init__(self):
        k = male_count(self.n, self.r)
        if len(self.male_part) != k or len(self.female_part) != self.n - k:
            raise ValueError(
                f"r={self.r}: expected {k} male / {self.n - k} female ids, "
                f"got {len(self.male_part)} / {len(self.female_part)}"
            )


def _rate_seed(seed: int, r: float) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, round(r * 1_000_000)])


def sample_dataset(corpus: GenderedCorpus, r: float, seed: int) -> BiasDataset:
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"rate of bias must be in [0, 1], got {r}")
    rng = np.random.default_rng(_rate_seed(seed, r))
    k = male_count(corpus.n, r)
    m_idx = np.sort(rng.choice(corpus.n, size=k, replace=False))
    f_idx = np.sort(rng.choice(corpus.n, size=corpus.n - k, replace=False))
    return BiasDataset(
        r=r,
        male_part=tuple(corpus.male[i].id for i in m_idx),
        female_part=tuple(corpus.female[i].id for i in f_idx),
        n=corpus.n,
        seed=seed,
    )


def sample_sweep(corpus: GenderedCorpus, rs: list[float], seed: int) -> list[BiasDataset]:
    if not rs:
        raise ValueError("empty rate list")
    return [sample_dataset(corpus, r, seed) for r in rs]


def save_manifest(dataset: BiasDataset, path: str | Path) -> None:
    rec = {
        "r": dataset.r,
        "seed": dataset.seed,
        "n": dataset.n,
        "male_ids": list(dataset.male_part),
        "female_ids": list(dataset.female_part),
    }
    Path(path).write_text(json.dumps(rec) + "\n", encoding="utf-8")


def load_manifest(path: str | Path) -> BiasDataset:
    rec = json.loads(Path(path).read_text(encoding="utf-8"))
    return BiasDataset(
        r=rec["r"],
        male_part=tuple(rec["male_ids"]),
        female_part=tuple(rec["female_ids"]),
        n=rec["n"],
        seed=rec["seed"],
    )


def materialize(dataset: BiasDataset, corpus: GenderedCorpus, path: str | Path) -> None:
    """Write the actual training text for a manifest, one sentence per line.

    Male block first, then female, each in manifest id order; training
    shuffles per-epoch so file order carries no signal.
    """
    by_id = {s.id: s for s in corpus.male + corpus.female}
    with open(path, "w", encoding="utf-8") as fh:
        for sid in dataset.male_part + dataset.female_part:
            fh.write(by_id[sid].text + "\n")
