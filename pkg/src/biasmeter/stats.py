"""Correlation of measure scores against the known rates of bias."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import UndefinedCorrelationError


def _check_vectors(xs, ys) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"need equal-length 1-d vectors, got {x.shape} and {y.shape}")
    if len(x) < 3:
        raise ValueError(f"need at least 3 points, got {len(x)}")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelationError("zero variance: correlation undefined")
    return x, y


def pearson(xs, ys) -> float:
    x, y = _check_vectors(xs, ys)
    xc = x - x.mean()
    yc = y - y.mean()
    # rescale so the squared sums cannot underflow for tiny-magnitude input
    xc /= np.abs(xc).max()
    yc /= np.abs(yc).max()
    return float(np.dot(xc, yc) / np.sqrt(np.dot(xc, xc) * np.dot(yc, yc)))


def rank_with_ties(xs) -> np.ndarray:
    """1-based ranks, ties get the average of their positions."""
    x = np.asarray(xs, dtype=float)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=float)
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def spearman(xs, ys) -> float:
    x, y = _check_vectors(xs, ys)
    return pearson(rank_with_ties(x), rank_with_ties(y))


@dataclass
class SweepResult:
    """Per-measure score series over the model sweep."""

    scores: dict[str, list[tuple[float, float]]]  # measure -> [(r, value)]
    corpus_id: str = ""
    seed: int = 0

    def validate(self) -> list[float]:
        r_sets = {m: sorted(r for r, _ in vals) for m, vals in self.scores.items()}
        all_rs = sorted({r for rs in r_sets.values() for r in rs})
        if len(all_rs) < 3:
            raise ValueError(f"need scores for at least 3 rates, got {len(all_rs)}")
        for m, rs in r_sets.items():
            if len(set(rs)) != len(rs):
                raise ValueError(f"measure {m}: duplicate rate entries")
            missing = [r for r in all_rs if r not in rs]
            if missing:
                raise ValueError(f"measure {m}: missing scores for r={missing}")
        return all_rs


@dataclass
class CorrelationReport:
    pearson: dict[str, float | None]
    spearman: dict[str, float | None]
    ranking: list[str]
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "pearson": self.pearson,
            "spearman": self.spearman,
            "ranking": self.ranking,
            "metadata": self.metadata,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    def table(self) -> str:
        """Plain-text table, one row per measure in ranked order."""
        lines = [f"{'measure':<10}{'pearson':>10}{'spearman':>10}"]
        for m in self.ranking:
            p = self.pearson[m]
            s = self.spearman[m]
            lines.append(
                f"{m:<10}"
                f"{('n/a' if p is None else format(p, '.4f')):>10}"
                f"{('n/a' if s is None else format(s, '.4f')):>10}"
            )
        return "\n".join(lines) + "\n"


def run_meta_eval(sweep: SweepResult) -> CorrelationReport:
    """Correlate every measure's scores with r; constant measures rank last."""
    sweep.validate()
    pearsons: dict[str, float | None] = {}
    spearmans: dict[str, float | None] = {}
    for m, vals in sweep.scores.items():
        pts = sorted(vals)
        rs = [r for r, _ in pts]
        scores = [v for _, v in pts]
        try:
            pearsons[m] = pearson(rs, scores)
            spearmans[m] = spearman(rs, scores)
        except UndefinedCorrelationError:
            pearsons[m] = None
            spearmans[m] = None
    ranking = sorted(
        sweep.scores,
        key=lambda m: (pearsons[m] is None, -(pearsons[m] or 0.0), m),
    )
    return CorrelationReport(
        pearson=pearsons,
        spearman=spearmans,
        ranking=ranking,
        metadata={"corpus_id": sweep.corpus_id, "seed": sweep.seed},
    )
