"""Pronoun-probability probes over bias-controlled checkpoints."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

from .errors import UnknownTokenError
from .lexicon import GenderLexicon
from .measures import Template
from .scoring import Scorer, ScoreRequest

PROBE_TEMPLATE = Template("[GENDER] is a/an [ATTR]", ())


@dataclass
class ProbeResult:
    model_id: str
    r: float | None
    per_occupation: dict[str, tuple[float, float]] = field(default_factory=dict)
    mean_p_he: float = 0.0
    mean_p_she: float = 0.0
    mean_p_he_renorm: float = 0.0
    n_skipped: int = 0
    topk: list[tuple[str, float]] = field(default_factory=list)

    def validate(self):
        for occ, (ph, ps) in self.per_occupation.items():
            if not (0 <= ph <= 1 and 0 <= ps <= 1):
                raise ValueError(f"{occ}: probabilities out of [0,1]")


def load_default_occupations() -> list[str]:
    text = resources.files("biasmeter").joinpath("data/occupations.txt").read_text("utf-8")
    return [w.strip() for w in text.splitlines() if w.strip()]


def occupation_probe(scorer: Scorer, occupations: Sequence[str],
                     pronouns: tuple[str, str] = ("he", "she"),
                     r: float | None = None) -> ProbeResult:
    """p(he) and p(she) at the masked gender slot, per occupation.

    Aggregates are unweighted means; the renormalized mean divides p(he)
    by p(he)+p(she) per occupation before averaging.
    """
    if not occupations:
        raise ValueError("occupation list is empty")
    result = ProbeResult(model_id=getattr(scorer, "backend_id", "unknown"), r=r)
    in_vocab = getattr(scorer, "in_vocab", None)
    raw_he, raw_she, renorm = [], [], []
    for occ in occupations:
        if in_vocab is not None and not in_vocab(occ):
            result.n_skipped += 1
            continue
        probs = {}
        try:
            for g in pronouns:
                toks, gpos, _ = PROBE_TEMPLATE.instantiate(g, occ)
                req = ScoreRequest(
                    id=f"probe:{occ}:{g}",
                    tokens=toks,
                    masked_positions=(gpos,),
                    targets={gpos: g},
                    protocol="PROBE",
                )
                probs[g] = math.exp(scorer.score(req).logprobs[gpos])
        except UnknownTokenError:
            result.n_skipped += 1
            continue
        ph, ps = probs[pronouns[0]], probs[pronouns[1]]
        result.per_occupation[occ] = (ph, ps)
        raw_he.append(ph)
        raw_she.append(ps)
        renorm.append(ph / (ph + ps) if ph + ps > 0 else 0.5)
    if not result.per_occupation:
        raise ValueError("every occupation was skipped")
    n = len(raw_he)
    result.mean_p_he = sum(raw_he) / n
    result.mean_p_she = sum(raw_she) / n
    result.mean_p_he_renorm = sum(renorm) / n
    result.validate()
    return result


def topk_probe(scorer: Scorer, tokens: Sequence[str], masked_position: int,
               k: int, lexicon: GenderLexicon | None = None,
               candidates: Sequence[str] | None = None,
               r: float | None = None) -> ProbeResult:
    """Top-k filler tokens for a single masked position, descending.

    Candidate words default to the backend vocabulary; gendered entries
    are flagged via the lexicon in the emitted records.
    """
    if not 0 <= masked_position < len(tokens):
        raise ValueError(f"masked position {masked_position} out of range")
    if candidates is None:
        vocab_words = getattr(scorer, "vocab_words", None)
        if vocab_words is None:
            raise ValueError("backend has no vocabulary listing; pass candidates")
        candidates = vocab_words()
    scored = []
    for word in candidates:
        req = ScoreRequest(
            id=f"topk:{word}",
            tokens=tuple(tokens),
            masked_positions=(masked_position,),
            targets={masked_position: word},
            protocol="PROBE",
        )
        try:
            lp = scorer.score(req).logprobs[masked_position]
        except UnknownTokenError:
            continue
        scored.append((word, math.exp(lp)))
    scored.sort(key=lambda wp: (-wp[1], wp[0]))
    result = ProbeResult(model_id=getattr(scorer, "backend_id", "unknown"), r=r)
    result.topk = scored[: min(k, len(scored))]
    return result


def gender_of_word(word: str, lexicon: GenderLexicon) -> str:
    if word in lexicon.male_words:
        return "male"
    if word in lexicon.female_words:
        return "female"
    return "neutral"


def save_probe_csv(results: Sequence[ProbeResult], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "occupation", "p_he", "p_she"])
        for res in results:
            for occ, (ph, ps) in sorted(res.per_occupation.items()):
                w.writerow([res.r, occ, f"{ph:.10f}", f"{ps:.10f}"])


def save_aggregate_csv(results: Sequence[ProbeResult], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "mean_p_he", "mean_p_she", "mean_p_he_renorm"])
        for res in results:
            w.writerow([
                res.r,
                f"{res.mean_p_he:.10f}",
                f"{res.mean_p_she:.10f}",
                f"{res.mean_p_he_renorm:.10f}",
            ])


def plot_probe_curve(results: Sequence[ProbeResult], path: str | Path) -> None:
    """Render mean p(he)/p(she) against r to a static image."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rs = [res.r for res in results]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(rs, [res.mean_p_he for res in results], marker="o", label="p(he)")
    ax.plot(rs, [res.mean_p_she for res in results], marker="s", label="p(she)")
    ax.set_xlabel("rate of bias r")
    ax.set_ylabel("mean output probability")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
