"""Masked-LM training: dynamic 80/10/10 masking, plain SGD with clipping."""
from __future__ import annotations

import csv
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .model import MlmConfig, loss_and_grads
from .vocab import MASK, PAD, Vocabulary


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    batch_size: int = 32
    epochs: int = 3
    mask_prob: float = 0.15
    seed: int = 0
    clip_norm: float = 1.0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError(f"learning rate must be >= 0, got {self.learning_rate}")
        if not 0 < self.mask_prob < 1:
            raise ValueError(f"mask probability must be in (0, 1), got {self.mask_prob}")

    def to_dict(self) -> dict:
        return asdict(self)


FINETUNE_DEFAULTS = TrainConfig(learning_rate=0.01, epochs=3)


class NonFiniteLossError(RuntimeError):
    def __init__(self, epoch: int, step: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}, batch {step}")
        self.epoch = epoch
        self.step = step


def apply_masking(ids: np.ndarray, pad_mask: np.ndarray, vocab_size: int,
                  mask_prob: float, rng: np.random.Generator):
    """Dynamic masking: each real position independently with mask_prob;
    of the selected positions 80% become <mask>, 10% a random token,
    10% stay unchanged. Returns (masked ids, target mask, target ids)."""
    target_mask = (rng.random(ids.shape) < mask_prob) & pad_mask
    roll = rng.random(ids.shape)
    random_ids = rng.integers(0, vocab_size, size=ids.shape)
    masked = ids.copy()
    masked[target_mask & (roll < 0.8)] = MASK
    swap = target_mask & (roll >= 0.8) & (roll < 0.9)
    masked[swap] = random_ids[swap]
    return masked, target_mask, ids


def _batches(encoded: list[list[int]], batch_size: int, rng: np.random.Generator):
    order = rng.permutation(len(encoded))
    for start in range(0, len(order), batch_size):
        chunk = [encoded[i] for i in order[start : start + batch_size]]
        t = max(len(c) for c in chunk)
        ids = np.full((len(chunk), t), PAD, dtype=np.int64)
        pad = np.zeros((len(chunk), t), dtype=bool)
        for j, c in enumerate(chunk):
            ids[j, : len(c)] = c
            pad[j, : len(c)] = True
        yield ids, pad


def _clip(grads: dict[str, np.ndarray], clip_norm: float) -> None:
    total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if clip_norm > 0 and total > clip_norm:
        scale = clip_norm / total
        for g in grads.values():
            g *= scale


def train(params: dict[str, np.ndarray], cfg: MlmConfig, vocab: Vocabulary,
          sentences: list[list[str]], config: TrainConfig):
    """SGD over dynamically masked batches; returns (params, loss curve).

    The loss curve is a list of (epoch, step, loss) rows. Deterministic
    for a fixed (params, sentences, config.seed).
    """
    encoded = [vocab.encode(toks)[: cfg.max_len] for toks in sentences if toks]
    if not encoded:
        raise ValueError("no non-empty sentences to train on")
    params = {k: v.copy() for k, v in params.items()}
    rng = np.random.default_rng(np.random.SeedSequence([config.seed]))
    curve: list[tuple[int, int, float]] = []
    for epoch in range(1, config.epochs + 1):
        for step, (ids, pad) in enumerate(_batches(encoded, config.batch_size, rng)):
            masked, tmask, tids = apply_masking(
                ids, pad, vocab.size, config.mask_prob, rng
            )
            loss, grads = loss_and_grads(params, cfg, masked, pad, tmask, tids)
            if not np.isfinite(loss):
                raise NonFiniteLossError(epoch, step, loss)
            if tmask.any():
                _clip(grads, config.clip_norm)
                for k in params:
                    params[k] -= config.learning_rate * grads[k]
            curve.append((epoch, step, loss))
    return params, curve


def epoch_mean_losses(curve) -> dict[int, float]:
    sums: dict[int, list[float]] = {}
    for epoch, _, loss in curve:
        sums.setdefault(epoch, []).append(loss)
    return {e: float(np.mean(v)) for e, v in sums.items()}


def save_loss_curve(curve, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "step", "loss"])
        for row in curve:
            w.writerow([row[0], row[1], f"{row[2]:.10f}"])
