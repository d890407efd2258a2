"""Answer score-request files with a pretrained masked language model.

Reads line-delimited request records
``{id, tokens[], masked_positions[], targets{pos: token}, want_attention,
protocol}`` and writes response records
``{id, logprobs{pos: value}, attention[], backend}`` in request order.

Conventions:
- every target word's subwords are masked jointly in one forward pass and
  their log-probabilities summed (no sequential left-to-right filling);
- attention is the attention received per token, averaged over all layers,
  heads, and query positions, summed per word and renormalized to 1 over
  the word tokens.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import torch

log = logging.getLogger(__name__)

AGG_MODES = ("mean",)


class ExportError(Exception):
    pass


@dataclass(frozen=True)
class ExportJob:
    requests: str
    model: str
    out: str
    device: str = "cpu"
    agg: str = "mean"

    def __post_init__(self):
        if self.agg not in AGG_MODES:
            raise ExportError(f"unknown aggregation mode {self.agg!r}")


def _load_model(name: str, device: str):
    from transformers import AutoModelForMaskedLM, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(name)
        # eager attention keeps per-head attention tensors available
        model = AutoModelForMaskedLM.from_pretrained(
            name, attn_implementation="eager")
    except Exception as exc:  # hub/name/IO failures surface uniformly
        raise ExportError(f"cannot load model {name!r}: {exc}") from exc
    model.to(device)
    model.eval()
    return tokenizer, model


def _subword_ids(tokenizer, word: str) -> list[int] | None:
    """Subword ids for one word, or None if it cannot be encoded."""
    pieces = tokenizer.tokenize(word)
    if not pieces:
        return None
    ids = tokenizer.convert_tokens_to_ids(pieces)
    if tokenizer.unk_token_id is not None and tokenizer.unk_token_id in ids:
        return None
    return ids


def _backend_tag(job: ExportJob, model) -> str:
    revision = getattr(model.config, "_commit_hash", None)
    tag = job.model if revision is None else f"{job.model}@{revision}"
    return f"{tag} (agg={job.agg})"


def _answer(tokenizer, model, rec: dict, device: str, backend: str) -> dict:
    words = [w.lower() for w in rec["tokens"]]
    masked = set(rec.get("masked_positions", ()))
    targets = {int(p): t.lower() for p, t in rec.get("targets", {}).items()}
    want_attention = bool(rec.get("want_attention", False))

    # per-word subword spans; a masked target slot takes the length of the
    # target's own subwords so the joint masking covers the scored pieces
    input_ids = [tokenizer.cls_token_id]
    spans: list[tuple[int, int]] = []
    score_spans: dict[int, tuple[int, list[int]]] = {}
    for pos, word in enumerate(words):
        if pos in targets:
            tgt_ids = _subword_ids(tokenizer, targets[pos])
            if tgt_ids is None:
                raise ExportError(f"target {targets[pos]!r} not encodable")
            piece_ids = tgt_ids
        else:
            piece_ids = _subword_ids(tokenizer, word)
            if piece_ids is None:
                piece_ids = [tokenizer.unk_token_id]
        start = len(input_ids)
        if pos in masked:
            input_ids.extend([tokenizer.mask_token_id] * len(piece_ids))
        else:
            input_ids.extend(piece_ids)
        spans.append((start, len(input_ids)))
        if pos in targets:
            score_spans[pos] = (start, piece_ids)
    input_ids.append(tokenizer.sep_token_id)

    with torch.no_grad():
        out = model(
            input_ids=torch.tensor([input_ids], device=device),
            output_attentions=want_attention,
        )
    logprobs_all = torch.log_softmax(out.logits[0].double(), dim=-1)

    logprobs = {}
    for pos, (start, piece_ids) in score_spans.items():
        total = sum(
            float(logprobs_all[start + k, piece_id])
            for k, piece_id in enumerate(piece_ids)
        )
        logprobs[str(pos)] = min(total, 0.0)

    response = {"id": rec["id"], "logprobs": logprobs,
                "attention": None, "backend": backend}
    if want_attention:
        # (layers, heads, query, key) -> mean received mass per key position
        stacked = torch.stack([a[0] for a in out.attentions]).double()
        received = stacked.mean(dim=(0, 1, 2))
        per_word = [float(received[s:e].sum()) for s, e in spans]
        norm = sum(per_word)
        if norm <= 0:
            raise ExportError("zero attention mass over word tokens")
        response["attention"] = [w / norm for w in per_word]
    return response


def export(job: ExportJob) -> int:
    """Answer every request in the job's request file; returns the number
    of records written (error records included)."""
    tokenizer, model = _load_model(job.model, job.device)
    backend = _backend_tag(job, model)
    n = 0
    with open(job.out, "w", encoding="utf-8") as fh:
        for lineno, line in enumerate(
                Path(job.requests).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"{job.requests}:{lineno}: bad request: {exc}") from exc
            try:
                resp = _answer(tokenizer, model, rec, job.device, backend)
            except ExportError as exc:
                log.warning("request %s failed: %s", rec.get("id"), exc)
                resp = {"id": rec["id"], "logprobs": {}, "attention": None,
                        "backend": backend, "error": str(exc)}
            fh.write(json.dumps(resp, ensure_ascii=False) + "\n")
            n += 1
    return n
