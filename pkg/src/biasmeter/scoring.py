"""Backend-agnostic token scoring.

All measures are written against `Scorer.score`: given a token sequence,
positions to mask, and target tokens, a backend returns natural-log
probabilities (and, on request, per-token received-attention weights).
Backends: the built-in tiny MLM, a stub for tests, and a dump file
produced by an external exporter.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np

from .errors import (
    AttentionUnavailableError,
    UnansweredRequestError,
    UnknownTokenError,
)
from .mlm.model import MlmConfig, forward
from .mlm.vocab import MASK, Vocabulary

PROTOCOLS = ("TBS", "SSS", "CPS", "AUL", "AULA", "PROBE")
ATTENTION_TOL = 1e-6
LOGPROB_TOL = 1e-9


@dataclass(frozen=True)
class ScoreRequest:
    id: str
    tokens: tuple[str, ...]
    masked_positions: tuple[int, ...] = ()
    targets: dict[int, str] = field(default_factory=dict)
    want_attention: bool = False
    protocol: str = "PROBE"

    def __post_init__(self):
        n = len(self.tokens)
        if not self.tokens:
            raise ValueError(f"request {self.id}: empty token sequence")
        bad = [p for p in self.masked_positions if not 0 <= p < n]
        bad += [p for p in self.targets if not 0 <= p < n]
        if bad:
            raise ValueError(f"request {self.id}: positions {bad} out of range")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"request {self.id}: unknown protocol {self.protocol!r}")

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "tokens": list(self.tokens),
            "masked_positions": sorted(self.masked_positions),
            "targets": {str(p): t for p, t in sorted(self.targets.items())},
            "want_attention": self.want_attention,
            "protocol": self.protocol,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ScoreRequest":
        return cls(
            id=rec["id"],
            tokens=tuple(rec["tokens"]),
            masked_positions=tuple(sorted(rec["masked_positions"])),
            targets={int(p): t for p, t in rec["targets"].items()},
            want_attention=rec["want_attention"],
            protocol=rec["protocol"],
        )


@dataclass(frozen=True)
class ScoreResponse:
    id: str
    logprobs: dict[int, float]
    attention: tuple[float, ...] | None = None
    backend: str = ""
    error: str | None = None

    def __post_init__(self):
        if self.error is not None:
            return
        bad = {p: v for p, v in self.logprobs.items() if v > LOGPROB_TOL}
        if bad:
            raise ValueError(f"response {self.id}: positive log-probabilities {bad}")
        if self.attention is not None:
            a = np.asarray(self.attention, dtype=float)
            if (a < 0).any():
                raise ValueError(f"response {self.id}: negative attention weight")
            if abs(a.sum() - 1.0) > ATTENTION_TOL:
                raise ValueError(
                    f"response {self.id}: attention weights sum to {a.sum():.6f}, not 1"
                )

    def to_record(self) -> dict:
        rec = {
            "id": self.id,
            "logprobs": {str(p): v for p, v in sorted(self.logprobs.items())},
            "attention": list(self.attention) if self.attention is not None else None,
            "backend": self.backend,
        }
        if self.error is not None:
            rec["error"] = self.error
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "ScoreResponse":
        return cls(
            id=rec["id"],
            logprobs={int(p): float(v) for p, v in rec["logprobs"].items()},
            attention=tuple(rec["attention"]) if rec.get("attention") is not None else None,
            backend=rec.get("backend", ""),
            error=rec.get("error"),
        )


class Scorer(Protocol):
    backend_id: str

    def score(self, request: ScoreRequest) -> ScoreResponse: ...


class TinyMlmScorer:
    """Scores requests with a frozen tiny-MLM checkpoint.

    Input tokens outside the vocabulary map to <unk>; a target token
    outside the vocabulary is an error (its probability would be the
    aggregate <unk> mass, not the word's).
    """

    def __init__(self, params, cfg: MlmConfig, vocab: Vocabulary,
                 backend_id: str = "tinymlm", cache_size: int = 64):
        self.params = params
        self.cfg = cfg
        self.vocab = vocab
        self.backend_id = backend_id
        self._cache: dict[tuple, tuple] = {}
        self._cache_size = cache_size

    def vocab_words(self) -> tuple[str, ...]:
        return self.vocab.content_words()

    def in_vocab(self, token: str) -> bool:
        return self.vocab.id_of(token.lower()) is not None

    def _forward(self, ids: tuple[int, ...]):
        hit = self._cache.get(ids)
        if hit is None:
            logp, alpha = forward(
                self.params, self.cfg, np.array([ids]), want_attention=True
            )
            hit = (logp[0], alpha[0])
            if len(self._cache) >= self._cache_size:
                self._cache.pop(next(iter(self._cache)))
            self._cache[ids] = hit
        return hit

    def score(self, request: ScoreRequest) -> ScoreResponse:
        ids = list(self.vocab.encode(t.lower() for t in request.tokens))
        for pos, tok in request.targets.items():
            if self.vocab.id_of(tok.lower()) is None:
                raise UnknownTokenError(
                    f"request {request.id}: target {tok!r} not in vocabulary"
                )
        for p in request.masked_positions:
            ids[p] = MASK
        logp, alpha = self._forward(tuple(ids))
        out = {
            pos: float(logp[pos, self.vocab.id_of(tok.lower())])
            for pos, tok in request.targets.items()
        }
        return ScoreResponse(
            id=request.id,
            logprobs=out,
            attention=tuple(float(a) for a in alpha) if request.want_attention else None,
            backend=self.backend_id,
        )


class StubScorer:
    """Test backend with hand-set scores.

    `table` answers whole requests by id; `token_logprobs` gives a
    position-independent log-probability per token. `attention` may be a
    fixed weight tuple or a callable of the request.
    """

    backend_id = "stub"

    def __init__(self, token_logprobs: dict[str, float] | None = None,
                 table: dict[str, dict[int, float]] | None = None,
                 attention=None, default: float = -5.0):
        self.token_logprobs = token_logprobs or {}
        self.table = table or {}
        self.attention = attention
        self.default = default

    def _alpha(self, request: ScoreRequest):
        if not request.want_attention:
            return None
        if self.attention is None:
            n = len(request.tokens)
            return tuple([1.0 / n] * n)
        if callable(self.attention):
            return tuple(self.attention(request))
        return tuple(self.attention)

    def score(self, request: ScoreRequest) -> ScoreResponse:
        if request.id in self.table:
            logprobs = dict(self.table[request.id])
        else:
            logprobs = {
                pos: self.token_logprobs.get(tok, self.default)
                for pos, tok in request.targets.items()
            }
        return ScoreResponse(
            id=request.id, logprobs=logprobs,
            attention=self._alpha(request), backend=self.backend_id,
        )


class DumpScorer:
    """Answers requests from a previously ingested response file."""

    def __init__(self, responses: dict[str, ScoreResponse], backend_id: str = "dump"):
        self.responses = responses
        self.backend_id = backend_id

    @classmethod
    def from_file(cls, path: str | Path) -> "DumpScorer":
        return cls(ingest_responses(path))

    def score(self, request: ScoreRequest) -> ScoreResponse:
        resp = self.responses.get(request.id)
        if resp is None:
            raise UnansweredRequestError(f"unanswered request: {request.id}")
        if resp.error is not None:
            raise UnknownTokenError(f"request {request.id}: exporter error: {resp.error}")
        if request.want_attention and resp.attention is None:
            raise AttentionUnavailableError(
                f"request {request.id}: dump has no attention weights"
            )
        return resp


def emit_requests(requests: Iterable[ScoreRequest], path: str | Path) -> int:
    n = 0
    seen: set[str] = set()
    with open(path, "w", encoding="utf-8") as fh:
        for req in requests:
            if req.id in seen:
                raise ValueError(f"duplicate request id {req.id}")
            seen.add(req.id)
            fh.write(json.dumps(req.to_record(), ensure_ascii=False) + "\n")
            n += 1
    return n


def load_requests(path: str | Path) -> list[ScoreRequest]:
    out = []
    seen: set[str] = set()
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            req = ScoreRequest.from_record(json.loads(line))
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}:{lineno}: bad request record: {exc}") from exc
        if req.id in seen:
            raise ValueError(f"{path}:{lineno}: duplicate request id {req.id}")
        seen.add(req.id)
        out.append(req)
    return out


def ingest_responses(path: str | Path) -> dict[str, ScoreResponse]:
    """Parse and validate a response file; raises with the offending line."""
    out: dict[str, ScoreResponse] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            resp = ScoreResponse.from_record(json.loads(line))
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}:{lineno}: bad response record: {exc}") from exc
        if resp.id in out:
            raise ValueError(f"{path}:{lineno}: duplicate response id {resp.id}")
        out[resp.id] = resp
    return out


def write_responses(responses: Iterable[ScoreResponse], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for resp in responses:
            fh.write(json.dumps(resp.to_record(), ensure_ascii=False) + "\n")
            n += 1
    return n


def check_coverage(requests: Iterable[ScoreRequest],
                   responses: dict[str, ScoreResponse]) -> None:
    missing = [r.id for r in requests if r.id not in responses]
    if missing:
        raise UnansweredRequestError(
            f"unanswered request(s): {', '.join(missing[:20])}"
            + (f" (+{len(missing) - 20} more)" if len(missing) > 20 else "")
        )
