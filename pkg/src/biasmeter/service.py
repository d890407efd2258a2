"""HTTP wrapper around a frozen scorer backend.

The wire format mirrors the request/response file schema, so a client
can replay a request file against the service and get valid response
records back.
"""
from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .errors import ScoreError
from .scoring import PROTOCOLS, ScoreRequest, Scorer


class ScoreRequestModel(BaseModel):
    id: str
    tokens: list[str] = Field(min_length=1)
    masked_positions: list[int] = []
    targets: dict[int, str] = {}
    want_attention: bool = False
    protocol: str = "PROBE"


class ScoreResponseModel(BaseModel):
    id: str
    logprobs: dict[int, float]
    attention: list[float] | None = None
    backend: str


class ModelInfo(BaseModel):
    backend: str
    vocab_size: int | None = None
    meta: dict = {}


def create_app(scorer: Scorer, meta: dict | None = None) -> FastAPI:
    app = FastAPI(title="biasmeter scorer")

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/model", response_model=ModelInfo)
    def model():
        vocab_words = getattr(scorer, "vocab_words", None)
        return ModelInfo(
            backend=getattr(scorer, "backend_id", "unknown"),
            vocab_size=len(vocab_words()) if vocab_words else None,
            meta=meta or {},
        )

    def _score_one(req: ScoreRequestModel) -> ScoreResponseModel:
        try:
            request = ScoreRequest(
                id=req.id,
                tokens=tuple(req.tokens),
                masked_positions=tuple(req.masked_positions),
                targets=dict(req.targets),
                want_attention=req.want_attention,
                protocol=req.protocol,
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        try:
            resp = scorer.score(request)
        except ScoreError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return ScoreResponseModel(
            id=resp.id,
            logprobs=resp.logprobs,
            attention=list(resp.attention) if resp.attention is not None else None,
            backend=resp.backend,
        )

    @app.post("/score", response_model=ScoreResponseModel)
    def score(req: ScoreRequestModel):
        return _score_one(req)

    @app.post("/score/batch", response_model=list[ScoreResponseModel])
    def score_batch(reqs: list[ScoreRequestModel]):
        return [_score_one(r) for r in reqs]

    @app.get("/protocols")
    def protocols():
        return {"protocols": list(PROTOCOLS)}

    return app
