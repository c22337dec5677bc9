"""FastAPI service exposing the wire protocol.

Endpoints: POST /tokenize, /hidden_states, /output_head, /log_probs,
/attention and GET /info, plus batch variants /batch/hidden_states and
/batch/log_probs whose semantics are a map of the scalar endpoint.  Errors
come back as a structured JSON body {"error": {"code", "message"}} with an
appropriate status (413 for oversized inputs).
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .model import ModelBundle, SidecarError


class TokenizeRequest(BaseModel):
    text: str


class HiddenStatesRequest(BaseModel):
    ids: list[int]
    mask_positions: list[int]


class OutputHeadRequest(BaseModel):
    vector: list[float]
    k: int = 50


class LogProbsRequest(BaseModel):
    ids: list[int]
    mask_positions: list[int]
    targets: list[int]


class AttentionRequest(BaseModel):
    ids: list[int]
    mask_positions: list[int]


class HiddenStatesBatch(BaseModel):
    requests: list[HiddenStatesRequest] = Field(max_length=256)


class LogProbsBatch(BaseModel):
    requests: list[LogProbsRequest] = Field(max_length=256)


def create_app(bundle: ModelBundle) -> FastAPI:
    app = FastAPI(title="mlm-sidecar", version="0.1.0")

    @app.exception_handler(SidecarError)
    async def sidecar_error_handler(_: Request, exc: SidecarError):
        return JSONResponse(
            status_code=exc.status, content={"error": {"code": exc.code, "message": exc.message}}
        )

    @app.get("/info")
    def info():
        return bundle.info.as_dict()

    @app.post("/tokenize")
    def tokenize(req: TokenizeRequest):
        return bundle.tokenize(req.text)

    @app.post("/hidden_states")
    def hidden_states(req: HiddenStatesRequest):
        return bundle.hidden_states(req.ids, req.mask_positions)

    @app.post("/output_head")
    def output_head(req: OutputHeadRequest):
        return bundle.output_head(req.vector, req.k)

    @app.post("/log_probs")
    def log_probs(req: LogProbsRequest):
        return bundle.log_probs(req.ids, req.mask_positions, req.targets)

    @app.post("/attention")
    def attention(req: AttentionRequest):
        return bundle.attention(req.ids, req.mask_positions)

    @app.post("/batch/hidden_states")
    def batch_hidden_states(batch: HiddenStatesBatch):
        return {"responses": [bundle.hidden_states(r.ids, r.mask_positions) for r in batch.requests]}

    @app.post("/batch/log_probs")
    def batch_log_probs(batch: LogProbsBatch):
        return {
            "responses": [bundle.log_probs(r.ids, r.mask_positions, r.targets) for r in batch.requests]
        }

    return app


def serve(checkpoint: str, host: str = "127.0.0.1", port: int = 8799) -> None:
    import uvicorn

    uvicorn.run(create_app(ModelBundle(checkpoint)), host=host, port=port, log_level="info")
