"""FastAPI application implementing the embedding wire protocol.

Routes: POST /v1/embed, GET /v1/info, GET /healthz. Every non-2xx body
carries ``{"error": "..."}``.
"""
from __future__ import annotations

from dataclasses import dataclass

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .backends import BackendError, EmbeddingBackend, load_backend

POOLING_MODES = ("mean", "cls")


@dataclass(frozen=True)
class SidecarConfig:
    model: str = "hash:384"
    device: str = "cpu"
    max_batch: int = 64
    port: int = 8900
    pooling: str = "mean"

    def validate(self) -> None:
        if self.max_batch < 1:
            raise ValueError(f"max_batch must be >= 1, got {self.max_batch}")
        if self.pooling not in POOLING_MODES:
            raise ValueError(f"pooling must be one of {POOLING_MODES}, got '{self.pooling}'")


class EmbedRequest(BaseModel):
    inputs: list[str]


def create_app(config: SidecarConfig, backend: EmbeddingBackend | None = None) -> FastAPI:
    config.validate()
    if backend is None:
        backend = load_backend(config.model, device=config.device, pooling=config.pooling)

    app = FastAPI(title="curagen-sidecar")

    @app.exception_handler(RequestValidationError)
    async def validation_error(request: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(status_code=422, content={"error": str(exc.errors())})

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.get("/v1/info")
    def info() -> dict:
        return {"name": backend.name, "dim": backend.dim, "modality": backend.modality}

    @app.post("/v1/embed")
    def embed(request: EmbedRequest) -> JSONResponse:
        if not request.inputs:
            return JSONResponse(status_code=400, content={"error": "inputs must be nonempty"})
        if len(request.inputs) > config.max_batch:
            return JSONResponse(
                status_code=413,
                content={
                    "error": f"batch of {len(request.inputs)} exceeds max batch {config.max_batch}"
                },
            )
        if any(text == "" for text in request.inputs):
            return JSONResponse(status_code=400, content={"error": "inputs must not contain empty strings"})
        try:
            vectors = backend.embed(request.inputs)
        except BackendError as exc:
            return JSONResponse(status_code=500, content={"error": str(exc)})
        return JSONResponse(status_code=200, content={"dim": backend.dim, "vectors": vectors})

    return app
