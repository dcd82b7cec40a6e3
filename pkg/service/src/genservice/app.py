"""HTTP service for batch text generation.

POST /v1/generate accepts {"inputs": [...], "num_beams": n,
"max_new_tokens": m} and answers {"outputs": [...]} in the same order.
GET /healthz reports readiness; both endpoints return 503 until the model
has loaded. Malformed bodies yield 400.
"""

from __future__ import annotations

import hashlib
import logging
import threading
from dataclasses import dataclass

from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

log = logging.getLogger(__name__)


@dataclass
class ServiceConfig:
    model: str = "echo"  # "echo", a transformers model id, or a checkpoint path
    device: str = "cpu"
    max_batch_size: int = 32
    port: int = 8000

    def __post_init__(self):
        if self.max_batch_size < 1:
            raise ValueError("max_batch_size must be >= 1")


class GenerateBody(BaseModel):
    inputs: list[str]
    num_beams: int = Field(default=2, ge=1)
    max_new_tokens: int = Field(default=30, ge=1)


class EchoGenerator:
    """Deterministic test generator: input text plus a digest suffix that
    covers the decoding parameters, so tests can see they were honored."""

    def generate(self, inputs: list[str], num_beams: int, max_new_tokens: int) -> list[str]:
        out = []
        for text in inputs:
            digest = hashlib.sha256(
                f"{text}|{num_beams}|{max_new_tokens}".encode("utf-8")
            ).hexdigest()[:8]
            out.append(f"{text} [echo:{digest}]")
        return out


class TransformersGenerator:
    """Beam-search generation with a pretrained encoder-decoder model."""

    def __init__(self, model_id: str, device: str = "cpu"):
        import torch
        from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForSeq2SeqLM.from_pretrained(model_id).to(device)
        self.model.eval()
        self.device = device
        self._torch = torch

    def generate(self, inputs: list[str], num_beams: int, max_new_tokens: int) -> list[str]:
        encoded = self.tokenizer(
            inputs, return_tensors="pt", padding=True, truncation=True, max_length=512
        ).to(self.device)
        with self._torch.no_grad():
            generated = self.model.generate(
                **encoded, num_beams=num_beams, max_new_tokens=max_new_tokens
            )
        return self.tokenizer.batch_decode(generated, skip_special_tokens=True)


def load_generator(cfg: ServiceConfig):
    if cfg.model == "echo":
        return EchoGenerator()
    return TransformersGenerator(cfg.model, cfg.device)


def create_app(cfg: ServiceConfig, generator=None) -> FastAPI:
    """Build the application; pass `generator` to start ready, otherwise
    attach one later via `app.state.generator` (503 until then)."""
    app = FastAPI(title="clinevent generation service")
    app.state.cfg = cfg
    app.state.generator = generator

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request, exc):
        return JSONResponse({"detail": "malformed request body"}, status_code=400)

    @app.get("/healthz")
    def healthz():
        if app.state.generator is None:
            return JSONResponse({"status": "loading"}, status_code=503)
        return {"status": "ready", "model": cfg.model}

    @app.post("/v1/generate")
    def generate(body: GenerateBody):
        gen = app.state.generator
        if gen is None:
            return JSONResponse({"detail": "model not ready"}, status_code=503)
        outputs: list[str] = []
        for i in range(0, len(body.inputs), cfg.max_batch_size):
            chunk = body.inputs[i : i + cfg.max_batch_size]
            outputs.extend(gen.generate(chunk, body.num_beams, body.max_new_tokens))
        return {"outputs": outputs}

    return app


def serve(cfg: ServiceConfig) -> None:
    """Run the service; the model loads in the background so the process
    answers health checks (503) immediately."""
    import uvicorn

    app = create_app(cfg)

    def _load():
        log.info("loading model %r", cfg.model)
        app.state.generator = load_generator(cfg)
        log.info("model ready")

    threading.Thread(target=_load, daemon=True).start()
    uvicorn.run(app, host="0.0.0.0", port=cfg.port)
