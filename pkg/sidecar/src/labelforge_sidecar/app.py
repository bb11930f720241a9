"""The scoring service: /v1/info, /v1/vocab, and /v1/score.

One forward pass per score request, serialized through a single inference
lock, so identical requests always see identical model state and return
element-wise identical logits. The 400 body shape ({"error", "index"}) is
part of the wire contract; other failures use plain HTTP status codes.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import torch
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel


@dataclass(frozen=True)
class SidecarConfig:
    model_id: str
    device: str = "cpu"
    max_prompt_length: int = 2048
    host: str = "127.0.0.1"
    port: int = 8100

    def __post_init__(self):
        if self.max_prompt_length < 1:
            raise ValueError("max_prompt_length must be positive")
        if not self.host:
            raise ValueError("bind address must be non-empty")
        if not 0 <= self.port <= 65535:
            raise ValueError(f"invalid port {self.port}")


class ScoreRequest(BaseModel):
    prompt: str
    candidates: list[str]


def create_app(model, tokenizer, config: SidecarConfig) -> FastAPI:
    """Wire a loaded causal LM and its tokenizer into the protocol.

    app.state.ready gates scoring; serve() flips it once the model is
    loaded, and tests may clear it to exercise the 503 path.
    """
    app = FastAPI(title="labelforge-sidecar")
    model.eval()
    vocab: dict[str, int] = tokenizer.get_vocab()
    lock = threading.Lock()
    device = torch.device(config.device)
    app.state.ready = True

    @app.get("/v1/info")
    def info():
        return {"model_id": config.model_id, "vocab_size": len(vocab)}

    @app.get("/v1/vocab")
    def vocab_endpoint(prefix: str = ""):
        matches = sorted(
            (token_id, text) for text, token_id in vocab.items() if text.startswith(prefix)
        )
        return {"tokens": [{"id": token_id, "text": text} for token_id, text in matches]}

    @app.post("/v1/score")
    def score(request: ScoreRequest):
        if not app.state.ready:
            raise HTTPException(status_code=503, detail="model not ready")
        for i, candidate in enumerate(request.candidates):
            if candidate not in vocab:
                return JSONResponse(
                    status_code=400,
                    content={"error": f"unknown token {candidate!r}", "index": i},
                )
        if not request.prompt:
            return JSONResponse(
                status_code=400, content={"error": "empty prompt", "index": -1}
            )
        encoded = tokenizer(request.prompt, return_tensors="pt")
        input_ids = encoded["input_ids"]
        if input_ids.shape[1] > config.max_prompt_length:
            raise HTTPException(
                status_code=413,
                detail=f"prompt has {input_ids.shape[1]} tokens, "
                       f"limit is {config.max_prompt_length}",
            )
        with lock, torch.inference_mode():
            logits = model(input_ids.to(device)).logits[0, -1, :]
        return {"logits": [float(logits[vocab[c]]) for c in request.candidates]}

    return app
