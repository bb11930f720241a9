"""Load a causal LM and serve the scoring protocol over HTTP."""

from __future__ import annotations

import argparse

import torch
import uvicorn

from .app import SidecarConfig, create_app


def load_components(config: SidecarConfig):
    from transformers import AutoModelForCausalLM, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(config.model_id)
    model = AutoModelForCausalLM.from_pretrained(config.model_id)
    model.to(torch.device(config.device))
    model.eval()
    return model, tokenizer


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="labelforge-sidecar")
    parser.add_argument("--model", required=True, help="model identifier or local path")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8100)
    parser.add_argument("--max-prompt-length", type=int, default=2048)
    args = parser.parse_args(argv)

    config = SidecarConfig(
        model_id=args.model,
        device=args.device,
        host=args.host,
        port=args.port,
        max_prompt_length=args.max_prompt_length,
    )
    model, tokenizer = load_components(config)
    app = create_app(model, tokenizer, config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
