"""Generation service speaking the clinevent wire protocol.

`create_app` builds the FastAPI application, `serve` runs it with the
model loading in the background (requests return 503 until ready). The
"echo" model answers deterministically without any model weights, which
is enough for protocol conformance tests; real checkpoints are served via
transformers. `finetune` trains a sequence-to-sequence model on the
compiled-prompt JSONL export, selecting the checkpoint by pipelined
argument-classification F1 on a validation set.
"""

from .app import EchoGenerator, ServiceConfig, create_app, load_generator, serve

__all__ = [
    "EchoGenerator",
    "ServiceConfig",
    "create_app",
    "load_generator",
    "serve",
]
