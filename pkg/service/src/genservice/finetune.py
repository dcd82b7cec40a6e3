"""Teacher-forcing fine-tuning on the compiled-prompt JSONL export.

Trains with AdamW at 1e-5 on (input_seq, target_seq) pairs; mixing task
kinds in one file (argument extraction plus mention identification, say)
realizes joint auxiliary-task training. After each epoch the current
model drives the primary pipeline over a validation dataset, and the
checkpoint with the best pipelined argument-classification F1 is kept.

torch and transformers are imported lazily; everything else in the
service works without them.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from clinevent.dataset import load_ontology, read_dataset
from clinevent.evaluation import score
from clinevent.pipeline import PipelineConfig, run_full
from clinevent.prompts import read_prompts

log = logging.getLogger(__name__)

TINY_TEST_MODEL = "tiny-bytes"


@dataclass
class FinetuneConfig:
    model: str = "t5-large"
    device: str = "cpu"
    learning_rate: float = 1e-5
    epochs: int = 3
    batch_size: int = 8
    max_input_length: int = 512
    max_target_length: int = 64
    num_beams: int = 2
    max_new_tokens: int = 30
    out_dir: str = "checkpoint"


def _build_model(model_id: str, device: str):
    if model_id == TINY_TEST_MODEL:
        # byte-level tokenizer and a randomly initialized miniature model:
        # runs the full training path without downloading weights
        from transformers import ByT5Tokenizer, T5Config, T5ForConditionalGeneration

        tokenizer = ByT5Tokenizer()
        config = T5Config(
            vocab_size=384, d_model=64, d_ff=128, num_layers=2,
            num_heads=2, d_kv=32, decoder_start_token_id=0,
        )
        model = T5ForConditionalGeneration(config)
    else:
        from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModelForSeq2SeqLM.from_pretrained(model_id)
    return tokenizer, model.to(device)


class ModelBackend:
    """In-process generation backend satisfying the primary's interface."""

    def __init__(self, model, tokenizer, device: str, cfg: FinetuneConfig):
        self.model = model
        self.tokenizer = tokenizer
        self.device = device
        self.cfg = cfg

    def _generate_texts(self, inputs, num_beams, max_new_tokens):
        import torch

        encoded = self.tokenizer(
            inputs, return_tensors="pt", padding=True,
            truncation=True, max_length=self.cfg.max_input_length,
        ).to(self.device)
        with torch.no_grad():
            generated = self.model.generate(
                **encoded, num_beams=num_beams, max_new_tokens=max_new_tokens
            )
        return self.tokenizer.batch_decode(generated, skip_special_tokens=True)

    def generate(self, batch):
        out = []
        groups: dict = {}
        for req in batch:
            groups.setdefault((req.num_beams, req.max_new_tokens), []).append(req)
        for (num_beams, max_new_tokens), requests in groups.items():
            for i in range(0, len(requests), self.cfg.batch_size):
                chunk = requests[i : i + self.cfg.batch_size]
                texts = self._generate_texts(
                    [r.input_seq for r in chunk], num_beams, max_new_tokens
                )
                out.extend((r.request_id, t) for r, t in zip(chunk, texts))
        return out


def _pipelined_arg_cls_f1(backend, dev_corpus, ontology) -> float:
    predictions = run_full(dev_corpus, ontology, PipelineConfig(variant="vanilla"), backend)
    return score(predictions, dev_corpus).arg_cls.f1


def finetune(
    train_jsonl: str | Path,
    dev_dataset_jsonl: str | Path,
    ontology_json: str | Path,
    cfg: FinetuneConfig,
) -> Path:
    """Train on compiled prompts and keep the best checkpoint.

    The validation set is the dataset-form JSONL (not the prompt export)
    because checkpoint selection runs the full pipelined evaluation.
    Returns the checkpoint directory.
    """
    import torch

    instances = [i for i in read_prompts(train_jsonl) if i.target_seq]
    if not instances:
        raise ValueError(f"no trainable instances in {train_jsonl}")
    dev_corpus = read_dataset(dev_dataset_jsonl)
    ontology = load_ontology(ontology_json)

    tokenizer, model = _build_model(cfg.model, cfg.device)
    optimizer = torch.optim.AdamW(model.parameters(), lr=cfg.learning_rate)
    backend = ModelBackend(model, tokenizer, cfg.device, cfg)

    def batches():
        for i in range(0, len(instances), cfg.batch_size):
            chunk = instances[i : i + cfg.batch_size]
            encoded = tokenizer(
                [c.input_seq for c in chunk], return_tensors="pt", padding=True,
                truncation=True, max_length=cfg.max_input_length,
            )
            labels = tokenizer(
                [c.target_seq for c in chunk], return_tensors="pt", padding=True,
                truncation=True, max_length=cfg.max_target_length,
            ).input_ids
            labels[labels == tokenizer.pad_token_id] = -100
            yield encoded.to(cfg.device), labels.to(cfg.device)

    history = []
    best_f1 = -1.0
    best_state = None
    for epoch in range(cfg.epochs):
        model.train()
        total_loss = 0.0
        n_batches = 0
        for encoded, labels in batches():
            loss = model(**encoded, labels=labels).loss
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total_loss += float(loss.detach())
            n_batches += 1
        model.eval()
        f1 = _pipelined_arg_cls_f1(backend, dev_corpus, ontology)
        history.append({"epoch": epoch, "loss": total_loss / max(1, n_batches), "dev_arg_cls_f1": f1})
        log.info("epoch %d: loss %.4f, dev arg-cls F1 %.4f", epoch, history[-1]["loss"], f1)
        if f1 > best_f1:
            best_f1 = f1
            best_state = {k: v.detach().cpu().clone() for k, v in model.state_dict().items()}

    if best_state is not None:
        model.load_state_dict(best_state)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    (out_dir / "history.json").write_text(
        json.dumps({"best_dev_arg_cls_f1": best_f1, "epochs": history}, indent=2) + "\n",
        encoding="utf-8",
    )
    return out_dir
