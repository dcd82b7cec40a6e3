import json

import pytest

torch = pytest.importorskip("torch")
pytest.importorskip("transformers")

from clinevent.dataset import save_ontology, write_dataset
from clinevent.fixtures import fixture_corpus
from clinevent.prompts import CompileConfig, compile_ed, compile_mi, write_prompts

from genservice.finetune import TINY_TEST_MODEL, FinetuneConfig, ModelBackend, finetune


@pytest.fixture(scope="module")
def tiny_setup(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("finetune")
    corpus, ontology = fixture_corpus(6)
    train_sents = [s for s in corpus if s.doc_id < "case_004"]
    dev_sents = [s for s in corpus if s.doc_id >= "case_004"][:3]

    # joint training data: detection queries mixed with mention identification
    cfg = CompileConfig(neg_ratio=1)
    instances = []
    for s in train_sents[:10]:
        instances.extend(compile_ed(s, ontology, cfg, mode="train"))
        instances.extend(compile_mi(s, CompileConfig(mention_kind="trigger"), mode="train"))
    write_prompts(tmp / "train.jsonl", instances)
    write_dataset(tmp / "dev.jsonl", dev_sents)
    save_ontology(tmp / "ont.json", ontology)
    return tmp, len(instances)


def test_finetune_tiny_model_selects_checkpoint(tiny_setup):
    tmp, n_instances = tiny_setup
    assert n_instances > 0
    cfg = FinetuneConfig(
        model=TINY_TEST_MODEL,
        epochs=2,
        batch_size=8,
        max_input_length=96,
        max_target_length=24,
        max_new_tokens=8,
        out_dir=str(tmp / "ckpt"),
    )
    out_dir = finetune(tmp / "train.jsonl", tmp / "dev.jsonl", tmp / "ont.json", cfg)
    history = json.loads((out_dir / "history.json").read_text())
    assert len(history["epochs"]) == 2
    assert all("loss" in e and "dev_arg_cls_f1" in e for e in history["epochs"])
    assert history["best_dev_arg_cls_f1"] == max(e["dev_arg_cls_f1"] for e in history["epochs"])
    assert (out_dir / "config.json").exists()  # reloadable checkpoint


def test_finetune_rejects_empty_training_file(tiny_setup, tmp_path):
    tmp, _ = tiny_setup
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    with pytest.raises(ValueError):
        finetune(
            empty, tmp / "dev.jsonl", tmp / "ont.json",
            FinetuneConfig(model=TINY_TEST_MODEL, epochs=1, out_dir=str(tmp_path / "x")),
        )


def test_model_backend_pairs_by_request_id(tiny_setup):
    from clinevent.backends import GenRequest
    from genservice.finetune import _build_model

    tokenizer, model = _build_model(TINY_TEST_MODEL, "cpu")
    backend = ModelBackend(model, tokenizer, "cpu", FinetuneConfig(model=TINY_TEST_MODEL, batch_size=2))
    requests = [GenRequest(f"input {i}", max_new_tokens=4, request_id=f"r{i}") for i in range(5)]
    results = dict(backend.generate(requests))
    assert set(results) == {f"r{i}" for i in range(5)}
    assert all(isinstance(v, str) for v in results.values())
