import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from clinevent.backends import (
    BackendUnavailable,
    CacheMiss,
    CorruptionConfig,
    GenRequest,
    OracleBackend,
    RemoteBackend,
    ReplayBackend,
    ReplayCache,
    corrupt,
)
from clinevent.decoding import parse_output_checked
from clinevent.prompts import CompileConfig, Task, compile_ed, compile_eae, compile_mi


def _requests_for(instances):
    return [GenRequest(i.input_seq, request_id=i.request_key) for i in instances]


class TestOracle:
    def test_ed_returns_gold_trigger(self, corpus, ontology):
        backend = OracleBackend(corpus, ontology)
        s = next(x for x in corpus if x.events)
        instances = compile_ed(s, ontology, CompileConfig(), mode="inference")
        answers = dict(backend.generate(_requests_for(instances)))
        for inst in instances:
            expected = inst.meta["query_event_type"] in {ev.event_type for ev in s.events}
            text = answers[inst.request_key]
            assert text.startswith("Event trigger is")
            assert ("<trigger>" not in text) == expected

    def test_oracle_matches_compiled_train_targets(self, corpus, ontology):
        backend = OracleBackend(corpus, ontology)
        cfg = CompileConfig()
        for s in corpus[:20]:
            instances = compile_mi(s, cfg, mode="train")
            instances += compile_ed(s, ontology, cfg, mode="inference")
            for ev in s.events:
                instances += compile_eae(s, ev, ontology, cfg, mode="inference")
            answers = dict(backend.generate(_requests_for(instances)))
            for inst in instances:
                if inst.target_seq:
                    assert answers[inst.request_key] == inst.target_seq

    def test_full_drop_gives_placeholders(self, corpus, ontology):
        backend = OracleBackend(corpus, ontology, CorruptionConfig(drop_prob=1.0))
        s = next(x for x in corpus if x.events)
        instances = compile_ed(s, ontology, CompileConfig(), mode="inference")
        answers = dict(backend.generate(_requests_for(instances)))
        assert all(a == "Event trigger is <trigger>" for a in answers.values())

    def test_generate_idempotent_and_order_independent(self, corpus, ontology):
        backend = OracleBackend(corpus, ontology, CorruptionConfig(drop_prob=0.4, seed=5))
        s = next(x for x in corpus if x.events)
        instances = compile_ed(s, ontology, CompileConfig(), mode="inference")
        reqs = _requests_for(instances)
        first = dict(backend.generate(reqs))
        second = dict(backend.generate(list(reversed(reqs))))
        assert first == second

    def test_drop_decisions_nest_across_probabilities(self, corpus, ontology):
        s = next(x for x in corpus if len(x.events) >= 2)
        instances = compile_ed(s, ontology, CompileConfig(), mode="inference")
        surviving = []
        for drop in (0.2, 0.5, 0.8):
            backend = OracleBackend(corpus, ontology, CorruptionConfig(drop_prob=drop, seed=3))
            answers = dict(backend.generate(_requests_for(instances)))
            kept = set()
            for inst in instances:
                surfaces, _ = parse_output_checked(Task.ED, answers[inst.request_key])
                kept.update((inst.meta["query_event_type"], x) for x in surfaces)
            surviving.append(kept)
        assert surviving[0] >= surviving[1] >= surviving[2]

    def test_confusion_moves_trigger_between_queries(self, corpus, ontology):
        backend = OracleBackend(corpus, ontology, CorruptionConfig(confuse_type_prob=1.0, seed=1))
        s = next(x for x in corpus if x.events)
        instances = compile_ed(s, ontology, CompileConfig(), mode="inference")
        answers = dict(backend.generate(_requests_for(instances)))
        predicted = {}
        for inst in instances:
            surfaces, _ = parse_output_checked(Task.ED, answers[inst.request_key])
            for surface in surfaces:
                predicted.setdefault(surface, set()).add(inst.meta["query_event_type"])
        gold = {ev.trigger.surface: ev.event_type for ev in s.events}
        for surface, types in predicted.items():
            assert gold[surface] not in types  # every event was confused away


class TestCorrupt:
    def test_zero_config_is_identity(self):
        cfg = CorruptionConfig()
        target = "Mentions are a [sep] b"
        assert corrupt(target, cfg, task=Task.MI_ENTITY, passage="a b") == target

    def test_full_drop(self):
        cfg = CorruptionConfig(drop_prob=1.0)
        out = corrupt("Mentions are a [sep] b", cfg, task=Task.MI_ENTITY, passage="a b")
        assert out == "Mentions are <mention>"

    def test_jitter_extends_to_passage_substring(self):
        cfg = CorruptionConfig(jitter_prob=1.0, jitter_width=1, seed=0)
        passage = "massive heart attack today"
        out = corrupt(
            "Event trigger is heart attack", cfg, task=Task.ED, passage=passage, key="k"
        )
        surfaces, malformed = parse_output_checked(Task.ED, out)
        assert not malformed
        for s in surfaces:
            assert s in passage

    def test_typing_confusion_swaps_label(self):
        cfg = CorruptionConfig(confuse_type_prob=1.0, seed=2)
        out = corrupt(
            "Event type is Sign_symptom.",
            cfg,
            task=Task.ED_TYPING,
            legal_labels=["Sign_symptom", "Medication", "Date"],
        )
        assert out in ("Event type is Medication.", "Event type is Date.")

    @pytest.mark.parametrize("seed", range(5))
    def test_corrupted_outputs_stay_format_valid(self, corpus, ontology, seed):
        cfg = CorruptionConfig(drop_prob=0.3, jitter_prob=0.4, jitter_width=2, seed=seed)
        backend = OracleBackend(corpus, ontology, cfg)
        compile_cfg = CompileConfig()
        for s in corpus[:10]:
            instances = compile_ed(s, ontology, compile_cfg, mode="inference")
            for ev in s.events:
                instances += compile_eae(s, ev, ontology, compile_cfg, mode="inference")
            for rid, text in backend.generate(_requests_for(instances)):
                meta = json.loads(rid)
                _, malformed = parse_output_checked(
                    Task(meta["task"]), text, meta.get("query_role")
                )
                assert not malformed, text

    def test_probabilities_validated(self):
        with pytest.raises(ValueError):
            CorruptionConfig(drop_prob=1.5)


class TestReplay:
    def test_round_trip_and_miss(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        cache = ReplayCache(path)
        cache.append("input one", "output one")
        again = ReplayCache(path)
        backend = ReplayBackend(again)
        assert backend.generate([GenRequest("input one", request_id="a")]) == [("a", "output one")]
        with pytest.raises(CacheMiss):
            backend.generate([GenRequest("unseen", request_id="b")])

    def test_last_write_wins(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        cache = ReplayCache(path)
        cache.append("x", "first")
        cache.append("x", "second")
        assert ReplayCache(path).get("x") == "second"


# ---------------------------------------------------------------------------
# Wire-protocol contract suite. Runs against any server speaking the
# generation protocol; reused by the inference service's tests.


class _StubHandler(BaseHTTPRequestHandler):
    fail_next = 0

    def do_POST(self):
        if self.path != "/v1/generate":
            self.send_error(404)
            return
        if _StubHandler.fail_next > 0:
            _StubHandler.fail_next -= 1
            self.send_error(503)
            return
        length = int(self.headers["Content-Length"])
        try:
            body = json.loads(self.rfile.read(length))
            inputs = body["inputs"]
        except (ValueError, KeyError):
            self.send_error(400)
            return
        payload = json.dumps({"outputs": [f"echo: {x}" for x in inputs]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture()
def stub_server():
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


class TestRemoteBackend:
    def test_contract_against_stub(self, stub_server):
        from clinevent.backends import verify_protocol

        verify_protocol(stub_server, expected_output=lambda x: f"echo: {x}")

    def test_contract_detects_shape_violations(self, stub_server):
        from clinevent.backends import ProtocolViolation, verify_protocol

        with pytest.raises(ProtocolViolation):
            verify_protocol(stub_server, expected_output=lambda x: "always wrong")

    def test_retries_transient_failures(self, stub_server):
        _StubHandler.fail_next = 2
        backend = RemoteBackend(stub_server, max_retries=3, backoff=0.01)
        out = backend.generate([GenRequest("hello", request_id="x")])
        assert out == [("x", "echo: hello")]

    def test_unavailable_after_retry_budget(self, stub_server):
        _StubHandler.fail_next = 5
        backend = RemoteBackend(stub_server, max_retries=1, backoff=0.01)
        with pytest.raises(BackendUnavailable):
            backend.generate([GenRequest("hello", request_id="x")])
        _StubHandler.fail_next = 0

    def test_unreachable_host(self):
        backend = RemoteBackend("http://127.0.0.1:1", max_retries=0)
        with pytest.raises(BackendUnavailable):
            backend.generate([GenRequest("hello", request_id="x")])

    def test_parallel_batches_keep_pairing(self, stub_server):
        backend = RemoteBackend(stub_server, batch_size=1, jobs=4)
        requests = [GenRequest(f"in{i}", request_id=f"r{i}") for i in range(8)]
        results = dict(backend.generate(requests))
        assert results == {f"r{i}": f"echo: in{i}" for i in range(8)}
