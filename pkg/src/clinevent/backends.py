"""Generation backends behind one batch interface.

Three implementations: a gold oracle that renders the gold annotations
for each query (with corruption knobs to simulate model error), a replay
cache that answers from a recorded JSONL file, and an HTTP client for a
remote generation service. All pair answers to requests by request_id, so
callers never depend on response ordering.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import time
from dataclasses import dataclass
from pathlib import Path

import requests as _requests

from .brat import SpanSet
from .dataset import Ontology, SentenceInstance
from .prompts import (
    KIND_TO_MI_TASK,
    MI_TASKS,
    Task,
    mentions_of_kind,
    render_ed_target,
    render_eae_target,
    render_mi_target,
    render_role_target,
    render_type_target,
    word_spans,
)
from . import decoding

log = logging.getLogger(__name__)

DEFAULT_NUM_BEAMS = 2
DEFAULT_MAX_NEW_TOKENS = 30


class BackendUnavailable(RuntimeError):
    pass


class CacheMiss(KeyError):
    pass


class ProtocolViolation(AssertionError):
    """A generation service failed the wire-protocol contract."""


@dataclass
class GenRequest:
    input_seq: str
    num_beams: int = DEFAULT_NUM_BEAMS
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS
    request_id: str = ""

    def __post_init__(self):
        if self.num_beams < 1:
            raise ValueError("num_beams must be >= 1")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")


@dataclass
class CorruptionConfig:
    drop_prob: float = 0.0
    jitter_prob: float = 0.0
    jitter_width: int = 1
    confuse_type_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("drop_prob", "jitter_prob", "confuse_type_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")

    @property
    def active(self) -> bool:
        return bool(self.drop_prob or self.jitter_prob or self.confuse_type_prob)


# ---------------------------------------------------------------------------
# Counter-based randomness: every decision is a pure function of
# (seed, decision key), so outputs do not depend on batch composition and
# drop decisions nest across increasing drop_prob values.


def _uniform(seed: int, *parts) -> float:
    payload = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(f"{seed}|{payload}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def _pick(seed: int, options: list, *parts):
    assert options
    idx = int(_uniform(seed, "pick", *parts) * len(options)) % len(options)
    return options[idx]


def _jitter_span(
    cfg: CorruptionConfig, passage: str, span: SpanSet, *key
) -> str | None:
    """Word-aligned boundary jitter; returns the new surface, or None to
    keep the original. Only contiguous, word-aligned spans are jittered."""
    if len(span.fragments) != 1:
        return None
    words = word_spans(passage)
    starts = {s: i for i, (s, _) in enumerate(words)}
    ends = {e: i for i, (_, e) in enumerate(words)}
    s, e = span.fragments[0]
    if s not in starts or e not in ends:
        return None
    i, j = starts[s], ends[e]
    rng = random.Random(int(_uniform(cfg.seed, "jitter-delta", *key) * 2**53))
    for _ in range(4):  # a few attempts to land on a valid different span
        a = i + rng.randint(-cfg.jitter_width, cfg.jitter_width)
        b = j + rng.randint(-cfg.jitter_width, cfg.jitter_width)
        a = max(0, a)
        b = min(len(words) - 1, b)
        if a > b or (a, b) == (i, j):
            continue
        return passage[words[a][0] : words[b][1]]
    return None


def _corrupt_items(
    items: list[tuple[str, SpanSet | None]],
    cfg: CorruptionConfig,
    passage: str,
    key_prefix: tuple,
) -> list[str]:
    """Apply drop and jitter per item; returns surviving surfaces in order."""
    out = []
    for idx, (surface, span) in enumerate(items):
        key = key_prefix + (idx, surface)
        if cfg.drop_prob and _uniform(cfg.seed, "drop", *key) < cfg.drop_prob:
            continue
        if cfg.jitter_prob and _uniform(cfg.seed, "jitter", *key) < cfg.jitter_prob:
            if span is None:
                grounded = decoding.ground_surfaces([surface], passage)[0]
                span = grounded
            if span is not None:
                jittered = _jitter_span(cfg, passage, span, *key)
                if jittered:
                    out.append(jittered)
                    continue
        out.append(surface)
    return out


def corrupt(
    gold_target: str,
    cfg: CorruptionConfig,
    task: Task = Task.ED,
    passage: str = "",
    query_role: str | None = None,
    legal_labels: list[str] | None = None,
    key: str = "",
) -> str:
    """Corrupt a rendered gold target while keeping it format-valid.

    Extraction targets lose mentions with drop_prob and get word-boundary
    jitter with jitter_prob; typing targets swap their label for another
    legal one with confuse_type_prob.
    """
    surfaces = decoding.parse_output(task, gold_target, query_role)

    if task in (Task.ED_TYPING, Task.EAE_TYPING):
        label = surfaces[0] if surfaces else None
        if (
            label is not None
            and legal_labels
            and cfg.confuse_type_prob
            and _uniform(cfg.seed, "confuse", key, label) < cfg.confuse_type_prob
        ):
            others = [l for l in legal_labels if l != label]
            if others:
                label = _pick(cfg.seed, others, "confuse-target", key, label)
        if task is Task.ED_TYPING:
            return render_type_target(label)
        return render_role_target(label)

    spans = decoding.ground_surfaces(surfaces, passage) if passage else [None] * len(surfaces)
    survivors = _corrupt_items(list(zip(surfaces, spans)), cfg, passage, (key,))
    if task in MI_TASKS:
        return render_mi_target(survivors)
    if task is Task.ED:
        return render_ed_target(survivors)
    if task is Task.EAE:
        role = query_role or (gold_target.split(" is ")[0] if " is " in gold_target else "")
        return render_eae_target(role, survivors)
    raise ValueError(f"unknown task {task!r}")


# ---------------------------------------------------------------------------
# Gold oracle


class OracleBackend:
    """Answers every query with the rendered gold target, optionally
    corrupted. Requires request ids produced by PromptInstance.request_key.

    Type confusion is applied per gold event with a draw keyed on the
    event alone, so a confused trigger consistently disappears from its
    true type's query and reappears under the confused type.
    """

    def __init__(
        self,
        corpus: list[SentenceInstance],
        ontology: Ontology,
        corruption: CorruptionConfig | None = None,
    ):
        self.sentences = {s.key: s for s in corpus}
        self.ontology = ontology
        self.corruption = corruption or CorruptionConfig()

    # -- corruption draws ---------------------------------------------------

    def _effective_type(self, sentence: SentenceInstance, event) -> str:
        cfg = self.corruption
        key = ("confuse-ev", sentence.doc_id, sentence.sent_index,
               event.trigger.span.fragments, event.event_type)
        if cfg.confuse_type_prob and _uniform(cfg.seed, *key) < cfg.confuse_type_prob:
            others = [t for t in self.ontology.type_names if t != event.event_type]
            if others:
                return _pick(cfg.seed, others, *key)
        return event.event_type

    def _event_survives(self, sentence: SentenceInstance, event) -> bool:
        cfg = self.corruption
        if not cfg.drop_prob:
            return True
        key = ("drop-ev", sentence.doc_id, sentence.sent_index,
               event.trigger.span.fragments, event.event_type)
        return _uniform(cfg.seed, *key) >= cfg.drop_prob

    def _arg_survives(self, sentence: SentenceInstance, event, arg) -> bool:
        cfg = self.corruption
        if not cfg.drop_prob:
            return True
        key = ("drop-arg", sentence.doc_id, sentence.sent_index,
               event.trigger.span.fragments, event.event_type,
               arg.role, arg.mention.span.fragments)
        return _uniform(cfg.seed, *key) >= cfg.drop_prob

    def _maybe_jitter(self, sentence: SentenceInstance, mention, *key) -> str:
        cfg = self.corruption
        if cfg.jitter_prob and _uniform(cfg.seed, "jitter", *key) < cfg.jitter_prob:
            jittered = _jitter_span(cfg, sentence.text, mention.span, *key)
            if jittered:
                return jittered
        return mention.surface

    # -- per-task gold answers ----------------------------------------------

    def _answer_mi(self, sentence: SentenceInstance, meta: dict) -> str:
        kind = {v: k for k, v in KIND_TO_MI_TASK.items()}[Task(meta["task"])]
        gold = mentions_of_kind(sentence, kind)
        window = meta.get("window")
        if window:
            words = word_spans(sentence.text)
            char_start = words[window[0]][0]
            char_end = words[window[1] - 1][1]
            gold = [m for m in gold if m.span.within(char_start, char_end)]
        cfg = self.corruption
        surfaces = []
        for m in gold:
            key = ("mi", kind, sentence.doc_id, sentence.sent_index, m.span.fragments)
            if cfg.drop_prob and _uniform(cfg.seed, "drop", *key) < cfg.drop_prob:
                continue
            surfaces.append(self._maybe_jitter(sentence, m, *key))
        return render_mi_target(surfaces)

    def _answer_ed(self, sentence: SentenceInstance, meta: dict) -> str:
        queried = meta["query_event_type"]
        surfaces = []
        seen = set()
        for event in sorted(
            sentence.events, key=lambda e: (e.trigger.span.fragments, e.event_type)
        ):
            if self._effective_type(sentence, event) != queried:
                continue
            if not self._event_survives(sentence, event):
                continue
            if event.trigger.span.fragments in seen:
                continue
            seen.add(event.trigger.span.fragments)
            key = ("ed", sentence.doc_id, sentence.sent_index,
                   event.trigger.span.fragments, event.event_type)
            surfaces.append(self._maybe_jitter(sentence, event.trigger, *key))
        return render_ed_target(surfaces)

    def _find_event(self, sentence: SentenceInstance, meta: dict):
        span = meta.get("trigger_span")
        surface = meta.get("trigger_surface")
        queried_type = meta.get("query_event_type")
        candidates = []
        if span is not None:
            fragments = tuple(tuple(p) for p in span)
            candidates = [
                e for e in sentence.events if e.trigger.span.fragments == fragments
            ]
        if not candidates and surface is not None:
            candidates = [e for e in sentence.events if e.trigger.surface == surface]
        if not candidates:
            return None
        for e in candidates:
            if e.event_type == queried_type:
                return e
        return candidates[0]

    def _answer_eae(self, sentence: SentenceInstance, meta: dict) -> str:
        role = meta["query_role"]
        event = self._find_event(sentence, meta)
        if event is None:
            return render_eae_target(role, [])
        surfaces = []
        for arg in event.arguments:
            if arg.role != role:
                continue
            if not self._arg_survives(sentence, event, arg):
                continue
            key = ("eae", sentence.doc_id, sentence.sent_index,
                   event.trigger.span.fragments, event.event_type,
                   arg.role, arg.mention.span.fragments)
            surfaces.append(self._maybe_jitter(sentence, arg.mention, *key))
        return render_eae_target(role, surfaces)

    def _answer_typing(self, sentence: SentenceInstance, meta: dict, task: Task) -> str:
        fragments = tuple(tuple(p) for p in meta["candidate_span"])
        if task is Task.ED_TYPING:
            for event in sentence.events:
                if event.trigger.span.fragments == fragments:
                    return render_type_target(self._effective_type(sentence, event))
            return render_type_target(None)
        event = self._find_event(sentence, meta)
        if event is not None:
            for arg in event.arguments:
                if arg.mention.span.fragments == fragments:
                    return render_role_target(arg.role)
        return render_role_target(None)

    def answer(self, meta: dict) -> str:
        task = Task(meta["task"])
        key = (meta["doc_id"], meta["sent_index"])
        sentence = self.sentences.get(tuple(key))
        if sentence is None:
            raise BackendUnavailable(f"oracle has no gold sentence for {key}")
        if task in MI_TASKS:
            return self._answer_mi(sentence, meta)
        if task is Task.ED:
            return self._answer_ed(sentence, meta)
        if task is Task.EAE:
            return self._answer_eae(sentence, meta)
        return self._answer_typing(sentence, meta, task)

    def generate(self, batch: list[GenRequest]) -> list[tuple[str, str]]:
        out = []
        for req in batch:
            try:
                meta = json.loads(req.request_id)
            except (TypeError, json.JSONDecodeError) as exc:
                raise BackendUnavailable(
                    "oracle backend needs request ids from PromptInstance.request_key"
                ) from exc
            out.append((req.request_id, self.answer(meta)))
        return out


# ---------------------------------------------------------------------------
# Replay cache


class ReplayCache:
    """Append-only JSONL store of {"input", "output"} pairs keyed by the
    exact input sequence; doubles as a resumable write-through cache."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self.entries: dict[str, str] = {}
        if self.path and self.path.exists():
            with open(self.path, encoding="utf-8") as f:
                for line in f:
                    if line.strip():
                        record = json.loads(line)
                        self.entries[record["input"]] = record["output"]

    def __contains__(self, input_seq: str) -> bool:
        return input_seq in self.entries

    def get(self, input_seq: str) -> str | None:
        return self.entries.get(input_seq)

    def append(self, input_seq: str, output: str) -> None:
        self.entries[input_seq] = output
        if self.path:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps({"input": input_seq, "output": output}, ensure_ascii=False) + "\n")


class ReplayBackend:
    """Answers strictly from a recorded cache; unknown inputs are errors."""

    def __init__(self, cache: ReplayCache):
        self.cache = cache

    def generate(self, batch: list[GenRequest]) -> list[tuple[str, str]]:
        out = []
        for req in batch:
            answer = self.cache.get(req.input_seq)
            if answer is None:
                raise CacheMiss(f"no cached output for input: {req.input_seq[:80]!r}...")
            out.append((req.request_id, answer))
        return out


# ---------------------------------------------------------------------------
# Remote HTTP client


class RemoteBackend:
    """Client for the generation wire protocol.

    POST {url}/v1/generate with {"inputs": [...], "num_beams": n,
    "max_new_tokens": m}; the response carries {"outputs": [...]} in the
    same order. Batches are capped at batch_size and retried with
    exponential backoff on transient failures.
    """

    TRANSIENT_STATUS = {429, 500, 502, 503, 504}

    def __init__(
        self,
        url: str,
        batch_size: int = 32,
        max_retries: int = 3,
        backoff: float = 0.5,
        timeout: float = 120.0,
        jobs: int = 1,
        session=None,
    ):
        self.url = url.rstrip("/")
        self.batch_size = max(1, batch_size)
        self.max_retries = max_retries
        self.backoff = backoff
        self.timeout = timeout
        self.jobs = max(1, jobs)
        self.session = session or _requests.Session()

    def _post(self, inputs: list[str], num_beams: int, max_new_tokens: int) -> list[str]:
        body = {"inputs": inputs, "num_beams": num_beams, "max_new_tokens": max_new_tokens}
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self.session.post(
                    f"{self.url}/v1/generate", json=body, timeout=self.timeout
                )
            except _requests.RequestException as exc:
                last_error = exc
                log.warning("generate request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code == 200:
                try:
                    outputs = resp.json()["outputs"]
                except (ValueError, KeyError) as exc:
                    raise BackendUnavailable(f"malformed response body: {exc}") from exc
                if not isinstance(outputs, list) or len(outputs) != len(inputs):
                    raise BackendUnavailable(
                        f"expected {len(inputs)} outputs, got {outputs!r:.200}"
                    )
                return [str(o) for o in outputs]
            if resp.status_code in self.TRANSIENT_STATUS:
                last_error = BackendUnavailable(f"HTTP {resp.status_code}")
                log.warning("transient HTTP %d (attempt %d)", resp.status_code, attempt + 1)
                continue
            raise BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
        raise BackendUnavailable(f"generation service unreachable: {last_error}")

    def generate(self, batch: list[GenRequest]) -> list[tuple[str, str]]:
        # one wire call per (num_beams, max_new_tokens) chunk; jobs bounds
        # how many chunks are in flight at once
        chunks: list[list[GenRequest]] = []
        groups: dict[tuple[int, int], list[GenRequest]] = {}
        for req in batch:
            groups.setdefault((req.num_beams, req.max_new_tokens), []).append(req)
        for requests_ in groups.values():
            for i in range(0, len(requests_), self.batch_size):
                chunks.append(requests_[i : i + self.batch_size])

        def run(chunk: list[GenRequest]) -> list[tuple[str, str]]:
            outputs = self._post(
                [r.input_seq for r in chunk], chunk[0].num_beams, chunk[0].max_new_tokens
            )
            return [(r.request_id, o) for r, o in zip(chunk, outputs)]

        out: list[tuple[str, str]] = []
        if self.jobs == 1 or len(chunks) <= 1:
            for chunk in chunks:
                out.extend(run(chunk))
        else:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                for result in pool.map(run, chunks):
                    out.extend(result)
        return out


def verify_protocol(url: str, expected_output=None, session=None) -> None:
    """Check a generation service against the wire-protocol contract.

    Verifies response shape and positional ordering (also across client-side
    batch splits), per-request decoding parameters, determinism, and the
    error code for a malformed body. `expected_output` maps an input string
    to the output the server must produce when its transform is known.
    Raises ProtocolViolation on the first failure.
    """
    session = session or _requests.Session()
    backend = RemoteBackend(url, batch_size=2, max_retries=0, session=session)

    inputs = [f"conformance sequence {i}" for i in range(5)]
    requests_ = [GenRequest(x, request_id=f"r{i}") for i, x in enumerate(inputs)]
    try:
        results = dict(backend.generate(requests_))
    except BackendUnavailable as exc:
        raise ProtocolViolation(f"batched generate failed: {exc}") from exc
    if set(results) != {f"r{i}" for i in range(5)}:
        raise ProtocolViolation(f"missing or extra answers: {sorted(results)}")
    for i, x in enumerate(inputs):
        out = results[f"r{i}"]
        if not isinstance(out, str):
            raise ProtocolViolation(f"output for {x!r} is not a string: {out!r}")
        if expected_output is not None and out != expected_output(x):
            raise ProtocolViolation(
                f"positional correspondence broken: {x!r} -> {out!r}"
            )

    if dict(backend.generate(requests_)) != results:
        raise ProtocolViolation("identical batch produced different outputs")

    tuned = GenRequest("conformance tuned", num_beams=4, max_new_tokens=7, request_id="t")
    try:
        ((rid, out),) = backend.generate([tuned])
    except BackendUnavailable as exc:
        raise ProtocolViolation(f"per-request decoding parameters rejected: {exc}") from exc
    if rid != "t" or not isinstance(out, str):
        raise ProtocolViolation("tuned request not answered positionally")

    resp = session.post(
        f"{url.rstrip('/')}/v1/generate",
        data=b'{"inputs": not json',
        headers={"Content-Type": "application/json"},
        timeout=30,
    )
    if resp.status_code != 400:
        raise ProtocolViolation(f"malformed body must yield 400, got {resp.status_code}")
