"""Pipelined inference: mention identification, event detection, argument
extraction.

The full variant runs standalone MI twice (trigger-kind and argument-kind
candidates), injects the candidates as markers, queries ED once per event
type and EAE once per legal role of each *predicted* event type. The
vanilla variant runs the same ED/EAE pipeline without markers. Every
generation exchange can be written through a replay cache so interrupted
runs resume without recomputation.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from .backends import GenRequest, ReplayCache
from .brat import SpanSet
from .dataset import Mention, Ontology, SentenceInstance
from .decoding import decode
from .prompts import (
    CompileConfig,
    PromptInstance,
    Task,
    KIND_TO_MI_TASK,
    build_eae_input,
    compile_ed,
    compile_mi,
    mentions_of_kind,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PredictedMention:
    """A predicted surface, grounded to a span when possible."""

    surface: str
    span: SpanSet | None = None

    def to_json(self) -> dict:
        return {"surface": self.surface, "span": self.span.to_json() if self.span else None}

    @classmethod
    def from_json(cls, d: dict) -> "PredictedMention":
        span = d.get("span")
        return cls(d["surface"], SpanSet.from_json(span) if span else None)


@dataclass
class PredictedEvent:
    trigger: PredictedMention
    event_type: str
    arguments: list[tuple[PredictedMention, str]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "trigger": self.trigger.to_json(),
            "event_type": self.event_type,
            "arguments": [{"mention": m.to_json(), "role": r} for m, r in self.arguments],
        }

    @classmethod
    def from_json(cls, d: dict) -> "PredictedEvent":
        return cls(
            PredictedMention.from_json(d["trigger"]),
            d["event_type"],
            [(PredictedMention.from_json(a["mention"]), a["role"]) for a in d.get("arguments", [])],
        )


@dataclass
class SentencePrediction:
    doc_id: str
    sent_index: int
    triggers: list[tuple[PredictedMention, str]] = field(default_factory=list)
    events: list[PredictedEvent] = field(default_factory=list)

    @property
    def key(self) -> tuple[str, int]:
        return (self.doc_id, self.sent_index)

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "sent_index": self.sent_index,
            "predicted_triggers": [
                {"mention": m.to_json(), "event_type": t} for m, t in self.triggers
            ],
            "predicted_events": [e.to_json() for e in self.events],
        }

    @classmethod
    def from_json(cls, d: dict) -> "SentencePrediction":
        return cls(
            d["doc_id"],
            d["sent_index"],
            [
                (PredictedMention.from_json(t["mention"]), t["event_type"])
                for t in d.get("predicted_triggers", [])
            ],
            [PredictedEvent.from_json(e) for e in d.get("predicted_events", [])],
        )


@dataclass
class PredictionSet:
    sentences: dict[tuple[str, int], SentencePrediction] = field(default_factory=dict)

    def add(self, pred: SentencePrediction) -> None:
        self.sentences[pred.key] = pred

    def get(self, key: tuple[str, int]) -> SentencePrediction | None:
        return self.sentences.get(key)

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for key in sorted(self.sentences):
                f.write(json.dumps(self.sentences[key].to_json(), ensure_ascii=False) + "\n")

    @classmethod
    def read(cls, path: str | Path) -> "PredictionSet":
        out = cls()
        with open(path, encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    out.add(SentencePrediction.from_json(json.loads(line)))
        return out


@dataclass
class PipelineConfig:
    variant: str = "full"  # vanilla | full
    marker_source: str = "standalone_mi"  # none | standalone_mi | gold
    compile: CompileConfig = field(default_factory=CompileConfig)
    ed_marker_kind: str = "trigger"  # trigger | entity, for marker ablations
    eae_marker_kind: str = "argument"  # argument | entity
    num_beams: int = 2
    max_new_tokens: int = 30

    def __post_init__(self):
        if self.variant not in ("vanilla", "full"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "full" and self.marker_source == "none":
            raise ValueError("the full variant requires a marker source")
        if self.variant == "vanilla":
            self.marker_source = "none"


STAGES = ("mi_trigger", "mi_argument", "ed", "eae")


def _normalize_backends(backends) -> dict[str, object]:
    if not isinstance(backends, dict):
        return {stage: backends for stage in STAGES}
    resolved = {}
    for stage in STAGES:
        candidate = backends.get(stage)
        if candidate is None and stage.startswith("mi_"):
            candidate = backends.get("mi")
        if candidate is None:
            candidate = backends.get("default")
        if candidate is None:
            raise ValueError(f"no backend for stage {stage!r}")
        resolved[stage] = candidate
    return resolved


def stage_caches(cache_dir: str | Path | None) -> dict[str, ReplayCache] | None:
    """One replay cache file per pipeline stage inside `cache_dir`.

    Per-stage files keep the trigger-kind and argument-kind mention
    queries apart: their input sequences are the bare passage and would
    collide in a single input-keyed cache.
    """
    if cache_dir is None:
        return None
    cache_dir = Path(cache_dir)
    if cache_dir.exists() and not cache_dir.is_dir():
        raise ValueError(f"cache path {cache_dir} must be a directory")
    cache_dir.mkdir(parents=True, exist_ok=True)
    return {stage: ReplayCache(cache_dir / f"{stage}.jsonl") for stage in STAGES}


def _generate(
    backend, instances: list[PromptInstance], cfg: PipelineConfig, cache: ReplayCache | None
) -> dict[str, str]:
    """Answer every instance, going through the replay cache when present.

    With a cache attached, the backend is treated as a pure function of
    the input sequence (the wire contract): duplicate inputs are sent
    once and share one recorded answer, so a later replay run reproduces
    this run exactly.
    """
    results: dict[str, str] = {}
    pending: list[GenRequest] = []
    waiters: dict[str, list[str]] = {}
    for inst in instances:
        rid = inst.request_key
        if cache is None:
            pending.append(GenRequest(inst.input_seq, cfg.num_beams, cfg.max_new_tokens, rid))
            continue
        hit = cache.get(inst.input_seq)
        if hit is not None:
            results[rid] = hit
            continue
        if inst.input_seq in waiters:
            waiters[inst.input_seq].append(rid)
            continue
        waiters[inst.input_seq] = [rid]
        pending.append(GenRequest(inst.input_seq, cfg.num_beams, cfg.max_new_tokens, rid))
    if pending:
        input_by_id = {req.request_id: req.input_seq for req in pending}
        for rid, output in backend.generate(pending):
            if cache is None:
                results[rid] = output
                continue
            input_seq = input_by_id[rid]
            cache.append(input_seq, output)
            for waiting_rid in waiters[input_seq]:
                results[waiting_rid] = output
    return results


# ---------------------------------------------------------------------------
# Mention identification stage


def _dedup_candidates(decoded_mentions: list[PredictedMention]) -> list[PredictedMention]:
    grounded: dict[tuple, PredictedMention] = {}
    text_only: dict[str, PredictedMention] = {}
    for pm in decoded_mentions:
        if pm.span is not None:
            grounded.setdefault(pm.span.fragments, pm)
        else:
            text_only.setdefault(pm.surface, pm)
    # a text-only duplicate of an already grounded surface is the same mention
    grounded_surfaces = {pm.surface for pm in grounded.values()}
    ordered = sorted(grounded.values(), key=lambda pm: pm.span.fragments)
    ordered.extend(
        pm for s, pm in sorted(text_only.items()) if s not in grounded_surfaces
    )
    return ordered


def run_mi_stage(
    sentences: list[SentenceInstance],
    backend,
    mi_cfg: CompileConfig,
    pipeline_cfg: PipelineConfig | None = None,
    cache: ReplayCache | None = None,  # this mention kind's own cache
) -> dict[tuple[str, int], list[PredictedMention]]:
    """Candidate mentions per sentence: union of the full-passage query and
    every window query, deduplicated by grounded span and ordered by
    passage position."""
    pipeline_cfg = pipeline_cfg or PipelineConfig(variant="vanilla", marker_source="none")
    instances = []
    for s in sentences:
        instances.extend(compile_mi(s, mi_cfg, mode="inference"))
    answers = _generate(backend, instances, pipeline_cfg, cache)

    by_sentence: dict[tuple[str, int], list[PredictedMention]] = {s.key: [] for s in sentences}
    text_by_key = {s.key: s.text for s in sentences}
    for inst in instances:
        key = (inst.meta["doc_id"], inst.meta["sent_index"])
        output = answers[inst.request_key]
        window_char = inst.meta.get("window_char") or [0, len(text_by_key[key])]
        context = text_by_key[key][window_char[0] : window_char[1]]
        result = decode(inst.task, output, context, inst.meta)
        for surface, span in zip(result.surfaces, result.grounded):
            if span is not None and window_char[0]:
                span = span.shifted(window_char[0])
            by_sentence[key].append(PredictedMention(surface, span))
    return {key: _dedup_candidates(found) for key, found in by_sentence.items()}


# ---------------------------------------------------------------------------
# Full pipeline


def _grounded_only(candidates: list[PredictedMention], label: str) -> list[Mention]:
    out = []
    for pm in candidates:
        if pm.span is not None:
            out.append(Mention(pm.span, pm.surface, label))
    return out


def _marker_candidates(
    corpus: list[SentenceInstance],
    cfg: PipelineConfig,
    backends: dict,
    caches: dict[str, ReplayCache] | None,
    kind: str,
    stage: str,
) -> dict[tuple[str, int], list[Mention]]:
    if cfg.variant != "full" or cfg.marker_source == "none":
        return {s.key: [] for s in corpus}
    if cfg.marker_source == "gold":
        return {s.key: mentions_of_kind(s, kind) for s in corpus}
    mi_cfg = replace(cfg.compile, mention_kind=kind, marker_mode="none")
    found = run_mi_stage(
        corpus, backends[stage], mi_cfg, cfg, caches.get(stage) if caches else None
    )
    return {key: _grounded_only(candidates, kind) for key, candidates in found.items()}


def _dedup_trigger_predictions(
    preds: list[tuple[PredictedMention, str]]
) -> list[tuple[PredictedMention, str]]:
    """Collapse identical (span, type) pairs; identical spans with distinct
    types all stay (a trigger may express several events)."""
    seen: set[tuple] = set()
    out = []
    for pm, event_type in preds:
        key = (pm.span.fragments if pm.span else None, pm.surface, event_type)
        if key in seen:
            continue
        seen.add(key)
        out.append((pm, event_type))
    return out


def run_full(
    corpus: list[SentenceInstance],
    ontology: Ontology,
    cfg: PipelineConfig,
    backends,
    caches: dict[str, ReplayCache] | str | Path | None = None,
) -> PredictionSet:
    """Run the MI -> ED -> EAE pipeline over a corpus.

    Deterministic given the config, seeds and backends; the EAE stage only
    starts after every ED answer for the corpus is in (predicted types
    select the role pools to query). `caches` may be a directory (one
    replay file per stage) or a prebuilt stage -> ReplayCache map.
    """
    backends = _normalize_backends(backends)
    if isinstance(caches, (str, Path)):
        caches = stage_caches(caches)
    trigger_markers = _marker_candidates(
        corpus, cfg, backends, caches, cfg.ed_marker_kind, "mi_trigger"
    )
    argument_markers = _marker_candidates(
        corpus, cfg, backends, caches, cfg.eae_marker_kind, "mi_argument"
    )

    # --- event detection ---------------------------------------------------
    ed_cfg = replace(
        cfg.compile,
        marker_mode="none" if cfg.variant == "vanilla" else "predicted",
    )
    ed_instances: list[PromptInstance] = []
    for s in corpus:
        ed_instances.extend(
            compile_ed(s, ontology, ed_cfg, mode="inference", candidates=trigger_markers[s.key])
        )
    ed_answers = _generate(
        backends["ed"], ed_instances, cfg, caches.get("ed") if caches else None
    )

    triggers_by_key: dict[tuple[str, int], list[tuple[PredictedMention, str]]] = {
        s.key: [] for s in corpus
    }
    text_by_key = {s.key: s.text for s in corpus}
    for inst in ed_instances:
        key = (inst.meta["doc_id"], inst.meta["sent_index"])
        result = decode(Task.ED, ed_answers[inst.request_key], text_by_key[key], inst.meta)
        queried_type = inst.meta["query_event_type"]
        for surface, span in zip(result.surfaces, result.grounded):
            triggers_by_key[key].append((PredictedMention(surface, span), queried_type))
    triggers_by_key = {k: _dedup_trigger_predictions(v) for k, v in triggers_by_key.items()}

    # --- argument extraction -----------------------------------------------
    events_by_key: dict[tuple[str, int], list[PredictedEvent]] = {
        key: [PredictedEvent(pm, t) for pm, t in pairs]
        for key, pairs in triggers_by_key.items()
    }
    eae_instances: list[PromptInstance] = []
    slot_by_request: dict[str, tuple[tuple[str, int], int, str]] = {}
    for s in corpus:
        for event_idx, event in enumerate(events_by_key[s.key]):
            for role_entry in ontology.roles_for(event.event_type):
                role = role_entry.name
                input_seq = build_eae_input(
                    s.text,
                    event.event_type,
                    ontology.description_of(event.event_type),
                    event.trigger.surface,
                    role,
                    role_entry.description,
                    trigger_span=event.trigger.span,
                    toggles=cfg.compile.segment_toggles,
                    marker_mentions=argument_markers[s.key] if cfg.variant == "full" else [],
                )
                meta = {
                    "task": Task.EAE.value,
                    "doc_id": s.doc_id,
                    "sent_index": s.sent_index,
                    "query_event_type": event.event_type,
                    "query_role": role,
                    "trigger_span": event.trigger.span.to_json() if event.trigger.span else None,
                    "trigger_surface": event.trigger.surface,
                }
                inst = PromptInstance(Task.EAE, input_seq, "", meta)
                eae_instances.append(inst)
                slot_by_request[inst.request_key] = (s.key, event_idx, role)
    eae_answers = _generate(
        backends["eae"], eae_instances, cfg, caches.get("eae") if caches else None
    )

    for inst in eae_instances:
        key, event_idx, role = slot_by_request[inst.request_key]
        result = decode(
            Task.EAE, eae_answers[inst.request_key], text_by_key[key], inst.meta, query_role=role
        )
        event = events_by_key[key][event_idx]
        for surface, span in zip(result.surfaces, result.grounded):
            event.arguments.append((PredictedMention(surface, span), role))

    predictions = PredictionSet()
    for s in corpus:
        predictions.add(
            SentencePrediction(
                s.doc_id,
                s.sent_index,
                triggers=triggers_by_key[s.key],
                events=events_by_key[s.key],
            )
        )
    return predictions
