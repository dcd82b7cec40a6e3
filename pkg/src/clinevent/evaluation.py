"""Scoring of prediction sets against gold and per-stage error attribution.

Four micro-averaged tasks: trigger identification (span match), trigger
classification (span + event type), argument identification (span + event
type agreement) and argument classification (+ role). Matching is exact:
grounded predictions match on spans, text-only predictions fall back to
exact surface comparison, and matching is greedy one-to-one so duplicate
predictions cost false positives.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import SentenceInstance
from .pipeline import PredictedMention, PredictionSet

TASKS = ("trigger_id", "trigger_cls", "arg_id", "arg_cls")

ATTRIBUTION_BUCKETS = (
    "trigger_id_miss", "trigger_cls_miss", "arg_id_miss", "arg_cls_miss", "correct",
)


class AlignmentError(ValueError):
    pass


@dataclass
class TaskCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if (self.tp + self.fp) else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if (self.tp + self.fn) else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if (p + r) else 0.0

    def to_json(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "fn": self.fn,
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
        }


@dataclass
class MetricReport:
    trigger_id: TaskCounts = field(default_factory=TaskCounts)
    trigger_cls: TaskCounts = field(default_factory=TaskCounts)
    arg_id: TaskCounts = field(default_factory=TaskCounts)
    arg_cls: TaskCounts = field(default_factory=TaskCounts)

    def task(self, name: str) -> TaskCounts:
        return getattr(self, name)

    def to_json(self) -> dict:
        return {name: self.task(name).to_json() for name in TASKS}

    def format_table(self) -> str:
        header = (
            f"{'':14}| {'Identification':^26} | {'Classification':^26}\n"
            f"{'':14}| {'P':>7} {'R':>7} {'F1':>7}    | {'P':>7} {'R':>7} {'F1':>7}"
        )
        rows = []
        for label, ident, cls in (
            ("Trigger", self.trigger_id, self.trigger_cls),
            ("Argument", self.arg_id, self.arg_cls),
        ):
            rows.append(
                f"{label:14}| {100 * ident.precision:7.2f} {100 * ident.recall:7.2f} "
                f"{100 * ident.f1:7.2f}    | {100 * cls.precision:7.2f} "
                f"{100 * cls.recall:7.2f} {100 * cls.f1:7.2f}"
            )
        return "\n".join([header] + rows)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")


@dataclass
class ErrorAttribution:
    counts: dict[str, int] = field(default_factory=lambda: {b: 0 for b in ATTRIBUTION_BUCKETS})

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def to_json(self) -> dict:
        return dict(self.counts)


# ---------------------------------------------------------------------------
# Matching


def _mention_matches(pred: PredictedMention, gold_span, gold_surface: str) -> bool:
    if pred.span is not None:
        return pred.span.fragments == gold_span.fragments
    return pred.surface == gold_surface


def _greedy_match(predictions: list, gold: list, matches) -> TaskCounts:
    """One-to-one greedy matching; each gold item is claimed at most once."""
    counts = TaskCounts()
    claimed = [False] * len(gold)
    for pred in predictions:
        hit = False
        for i, g in enumerate(gold):
            if not claimed[i] and matches(pred, g):
                claimed[i] = True
                hit = True
                break
        if hit:
            counts.tp += 1
        else:
            counts.fp += 1
    counts.fn = claimed.count(False)
    return counts


def _accumulate(total: TaskCounts, part: TaskCounts) -> None:
    total.tp += part.tp
    total.fp += part.fp
    total.fn += part.fn


def score(pred: PredictionSet, gold: list[SentenceInstance]) -> MetricReport:
    """Micro-averaged P/R/F1 for the four tasks over an aligned corpus."""
    gold_by_key = {s.key: s for s in gold}
    for key in pred.sentences:
        if key not in gold_by_key:
            raise AlignmentError(f"predictions for unknown sentence {key}")

    report = MetricReport()
    for s in gold:
        sp = pred.get(s.key)
        pred_triggers = sp.triggers if sp else []
        pred_events = sp.events if sp else []

        gold_triggers = [(ev.trigger, ev.event_type) for ev in s.events]
        _accumulate(
            report.trigger_id,
            _greedy_match(
                pred_triggers, gold_triggers,
                lambda p, g: _mention_matches(p[0], g[0].span, g[0].surface),
            ),
        )
        _accumulate(
            report.trigger_cls,
            _greedy_match(
                pred_triggers, gold_triggers,
                lambda p, g: p[1] == g[1] and _mention_matches(p[0], g[0].span, g[0].surface),
            ),
        )

        pred_args = [
            (mention, role, ev.event_type)
            for ev in pred_events
            for mention, role in ev.arguments
        ]
        gold_args = [
            (a.mention, a.role, ev.event_type) for ev in s.events for a in ev.arguments
        ]
        _accumulate(
            report.arg_id,
            _greedy_match(
                pred_args, gold_args,
                lambda p, g: p[2] == g[2] and _mention_matches(p[0], g[0].span, g[0].surface),
            ),
        )
        _accumulate(
            report.arg_cls,
            _greedy_match(
                pred_args, gold_args,
                lambda p, g: p[2] == g[2] and p[1] == g[1]
                and _mention_matches(p[0], g[0].span, g[0].surface),
            ),
        )
    return report


# ---------------------------------------------------------------------------
# Error attribution


def attribute_errors(pred: PredictionSet, gold: list[SentenceInstance]) -> ErrorAttribution:
    """Assign every gold argument to the first pipeline stage that lost it.

    Stages are checked in order: trigger span found, trigger type correct,
    argument span found under that predicted event, role correct.
    """
    gold_by_key = {s.key: s for s in gold}
    for key in pred.sentences:
        if key not in gold_by_key:
            raise AlignmentError(f"predictions for unknown sentence {key}")

    attribution = ErrorAttribution()
    for s in gold:
        sp = pred.get(s.key)
        pred_triggers = sp.triggers if sp else []
        pred_events = sp.events if sp else []
        for ev in s.events:
            trigger_span_found = any(
                _mention_matches(pm, ev.trigger.span, ev.trigger.surface)
                for pm, _ in pred_triggers
            )
            matching_events = [
                pe for pe in pred_events
                if pe.event_type == ev.event_type
                and _mention_matches(pe.trigger, ev.trigger.span, ev.trigger.surface)
            ]
            for a in ev.arguments:
                if not trigger_span_found:
                    attribution.counts["trigger_id_miss"] += 1
                    continue
                if not matching_events:
                    attribution.counts["trigger_cls_miss"] += 1
                    continue
                found = [
                    (pm, role)
                    for pe in matching_events
                    for pm, role in pe.arguments
                    if _mention_matches(pm, a.mention.span, a.mention.surface)
                ]
                if not found:
                    attribution.counts["arg_id_miss"] += 1
                elif any(role == a.role for _, role in found):
                    attribution.counts["correct"] += 1
                else:
                    attribution.counts["arg_cls_miss"] += 1
    return attribution


# ---------------------------------------------------------------------------
# Aggregation over runs


@dataclass
class AggregateCell:
    mean: float
    stddev: float


@dataclass
class AggregateReport:
    cells: dict[str, dict[str, AggregateCell]]  # task -> metric -> cell
    n_runs: int

    def to_json(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "tasks": {
                task: {m: {"mean": c.mean, "stddev": c.stddev} for m, c in metrics.items()}
                for task, metrics in self.cells.items()
            },
        }


def aggregate_runs(reports: list[MetricReport]) -> AggregateReport:
    """Mean and population stddev of P/R/F1 per task across runs."""
    if not reports:
        raise ValueError("need at least one report")
    cells: dict[str, dict[str, AggregateCell]] = {}
    for task in TASKS:
        cells[task] = {}
        for metric in ("precision", "recall", "f1"):
            values = [getattr(r.task(task), metric) for r in reports]
            cells[task][metric] = AggregateCell(
                mean=statistics.fmean(values),
                stddev=statistics.pstdev(values) if len(values) > 1 else 0.0,
            )
    return AggregateReport(cells, len(reports))
