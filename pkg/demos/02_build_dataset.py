"""From a BRAT directory to the sentence-level event dataset.

Event-typed mentions become triggers; MODIFY relations between a trigger
and a non-event entity become role-labelled arguments (the entity's type
is the role). The ontology is induced from the data: per event type, the
observed roles ordered by frequency. Uses the bundled synthetic corpus so
the demo runs without any licensed data.
"""

import tempfile
from pathlib import Path

from clinevent import build_ontology, build_sentence_corpus, compute_stats, load_directory
from clinevent.dataset import split_corpus, downsample, write_dataset
from clinevent.fixtures import EVENT_TYPES, default_descriptions, write_fixture

workdir = Path(tempfile.mkdtemp(prefix="clinevent_demo_"))
brat_dir = workdir / "brat"
write_fixture(brat_dir, n_docs=30)

docs = load_directory(brat_dir)
corpus, dropped = build_sentence_corpus(docs, set(EVENT_TYPES))
ontology = build_ontology(corpus, default_descriptions())

print(compute_stats(corpus).as_table())
print(f"\ncross-sentence arguments dropped: {dropped}")

print("\ninduced ontology (role lists are frequency-ordered):")
for entry in ontology.event_types:
    roles = ", ".join(ontology.role_names(entry.name)) or "-"
    print(f"  {entry.name:<22} {roles}")

split = split_corpus([d.doc_id for d in docs], seed=7)
print(f"\nsplit sizes: train={len(split.train)} dev={len(split.dev)} test={len(split.test)}")
for proportion in (0.10, 0.25, 0.50, 0.75):
    subset = downsample(split.train, proportion, seed=1)
    print(f"  {int(proportion * 100):>3}% of train -> {len(subset)} documents")

out = workdir / "dataset.jsonl"
write_dataset(out, corpus)
print(f"\nwrote {out}")

example = next(s for s in corpus if any(ev.arguments for ev in s.events))
print(f"\nexample sentence: {example.text!r}")
for ev in example.events:
    args = ", ".join(f"{a.mention.surface} ({a.role})" for a in ev.arguments) or "no arguments"
    print(f"  [{ev.event_type}] {ev.trigger.surface!r}: {args}")
