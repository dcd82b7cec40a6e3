"""The three sequence formats: mention identification, event detection,
argument extraction, plus the typing reformulation.

Every task is text in, text out. MI sees the bare passage (full length
and sliding windows) and lists mentions in order. ED is asked once per
event type, EAE once per legal role; the answer either extracts spans or
produces a placeholder token. Candidate markers <m>...</m> and the
trigger wrap <trigger>...</trigger> carry position hints.
"""

from clinevent.fixtures import fixture_corpus
from clinevent.prompts import (
    CompileConfig,
    augment_training,
    compile_ed,
    compile_eae,
    compile_mi,
    compile_typing,
)

corpus, ontology = fixture_corpus(6)
sentence = next(s for s in corpus if any(len(ev.arguments) >= 2 for ev in s.events))
event = next(ev for ev in sentence.events if len(ev.arguments) >= 2)

print(f"passage: {sentence.text!r}\n")

print("== mention identification (full passage + sliding windows) ==")
for inst in compile_mi(sentence, CompileConfig(mention_kind="trigger"))[:3]:
    window = inst.meta["window"] or "full"
    print(f"  window {window}:")
    print(f"    input : {inst.input_seq!r}")
    print(f"    target: {inst.target_seq!r}")

print("\n== event detection (one query per event type) ==")
for inst in compile_ed(sentence, ontology, CompileConfig(neg_ratio=1, seed=3)):
    print(f"  [{inst.polarity}] {inst.meta['query_event_type']}")
    print(f"    input : {inst.input_seq.splitlines()!r}")
    print(f"    target: {inst.target_seq!r}")

print("\n== argument extraction (one query per legal role) ==")
for inst in compile_eae(sentence, event, ontology, CompileConfig(neg_ratio=1, seed=3)):
    print(f"  [{inst.polarity}] {inst.meta['query_role']}")
    print(f"    input : {inst.input_seq.splitlines()!r}")
    print(f"    target: {inst.target_seq!r}")

print("\n== gold markers + augmentation (marked and unmarked twins) ==")
marked = compile_ed(sentence, ontology, CompileConfig(neg_ratio=0, marker_mode="gold"))
for inst in augment_training(marked)[:2]:
    print(f"    input : {inst.input_seq.splitlines()[0]!r}")

print("\n== typing reformulation ==")
candidate = event.trigger
inst = compile_typing(sentence, candidate, None, ontology)
print(f"    input : {inst.input_seq!r}")
print(f"    target: {inst.target_seq!r}")
inst = compile_typing(sentence, event.arguments[0].mention, event, ontology)
print(f"    input : {inst.input_seq.splitlines()!r}")
print(f"    target: {inst.target_seq!r}")
