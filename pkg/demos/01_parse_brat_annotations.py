"""Parse BRAT standoff annotations into typed documents.

A document is a .txt file plus a .ann file of offset-anchored lines:
T lines are textbound mentions (possibly discontinuous, semicolon-
separated fragments), R lines are binary relations. Event, attribute and
note lines (E/A/#) ride along untouched.
"""

from clinevent import parse_document, serialize_annotations, validate_offsets

TEXT = (
    "An ill-defined mass at the origin of the right common carotid artery "
    "was seen. A mild heart attack followed."
)

ANN = """\
T1\tDetailed_description 3 14\till-defined
T2\tSign_symptom 15 19\tmass
T3\tBiological_structure 27 36;41 69\torigin of right common carotid artery
T4\tSeverity 81 85\tmild
T5\tDisease_disorder 86 98\theart attack
R1\tMODIFY Arg1:T1 Arg2:T2
R2\tMODIFY Arg1:T3 Arg2:T2
R3\tMODIFY Arg1:T4 Arg2:T5
#1\tAnnotatorNotes T3\tdiscontinuous span
"""

doc = parse_document("demo", TEXT, ANN)

print(f"document {doc.doc_id}: {len(doc.entities)} entities, {len(doc.relations)} relations\n")
for e in doc.entities:
    marker = " (discontinuous)" if len(e.span.fragments) > 1 else ""
    print(f"  {e.id:<3} {e.label:<22} {e.span.fragments}  {e.surface!r}{marker}")
print()
for r in doc.relations:
    print(f"  {r.id:<3} {r.label} {r.source_id} -> {r.target_id}")

# every surface string must equal the text at its offsets
problems = validate_offsets(doc)
print(f"\noffset discrepancies: {len(problems)}")

# parsing is lossless: serialize and reparse gives the identical document
assert parse_document("demo", TEXT, serialize_annotations(doc)) == doc
print("serialize -> reparse round trip: identical")
