"""Synthetic BRAT corpus for tests and demos.

Generates deterministic clinical-looking case notes with the real
MACCROBAT type inventory: event-typed mentions become triggers, MODIFY
relations attach role-labelled arguments in both argument orders, and
dedicated patterns cover discontinuous mentions, nested mentions,
multi-type triggers, duplicate surfaces, abbreviation guards and
annotation spans that suppress sentence boundaries.

Surfaces are chosen so every gold mention grounds to its own span under
leftmost-unused occurrence matching (duplicate surfaces always occupy the
leftmost occurrences, in one query's output).
"""

from __future__ import annotations

import random
from pathlib import Path

from .brat import RawDocument, parse_document
from .dataset import (
    Ontology,
    SentenceInstance,
    build_ontology,
    build_sentence_corpus,
)

EVENT_TYPES = (
    "Sign_symptom",
    "Diagnostic_procedure",
    "Therapeutic_procedure",
    "Disease_disorder",
    "Medication",
    "Clinical_event",
    "Lab_value",
    "Activity",
    "Other_event",
    "Outcome",
    "Date",
    "Time",
    "Duration",
)


class _DocBuilder:
    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        self.text = ""
        self.t_lines: list[str] = []
        self.r_lines: list[str] = []
        self.extras: list[str] = []
        self._next_t = 1
        self._next_r = 1

    @property
    def pos(self) -> int:
        return len(self.text)

    def write(self, s: str) -> None:
        self.text += s

    def annotate(self, fragments: list[tuple[int, int]], label: str) -> str:
        tid = f"T{self._next_t}"
        self._next_t += 1
        span_field = ";".join(f"{s} {e}" for s, e in fragments)
        surface = " ".join(self.text[s:e] for s, e in fragments)
        self.t_lines.append(f"{tid}\t{label} {span_field}\t{surface}")
        return tid

    def entity(self, surface: str, label: str) -> str:
        start = self.pos
        self.write(surface)
        return self.annotate([(start, start + len(surface))], label)

    def modify(self, arg_tid: str, trigger_tid: str, flip: bool = False) -> None:
        rid = f"R{self._next_r}"
        self._next_r += 1
        first, second = (trigger_tid, arg_tid) if flip else (arg_tid, trigger_tid)
        self.r_lines.append(f"{rid}\tMODIFY Arg1:{first} Arg2:{second}")

    def note(self, line: str) -> None:
        self.extras.append(line)

    def ann(self) -> str:
        lines = self.t_lines + self.r_lines + self.extras
        return "\n".join(lines) + "\n" if lines else ""


# ---------------------------------------------------------------------------
# Sentence patterns. Each writes one sentence (no trailing space) and its
# annotations; `flip` alternates the MODIFY argument order.


def _symptom_site(b: _DocBuilder, rng: random.Random, flip: bool) -> None:
    severity = rng.choice(["mild", "moderate", "severe", "marked"])
    symptom = rng.choice(
        ["chest tightness", "shortness of breath", "palpitations", "photophobia",
         "epigastric discomfort", "lower back stiffness"]
    )
    structure = rng.choice(
        ["ascending aorta", "sigmoid colon", "thyroid gland", "femoral head",
         "gallbladder wall", "quadriceps tendon"]
    )
    b.write("A ")
    sev = b.entity(severity, "Severity")
    b.write(" ")
    trig = b.entity(symptom, "Sign_symptom")
    b.write(" involving the ")
    site = b.entity(structure, "Biological_structure")
    b.write(" was documented.")
    b.modify(sev, trig, flip)
    b.modify(site, trig, not flip)


def _procedure_date(b: _DocBuilder, rng: random.Random, flip: bool) -> None:
    procedure = rng.choice(
        ["Echocardiography", "Colonoscopy", "Bronchoscopy", "Angiography", "Electromyography"]
    )
    date = rng.choice(
        ["14 March 2015", "2 June 2018", "19 October 2012", "7 January 2020"]
    )
    finding = rng.choice(
        ["pericardial effusion", "mucosal erythema", "luminal narrowing", "septal thickening"]
    )
    place = rng.choice(["bedside", "radiology suite", "endoscopy unit"])
    proc = b.entity(procedure, "Diagnostic_procedure")
    b.write(" performed at the ")
    loc = b.entity(place, "Nonbiological_location")
    b.write(" on ")
    b.entity(date, "Date")
    b.write(" demonstrated ")
    b.entity(finding, "Sign_symptom")
    b.write(".")
    b.modify(loc, proc, flip)


def _medication(b: _DocBuilder, rng: random.Random, flip: bool) -> None:
    med = rng.choice(["Metoprolol", "Amoxicillin", "Lisinopril", "Warfarin", "Prednisone"])
    dose = rng.choice(["25 mg", "500 mg", "81 mg", "10 mg"])
    route = rng.choice(["orally", "intravenously", "subcutaneously"])
    freq = rng.choice(["twice daily", "every eight hours", "once nightly"])
    trig = b.entity(med, "Medication")
    b.write(" ")
    dosage = b.entity(dose, "Dosage")
    b.write(" was given ")
    admin = b.entity(route, "Administration")
    b.write(" ")
    frequency = b.entity(freq, "Frequency")
    b.write(".")
    b.modify(dosage, trig, flip)
    b.modify(admin, trig, not flip)
    b.modify(frequency, trig, flip)


def _discontinuous_nested(b: _DocBuilder, rng: random.Random, flip: bool) -> None:
    # discontinuous argument plus an entity nested inside its second fragment
    detail = rng.choice(["ill-defined", "heterogeneous", "lobulated"])
    side = rng.choice(["right", "left"])
    b.write("An " if detail[0] in "aeiou" else "A ")
    det = b.entity(detail, "Detailed_description")
    b.write(" ")
    trig = b.entity("mass", "Sign_symptom")
    b.write(" at the ")
    frag1_start = b.pos
    b.write("origin of")
    frag1 = (frag1_start, b.pos)
    b.write(" the ")
    frag2_start = b.pos
    b.write(f"{side} common carotid artery")
    frag2 = (frag2_start, b.pos)
    b.write(" was detected.")
    structure = b.annotate([frag1, frag2], "Biological_structure")
    nested_start = frag2_start + len(f"{side} common ")
    b.annotate([(nested_start, nested_start + len("carotid artery"))], "Biological_structure")
    b.modify(det, trig, flip)
    b.modify(structure, trig, not flip)


def _multi_type_trigger(b: _DocBuilder, rng: random.Random, flip: bool) -> None:
    detail = rng.choice(["superficial", "pedunculated", "fluctuant"])
    lesion = rng.choice(["nodule", "cyst", "papule"])
    clinic = rng.choice(["outpatient clinic", "day surgery unit"])
    b.write("The ")
    det = b.entity(detail, "Detailed_description")
    b.write(" ")
    trig1 = b.entity(lesion, "Sign_symptom")
    b.write(" was ")
    start = b.pos
    b.write("excised")
    excised_span = [(start, b.pos)]
    proc = b.annotate(excised_span, "Therapeutic_procedure")
    event = b.annotate(excised_span, "Clinical_event")
    b.write(" in the ")
    loc = b.entity(clinic, "Nonbiological_location")
    b.write(".")
    b.modify(det, trig1, flip)
    b.modify(loc, event, not flip)
    b.note(f"#1\tAnnotatorNotes {proc}\tsame span carries two event types")


def _duplicate_surfaces(b: _DocBuilder, rng: random.Random, flip: bool) -> None:
    symptom = rng.choice(["tingling", "numbness", "weakness"])
    site1, site2 = rng.choice(
        [("left hand", "right foot"), ("left forearm", "right calf"),
         ("left shoulder", "right hip")]
    )
    b.write("The patient reported ")
    trig1 = b.entity(symptom, "Sign_symptom")
    b.write(" in the ")
    a1 = b.entity(site1, "Biological_structure")
    b.write(" and ")
    trig2 = b.entity(symptom, "Sign_symptom")
    b.write(" in the ")
    a2 = b.entity(site2, "Biological_structure")
    b.write(".")
    b.modify(a1, trig1, flip)
    b.modify(a2, trig2, not flip)


def _abbreviation_guard(b: _DocBuilder, rng: random.Random, flip: bool) -> None:
    # "Dr." must not end the sentence; the second period must.
    name = rng.choice(["Lee", "Okafor", "Brandt", "Ishida"])
    b.write(f"The case was discussed with Dr. {name}. ")
    start = b.pos
    b.write("Repeat imaging")
    b.annotate([(start, b.pos)], "Diagnostic_procedure")
    b.write(" was advised.")


def _boundary_suppression(b: _DocBuilder, rng: random.Random, flip: bool) -> None:
    # the Administration span straddles what would otherwise be a boundary
    med = rng.choice(["Cefazolin", "Clindamycin", "Azithromycin"])
    duration = rng.choice(["five days", "two weeks", "ten days"])
    trig = b.entity(med, "Medication")
    b.write(" was continued ")
    start = b.pos
    b.write("P.O. Daily")
    admin = b.annotate([(start, b.pos)], "Administration")
    b.write(" dosing was maintained for ")
    b.entity(duration, "Duration")
    b.write(".")
    b.modify(admin, trig, flip)


def _presentation(b: _DocBuilder, rng: random.Random, flip: bool) -> None:
    age = rng.choice(["62-year-old", "45-year-old", "71-year-old", "38-year-old"])
    who = rng.choice(["woman", "man"])
    complaint = rng.choice(["recurrent dizziness", "intermittent claudication", "progressive dysphagia"])
    b.write("A ")
    age_t = b.entity(age, "Age")
    b.write(" ")
    subj = b.entity(who, "Subject")
    b.write(" ")
    trig = b.entity("presented", "Clinical_event")
    b.write(" with ")
    b.entity(complaint, "Sign_symptom")
    b.write(".")
    b.modify(age_t, trig, flip)
    b.modify(subj, trig, not flip)


def _lab_pair(b: _DocBuilder, rng: random.Random, flip: bool) -> None:
    # MODIFY between two event-typed mentions must create no argument
    analyte = rng.choice(["Serum creatinine", "Hemoglobin", "Total bilirubin", "Serum sodium"])
    value = rng.choice(["2.1 mg/dL", "9.4 g/dL", "3.6 mg/dL", "128 mmol/L"])
    trig = b.entity(analyte, "Diagnostic_procedure")
    b.write(" was ")
    val = b.entity(value, "Lab_value")
    b.write(".")
    b.modify(val, trig, flip)


def _morphology(b: _DocBuilder, rng: random.Random, flip: bool) -> None:
    shape = rng.choice(["round", "ovoid", "wedge-shaped"])
    color = rng.choice(["erythematous", "violaceous", "hyperpigmented"])
    site = rng.choice(["forearm", "shin", "scalp"])
    b.write("Examination revealed a ")
    sh = b.entity(shape, "Shape")
    b.write(", ")
    co = b.entity(color, "Color")
    b.write(" ")
    trig = b.entity("plaque", "Sign_symptom")
    b.write(" on the ")
    st = b.entity(site, "Biological_structure")
    b.write(".")
    b.modify(sh, trig, flip)
    b.modify(co, trig, not flip)
    b.modify(st, trig, flip)


def _measurement(b: _DocBuilder, rng: random.Random, flip: bool) -> None:
    count = rng.choice(["Three", "Two", "Four"])
    size = rng.choice(["0.8x1.5cm", "1.2x2.0cm", "0.5x0.9cm"])
    organ = rng.choice(["liver", "spleen", "pancreas"])
    cnt = b.entity(count, "Quantitative_concept")
    b.write(" ")
    trig = b.entity("lesions", "Sign_symptom")
    b.write(" of ")
    area = b.entity(size, "Area")
    b.write(" were identified in the ")
    org = b.entity(organ, "Biological_structure")
    b.write(" by ")
    scan = b.entity("computed tomography", "Diagnostic_procedure")
    b.write(".")
    b.modify(cnt, trig, flip)
    b.modify(area, trig, not flip)
    b.modify(org, scan, flip)


def _disease_history(b: _DocBuilder, rng: random.Random, flip: bool) -> None:
    qualifier = rng.choice(["Chronic", "Refractory", "Longstanding"])
    disease = rng.choice(["hypertension", "atrial fibrillation", "ulcerative colitis"])
    year = rng.choice(["2009", "2013", "2017"])
    qual = b.entity(qualifier, "Detailed_description")
    b.write(" ")
    trig = b.entity(disease, "Disease_disorder")
    b.write(" was diagnosed in ")
    b.entity(year, "Date")
    b.write(".")
    b.modify(qual, trig, flip)


def _activity_outcome(b: _DocBuilder, rng: random.Random, flip: bool) -> None:
    activity = rng.choice(["swimming", "cycling", "gardening"])
    b.write("She resumed ")
    b.entity(activity, "Activity")
    b.write(" after ")
    b.entity("discharge", "Clinical_event")
    b.write(" and ultimately ")
    b.entity("recovered", "Outcome")
    b.write(" fully.")


def _fall_event(b: _DocBuilder, rng: random.Random, flip: bool) -> None:
    place = rng.choice(["home", "workplace", "nursing facility"])
    b.write("A ")
    trig = b.entity("fall", "Other_event")
    b.write(" at the ")
    loc = b.entity(place, "Nonbiological_location")
    b.write(" preceded the ")
    b.entity("admission", "Clinical_event")
    b.write(".")
    b.modify(loc, trig, flip)


def _overnight(b: _DocBuilder, rng: random.Random, flip: bool) -> None:
    symptom = rng.choice(["Fever", "Pruritus", "Myalgia"])
    b.entity(symptom, "Sign_symptom")
    b.write(" recurred ")
    b.entity("overnight", "Time")
    b.write(".")


def _uneventful(b: _DocBuilder, rng: random.Random, flip: bool) -> None:
    b.write(
        rng.choice(
            ["No further records were available.",
             "Family history was unremarkable.",
             "No additional complaints were voiced."]
        )
    )


_CORE_PATTERNS = [
    _symptom_site,
    _procedure_date,
    _medication,
    _presentation,
    _lab_pair,
    _morphology,
    _measurement,
    _disease_history,
    _activity_outcome,
    _fall_event,
    _overnight,
    _uneventful,
]

_SPECIAL_PATTERNS = [
    _discontinuous_nested,
    _multi_type_trigger,
    _duplicate_surfaces,
    _abbreviation_guard,
    _boundary_suppression,
]


def fixture_documents(n_docs: int = 30, seed: int = 13) -> list[RawDocument]:
    """Build the synthetic corpus as parsed documents."""
    rng = random.Random(seed)
    docs = []
    for i in range(n_docs):
        b = _DocBuilder(f"case_{i:03d}")
        patterns = [
            _SPECIAL_PATTERNS[i % len(_SPECIAL_PATTERNS)],
            _CORE_PATTERNS[i % len(_CORE_PATTERNS)],
            _CORE_PATTERNS[(i * 5 + 3) % len(_CORE_PATTERNS)],
        ]
        if i % 2 == 0:
            patterns.append(_CORE_PATTERNS[(i * 7 + 1) % len(_CORE_PATTERNS)])
        rng.shuffle(patterns)
        for j, pattern in enumerate(patterns):
            if j:
                b.write(" ")
            pattern(b, rng, flip=bool((i + j) % 2))
        b.write("\n")
        docs.append(parse_document(b.doc_id, b.text, b.ann()))
    return docs


def write_fixture(directory: str | Path, n_docs: int = 30, seed: int = 13) -> list[Path]:
    """Write the synthetic corpus as .txt/.ann pairs; returns the txt paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for doc in fixture_documents(n_docs, seed):
        txt = directory / f"{doc.doc_id}.txt"
        txt.write_text(doc.text, encoding="utf-8")
        ann_lines = []
        for e in doc.entities:
            span_field = ";".join(f"{s} {en}" for s, en in e.span.fragments)
            ann_lines.append(f"{e.id}\t{e.label} {span_field}\t{e.surface}")
        for r in doc.relations:
            ann_lines.append(f"{r.id}\t{r.label} Arg1:{r.source_id} Arg2:{r.target_id}")
        ann_lines.extend(raw for _, raw in doc.extra_lines)
        (directory / f"{doc.doc_id}.ann").write_text(
            "\n".join(ann_lines) + "\n", encoding="utf-8"
        )
        paths.append(txt)
    return paths


def fixture_corpus(
    n_docs: int = 30, seed: int = 13, descriptions: dict[str, str] | None = None
) -> tuple[list[SentenceInstance], Ontology]:
    """Synthetic sentence corpus plus its induced ontology."""
    if descriptions is None:
        descriptions = default_descriptions()
    docs = fixture_documents(n_docs, seed)
    corpus, _ = build_sentence_corpus(docs, set(EVENT_TYPES))
    return corpus, build_ontology(corpus, descriptions)


def default_descriptions() -> dict[str, str]:
    import json
    from importlib import resources

    with resources.files("clinevent.data").joinpath("clinical_descriptions.json").open(
        "r", encoding="utf-8"
    ) as f:
        return json.load(f)
