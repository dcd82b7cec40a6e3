"""Clinical event extraction toolkit.

Subpackages and modules:

- brat        -- BRAT standoff parsing (.txt/.ann pairs)
- dataset     -- sentence-level dataset construction, ontology, splits, stats
- prompts     -- input/target sequence compilation for MI, ED and EAE
- decoding    -- parsing generated outputs and grounding them to spans
- backends    -- gold oracle (with corruption), replay cache and HTTP client
- pipeline    -- pipelined MI -> ED -> EAE inference over a corpus
- evaluation  -- four-task exact-match scoring and error attribution
- fixtures    -- deterministic synthetic corpus for tests and demos
- cli         -- command-line entry points
"""

from .brat import (
    DanglingReference,
    Discrepancy,
    MalformedLine,
    RawDocument,
    RawEntity,
    RawRelation,
    SpanSet,
    load_directory,
    parse_document,
    serialize_annotations,
    validate_offsets,
)
from .dataset import (
    ArgumentRecord,
    CorpusSplit,
    EventRecord,
    Mention,
    Ontology,
    OntologyEntry,
    SentenceInstance,
    build_ontology,
    build_sentence_corpus,
    compute_stats,
    derive_events,
    downsample,
    read_dataset,
    segment_sentences,
    split_corpus,
    validate_corpus,
    write_dataset,
)
from .prompts import (
    CompileConfig,
    PromptInstance,
    Task,
    augment_training,
    compile_ed,
    compile_eae,
    compile_mi,
    compile_typing,
    inject_markers,
)
from .decoding import DecodedOutput, decode, ground_surfaces, parse_output
from .backends import (
    BackendUnavailable,
    CacheMiss,
    CorruptionConfig,
    GenRequest,
    OracleBackend,
    ProtocolViolation,
    RemoteBackend,
    ReplayBackend,
    ReplayCache,
    corrupt,
    verify_protocol,
)
from .pipeline import (
    PipelineConfig,
    PredictedEvent,
    PredictedMention,
    PredictionSet,
    SentencePrediction,
    run_full,
    run_mi_stage,
    stage_caches,
)
from .evaluation import (
    AlignmentError,
    ErrorAttribution,
    MetricReport,
    aggregate_runs,
    attribute_errors,
    score,
)

__version__ = "0.1.0"
