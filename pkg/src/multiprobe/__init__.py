"""Multi-problem knowledge-boundary probing and confidence calibration toolkit."""

from .boundary import (
    BoundaryRecord,
    ConfidenceLabel,
    ParsedAnswers,
    extract_choice,
    match_answer,
    normalize,
    parse_answers,
    probe,
)
from .composer import MultiProblem, PromptTemplate, compose, default_template, render_prompt
from .data_model import (
    AnswerFormat,
    Choice,
    DataError,
    Dataset,
    Problem,
    Setting,
    load_dataset,
    serialize,
    validate,
)
from .metrics import (
    CalibrationBin,
    CalibrationReport,
    MetricError,
    PredictionRecord,
    accuracy_among_certain,
    average_precision,
    build_report,
    confidence_score,
    ece,
)
from .model_client import (
    Backend,
    BackendError,
    CompletionRequest,
    CompletionResponse,
    ConfidenceBehavior,
    DecodeError,
    MockBackend,
    MockModelSpec,
    ModelClient,
    RemoteBackend,
    TransportError,
)
from .sft_emitter import (
    QASource,
    RecordKind,
    TuningRecord,
    build_multqa,
    build_multqa_conf,
    emit,
    load_tuning_records,
)

__version__ = "0.1.0"
