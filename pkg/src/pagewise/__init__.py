"""Inference strategies and evaluation metrics for multi-page document
classification, driven by per-page classifier outputs."""

from .aggregate import (
    Strategy,
    aggregate_all,
    aggregate_document,
    external_scores,
    hard_vote,
    max_conf,
    sample_page,
    soft_vote,
)
from .bestcase import BestcaseRow, CorrectnessVector, bestcase_table, combine, correctness
from .metrics import (
    BinRow,
    MetricsReport,
    RCPoint,
    accuracy,
    aurc,
    ece,
    evaluate,
    f1_scores,
    risk_coverage_curve,
)
from .model import (
    BundleRecord,
    DocPrediction,
    DocumentRecord,
    FormatError,
    LabelMap,
    LabelSpace,
    PagePrediction,
    PagewiseError,
    PredictionSet,
    StreamRecord,
    ValidationReport,
    boundary_space,
    validate,
)
from .perturb import PerturbSpec
from .perturb import apply as perturb
from .tasks import (
    CONFLICT,
    Segment,
    build_streams,
    classify_stream,
    count_page_types,
    evaluate_bundle,
    map_pages_to_document,
    segment_by_boundaries,
    two_stage_classify,
)

__version__ = "0.1.0"

__all__ = [
    "BestcaseRow",
    "BinRow",
    "BundleRecord",
    "CONFLICT",
    "CorrectnessVector",
    "DocPrediction",
    "DocumentRecord",
    "FormatError",
    "LabelMap",
    "LabelSpace",
    "MetricsReport",
    "PagePrediction",
    "PagewiseError",
    "PerturbSpec",
    "PredictionSet",
    "RCPoint",
    "Segment",
    "StreamRecord",
    "Strategy",
    "ValidationReport",
    "accuracy",
    "aggregate_all",
    "aggregate_document",
    "aurc",
    "bestcase_table",
    "boundary_space",
    "build_streams",
    "classify_stream",
    "combine",
    "correctness",
    "count_page_types",
    "ece",
    "evaluate",
    "evaluate_bundle",
    "external_scores",
    "f1_scores",
    "hard_vote",
    "map_pages_to_document",
    "max_conf",
    "perturb",
    "risk_coverage_curve",
    "sample_page",
    "segment_by_boundaries",
    "soft_vote",
    "two_stage_classify",
    "validate",
]
