"""Cohort handling, per-subject inference and the end-to-end workflow."""

from .cohort import (
    COHORT_COLUMNS,
    GROUPS,
    OBS_TIMES,
    CohortError,
    CohortSpec,
    PatientRecord,
    attach_truth,
    generate_synthetic_cohort,
    jittered_params,
    load_cohort,
    planted_centers,
    save_cohort,
    save_truth,
    truth_table,
)
from .inference import InferenceJob, SubjectResult, content_hash, infer_subject, run_inference_all, subject_seed
from .predictive import PredictiveBands, posterior_predictive
from .report import REPORT_FILES, PipelineReport, emit_report
from .run import PipelineResult, analyze, learn_summary, pilot_set, prepare_cohort, run_pipeline
from .runconfig import SUMMARY_METHODS, RunConfig
from .variability import MapVariability, map_variability, replicate_records

__all__ = [
    "COHORT_COLUMNS", "GROUPS", "OBS_TIMES", "REPORT_FILES", "SUMMARY_METHODS", "CohortError", "CohortSpec",
    "InferenceJob", "MapVariability", "PatientRecord", "PipelineReport", "PipelineResult", "PredictiveBands", "RunConfig",
    "SubjectResult", "analyze", "attach_truth", "content_hash", "emit_report", "generate_synthetic_cohort",
    "infer_subject", "jittered_params", "learn_summary", "load_cohort", "map_variability", "pilot_set", "planted_centers",
    "posterior_predictive", "prepare_cohort", "replicate_records", "run_inference_all", "run_pipeline", "save_cohort", "save_truth",
    "subject_seed", "truth_table",
]
