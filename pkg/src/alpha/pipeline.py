"""End-to-end classification: corpus filtering, SVM triage, final verdict.

The flow per sample: optional minute slice, normalization and segmentation,
removal of every function already present in the training corpus, a
first-pass SVM over the removal counts with a quartile confidence band, and
for flagged samples a per-function classification whose malicious share
feeds the final hyperplane.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .corpus import TrainingCorpus
from .encoder import classify_sample_functions
from .errors import DegenerateFit
from .ingest import BENIGN, MALICIOUS, RawSample, SliceSpec, slice_by_minute
from .normalize import (
    DEFAULT_BOUNDARIES,
    DEFAULT_MODE,
    FunctionSentence,
    NormalizationMode,
    sentences_from_sample,
)
from .svm import (
    ConfidenceThresholds,
    HyperplaneModel,
    decision_distance,
    fit_linear_svm,
    quartile_thresholds,
)

DEFAULT_SLICE = SliceSpec(slice_index=2, fallback=True)
DEFAULT_MIN_FUNCTIONS = 3

LAYER1 = "layer1"
LAYER3 = "layer3"
EXCLUSION = "exclusion"
EXCLUDED = "excluded"


@dataclass(frozen=True)
class FunctionLossReport:
    """How much of a sample the training corpus already explains."""

    sample_id: str
    initial_length: int
    deduplicated_length: int
    found_in_benign: int
    found_in_malicious: int
    remaining: int

    def __post_init__(self) -> None:
        total = self.found_in_benign + self.found_in_malicious + self.remaining
        if total != self.deduplicated_length:
            raise ValueError("loss report partition identity violated")


@dataclass(frozen=True)
class Verdict:
    sample_id: str
    decision: str
    decided_at: str
    layer1_distance: float | None = None
    malicious_percent: float | None = None
    function_count: int | None = None


@dataclass
class PipelineModels:
    """Everything a classification run needs, frozen after calibration."""

    corpus: TrainingCorpus
    layer1: HyperplaneModel
    thresholds: ConfidenceThresholds
    classifier: object
    layer3: HyperplaneModel
    mode: NormalizationMode = DEFAULT_MODE
    boundaries: Sequence[str] = DEFAULT_BOUNDARIES
    min_functions: int = DEFAULT_MIN_FUNCTIONS


def function_loss_filter(
    functions: Sequence[FunctionSentence],
    corpus: TrainingCorpus,
    sample_id: str = "",
) -> tuple[FunctionLossReport, list[FunctionSentence]]:
    """Deduplicate, look every function up in the corpus, keep the novel ones."""
    initial = len(functions)
    first_seen: dict[str, FunctionSentence] = {}
    for sentence in functions:
        first_seen.setdefault(sentence.key(), sentence)
    in_benign = 0
    in_malicious = 0
    residual: list[FunctionSentence] = []
    for key, sentence in first_seen.items():
        label = corpus.lookup(key)
        if label == BENIGN:
            in_benign += 1
        elif label == MALICIOUS:
            in_malicious += 1
        else:
            residual.append(sentence)
    report = FunctionLossReport(
        sample_id=sample_id,
        initial_length=initial,
        deduplicated_length=len(first_seen),
        found_in_benign=in_benign,
        found_in_malicious=in_malicious,
        remaining=len(residual),
    )
    return report, residual


def layer1_features(report: FunctionLossReport) -> list[float]:
    return [float(report.found_in_malicious), float(report.found_in_benign)]


def layer1_triage(
    report: FunctionLossReport,
    model: HyperplaneModel,
    thresholds: ConfidenceThresholds,
) -> Verdict | None:
    """High-confidence verdict from removal counts, or None when flagged."""
    distance = decision_distance(model, layer1_features(report))
    if distance > 0 and distance >= thresholds.upper_threshold:
        return Verdict(report.sample_id, MALICIOUS, LAYER1, layer1_distance=distance)
    if distance <= 0 and distance <= thresholds.lower_threshold:
        return Verdict(report.sample_id, BENIGN, LAYER1, layer1_distance=distance)
    return None


def layer3_finalize(
    sample_id: str,
    residual: Sequence[FunctionSentence],
    classifier,
    layer3: HyperplaneModel,
    min_functions: int = DEFAULT_MIN_FUNCTIONS,
    layer1_distance: float | None = None,
) -> Verdict:
    """Classify each novel function and decide from the malicious share."""
    if len(residual) < min_functions:
        return Verdict(sample_id, EXCLUDED, EXCLUSION, layer1_distance=layer1_distance,
                       function_count=len(residual))
    prediction = classify_sample_functions(classifier, residual)
    features = [float(prediction.function_count), prediction.malicious_percent]
    distance = decision_distance(layer3, features)
    decision = MALICIOUS if distance > 0 else BENIGN
    return Verdict(
        sample_id,
        decision,
        LAYER3,
        layer1_distance=layer1_distance,
        malicious_percent=prediction.malicious_percent,
        function_count=prediction.function_count,
    )


def prepare_functions(
    sample: RawSample,
    mode: NormalizationMode = DEFAULT_MODE,
    boundaries: Sequence[str] = DEFAULT_BOUNDARIES,
    slice_spec: SliceSpec | None = DEFAULT_SLICE,
) -> list[FunctionSentence]:
    """Slice (when requested), normalize and segment one sample."""
    if slice_spec is not None:
        sample = slice_by_minute(sample, slice_spec)
    return sentences_from_sample(sample, mode, boundaries)


def classify_sample(
    sample: RawSample,
    models: PipelineModels,
    slice_spec: SliceSpec | None = DEFAULT_SLICE,
) -> tuple[Verdict, FunctionLossReport]:
    """Full three-layer classification of one sample."""
    functions = prepare_functions(sample, models.mode, models.boundaries, slice_spec)
    report, residual = function_loss_filter(functions, models.corpus, sample.sample_id)
    verdict = layer1_triage(report, models.layer1, models.thresholds)
    if verdict is None:
        distance = decision_distance(models.layer1, layer1_features(report))
        verdict = layer3_finalize(
            sample.sample_id, residual, models.classifier, models.layer3,
            models.min_functions, layer1_distance=distance,
        )
    return verdict, report


def alpha_classify(
    sample: RawSample,
    models: PipelineModels,
    slice_spec: SliceSpec | None = DEFAULT_SLICE,
) -> Verdict:
    return classify_sample(sample, models, slice_spec)[0]


@dataclass
class CalibrationResult:
    layer1: HyperplaneModel
    thresholds: ConfidenceThresholds
    layer3: HyperplaneModel
    reports: list[FunctionLossReport] = field(default_factory=list)


def calibrate_layers(
    corpus: TrainingCorpus,
    calibration_samples: Sequence[RawSample],
    classifier,
    mode: NormalizationMode = DEFAULT_MODE,
    boundaries: Sequence[str] = DEFAULT_BOUNDARIES,
    slice_spec: SliceSpec | None = DEFAULT_SLICE,
    min_functions: int = DEFAULT_MIN_FUNCTIONS,
    c: float = 1.0,
) -> CalibrationResult:
    """Fit the triage SVM, its confidence band and the final SVM.

    Calibration samples must be labeled and disjoint from any test data.
    """
    loss_rows: list[list[float]] = []
    labels: list[int] = []
    residuals: list[list[FunctionSentence]] = []
    reports: list[FunctionLossReport] = []
    for sample in calibration_samples:
        functions = prepare_functions(sample, mode, boundaries, slice_spec)
        report, residual = function_loss_filter(functions, corpus, sample.sample_id)
        reports.append(report)
        loss_rows.append(layer1_features(report))
        labels.append(+1 if sample.label == MALICIOUS else -1)
        residuals.append(residual)

    layer1 = fit_linear_svm(loss_rows, labels, c=c)
    distances = [decision_distance(layer1, row) for row in loss_rows]
    thresholds = quartile_thresholds(distances)

    layer3_rows: list[list[float]] = []
    layer3_labels: list[int] = []
    for residual, label in zip(residuals, labels):
        if len(residual) < min_functions:
            continue
        prediction = classify_sample_functions(classifier, residual)
        layer3_rows.append([float(prediction.function_count), prediction.malicious_percent])
        layer3_labels.append(label)
    if len(set(layer3_labels)) < 2:
        raise DegenerateFit("calibration residuals cover a single class")
    layer3 = fit_linear_svm(layer3_rows, layer3_labels, c=c)
    return CalibrationResult(layer1, thresholds, layer3, reports)


def classify_batch(
    samples: Sequence[RawSample],
    models: PipelineModels,
    slice_spec: SliceSpec | None = DEFAULT_SLICE,
    paper_mode: bool = False,
    jobs: int = 1,
) -> list[tuple[Verdict, FunctionLossReport]]:
    """Classify a cohort; paper_mode refits the SVM layers on the cohort itself.

    In-batch fitting is an evaluation/visualization device and needs the
    cohort's own labels; deployment should calibrate on held-out data instead.
    Samples are independent, so ``jobs`` threads may classify concurrently;
    result order always follows the input order.
    """
    if paper_mode:
        calibration = calibrate_layers(
            models.corpus, samples, models.classifier,
            mode=models.mode, boundaries=models.boundaries,
            slice_spec=slice_spec, min_functions=models.min_functions,
        )
        models = PipelineModels(
            corpus=models.corpus,
            layer1=calibration.layer1,
            thresholds=calibration.thresholds,
            classifier=models.classifier,
            layer3=calibration.layer3,
            mode=models.mode,
            boundaries=models.boundaries,
            min_functions=models.min_functions,
        )
    if jobs > 1 and len(samples) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(
                lambda sample: classify_sample(sample, models, slice_spec), samples))
    return [classify_sample(sample, models, slice_spec) for sample in samples]
