import random

import numpy as np
import pytest

from alpha.corpus import TrainingCorpus
from alpha.encoder import FunctionPrediction
from alpha.errors import DegenerateFit
from alpha.ingest import RawSample, SliceSpec, TimedInstruction
from alpha.normalize import FunctionSentence
from alpha.pipeline import (
    FunctionLossReport,
    PipelineModels,
    alpha_classify,
    calibrate_layers,
    classify_sample,
    function_loss_filter,
    layer1_features,
    layer1_triage,
    layer3_finalize,
)
from alpha.svm import ConfidenceThresholds, decision_distance, fit_linear_svm


def fs(*words):
    return FunctionSentence(tuple(words))


def keyed(n, prefix):
    return [f"{prefix}{i:05d} ret" for i in range(n)]


class WordListClassifier:
    """Marks any sentence containing a word from the hot set as malicious."""

    def __init__(self, hot=("evilmarker",)):
        self.hot = set(hot)

    def classify_batch(self, sentences):
        out = []
        for sentence in sentences:
            words = sentence.words if isinstance(sentence, FunctionSentence) else sentence
            p = 0.95 if self.hot & set(words) else 0.05
            out.append(FunctionPrediction(1.0 - p, p))
        return out


def test_loss_filter_hand_count():
    corpus = TrainingCorpus.from_keys(["A ret"], ["Z ret"])
    functions = [fs("A", "ret"), fs("A", "ret"), fs("B", "ret")]
    report, residual = function_loss_filter(functions, corpus, "s")
    assert report == FunctionLossReport("s", 3, 2, 1, 0, 1)
    assert [r.key() for r in residual] == ["B ret"]


def test_loss_filter_residual_order_preserved():
    corpus = TrainingCorpus.from_keys(["x ret"], ["y ret"])
    functions = [fs("c", "ret"), fs("a", "ret"), fs("x", "ret"), fs("b", "ret"),
                 fs("a", "ret")]
    _, residual = function_loss_filter(functions, corpus)
    assert [r.key() for r in residual] == ["c ret", "a ret", "b ret"]


def _replayed_report(sample_id, initial, in_benign, in_malicious, remaining):
    """Construct a sample/corpus pair that reproduces a known overlap profile."""
    dedup = in_benign + in_malicious + remaining
    ben_keys = keyed(in_benign, "b")
    mal_keys = keyed(in_malicious, "m")
    new_keys = keyed(remaining, "n")
    all_keys = ben_keys + mal_keys + new_keys
    functions = [FunctionSentence.from_key(k) for k in all_keys]
    # pad with repeats to reach the recorded pre-dedup length
    for i in range(initial - dedup):
        functions.append(FunctionSentence.from_key(all_keys[i % dedup]))
    corpus = TrainingCorpus.from_keys(ben_keys, mal_keys)
    report, residual = function_loss_filter(functions, corpus, sample_id)
    return report, residual


def test_known_overlap_profile_b092b0():
    report, _ = _replayed_report("b092b0", 17784, 11906, 148, 559)
    assert report == FunctionLossReport("b092b0", 17784, 12613, 11906, 148, 559)
    assert report.found_in_benign + report.found_in_malicious + report.remaining == 12613


def test_known_overlap_profile_eefac8():
    report, _ = _replayed_report("eefac8", 22875, 14759, 220, 892)
    assert report == FunctionLossReport("eefac8", 22875, 15871, 14759, 220, 892)


def test_partition_identity_randomized():
    rng = random.Random(61)
    for _ in range(500):
        universe = [f"k{i} ret" for i in range(rng.randrange(2, 60))]
        ben = set(rng.sample(universe, rng.randrange(0, len(universe))))
        mal = set(rng.sample(sorted(set(universe) - ben),
                             rng.randrange(0, len(universe) - len(ben) + 1)))
        corpus = TrainingCorpus.from_keys(ben, mal)
        functions = [FunctionSentence.from_key(rng.choice(universe))
                     for _ in range(rng.randrange(1, 120))]
        report, residual = function_loss_filter(functions, corpus)
        assert report.deduplicated_length == (
            report.found_in_benign + report.found_in_malicious + report.remaining)
        # brute-force membership scan oracle
        distinct = list(dict.fromkeys(f.key() for f in functions))
        assert report.deduplicated_length == len(distinct)
        assert report.found_in_benign == sum(1 for k in distinct if k in ben)
        assert report.found_in_malicious == sum(1 for k in distinct if k in mal)
        # no test leakage: residuals absent from both indexes
        for r in residual:
            assert corpus.lookup(r.key()) is None


def _triage_fixture():
    # hand-built hyperplane: distance is exactly found_in_malicious - 2.5
    import numpy as np
    from alpha.svm import HyperplaneModel

    model = HyperplaneModel(
        weights=np.array([1.0, 0.0]), bias=-2.5,
        feature_means=np.zeros(2), feature_scales=np.ones(2),
    )
    thresholds = ConfidenceThresholds(upper_threshold=1.75, lower_threshold=-1.75)
    return model, thresholds


def _report_for(mal, ben):
    return FunctionLossReport("s", mal + ben, mal + ben, ben, mal, 0)


def test_triage_rules():
    model, thresholds = _triage_fixture()

    def triage_at(mal_count):
        report = _report_for(mal_count, 5)
        verdict = layer1_triage(report, model, thresholds)
        distance = decision_distance(model, layer1_features(report))
        return verdict, distance

    decided_mal, d = triage_at(6)
    assert d == pytest.approx(3.5)
    assert decided_mal is not None
    assert (decided_mal.decision, decided_mal.decided_at) == ("malicious", "layer1")
    assert decided_mal.layer1_distance == pytest.approx(d)

    flagged, d = triage_at(3)
    assert d == pytest.approx(0.5)
    assert 0 < d < thresholds.upper_threshold
    assert flagged is None

    decided_ben, d = triage_at(0)
    assert d == pytest.approx(-2.5)
    assert d < thresholds.lower_threshold
    assert decided_ben is not None
    assert (decided_ben.decision, decided_ben.decided_at) == ("benign", "layer1")


def test_triage_never_contradicts_sign():
    model, thresholds = _triage_fixture()
    rng = random.Random(67)
    for _ in range(200):
        report = _report_for(rng.randrange(0, 11), rng.randrange(0, 11))
        verdict = layer1_triage(report, model, thresholds)
        if verdict is None:
            continue
        distance = decision_distance(model, layer1_features(report))
        if verdict.decision == "malicious":
            assert distance > 0
        else:
            assert distance <= 0


def test_layer3_exclusion_rule():
    layer3 = fit_linear_svm([[5.0, 10.0], [5.0, 90.0]], [-1, +1], c=100.0)
    verdict = layer3_finalize("s", [fs("a", "ret"), fs("b", "ret")],
                              WordListClassifier(), layer3)
    assert verdict.decision == "excluded"
    assert verdict.decided_at == "exclusion"


def test_layer3_decides_from_malicious_share():
    layer3 = fit_linear_svm([[5.0, 10.0], [5.0, 90.0]], [-1, +1], c=100.0)
    classifier = WordListClassifier()
    hot = [fs("evilmarker", "ret")] * 8 + [fs("x", "ret")] * 2
    verdict = layer3_finalize("s", hot, classifier, layer3)
    assert verdict.decision == "malicious"
    assert verdict.decided_at == "layer3"
    assert verdict.malicious_percent == pytest.approx(80.0)
    assert verdict.function_count == 10

    cold = [fs(f"c{i}", "ret") for i in range(10)]
    verdict = layer3_finalize("s", cold, classifier, layer3)
    assert verdict.decision == "benign"
    assert verdict.malicious_percent == 0.0


def sample_from_functions(sample_id, label, functions, start_ms=0, step_ms=400):
    instrs = []
    t = start_ms
    for sentence in functions:
        for word in sentence.words:
            instrs.append(TimedInstruction(word, "", timestamp_ms=t))
            t += step_ms
    return RawSample(sample_id, label, tuple(instrs))


def _calibrated_models(seed=71):
    """Small synthetic calibration with clearly separated overlap profiles."""
    rng = random.Random(seed)
    ben_keys = keyed(30, "cb")
    mal_keys = keyed(30, "cm")
    corpus = TrainingCorpus.from_keys(ben_keys, mal_keys)
    classifier = WordListClassifier()
    calibration = []
    for i in range(12):
        overlap = [FunctionSentence.from_key(rng.choice(ben_keys)) for _ in range(8)]
        novel = [fs(f"nb{i}_{j}", "ret") for j in range(6)]
        calibration.append(sample_from_functions(f"cal_b{i}", "benign", overlap + novel))
    for i in range(12):
        overlap = [FunctionSentence.from_key(rng.choice(mal_keys)) for _ in range(6)]
        overlap += [FunctionSentence.from_key(rng.choice(ben_keys)) for _ in range(3)]
        novel = [fs(f"nm{i}_{j}", "evilmarker", "ret") for j in range(6)]
        calibration.append(sample_from_functions(f"cal_m{i}", "malicious", overlap + novel))
    result = calibrate_layers(corpus, calibration, classifier, slice_spec=None)
    models = PipelineModels(
        corpus=corpus, layer1=result.layer1, thresholds=result.thresholds,
        classifier=classifier, layer3=result.layer3,
    )
    return models, ben_keys, mal_keys, result


def test_calibration_separates_clear_profiles():
    models, _, _, result = _calibrated_models()
    # layer-1 training accuracy 1.0 on the calibration features themselves
    for report in result.reports:
        d = decision_distance(models.layer1, layer1_features(report))
        if report.sample_id.startswith("cal_m"):
            assert d > 0
        else:
            assert d < 0


def test_calibration_weight_sign():
    models, _, _, _ = _calibrated_models()
    # benign calibration samples all have zero malicious overlap, so more
    # malicious matches must push toward the malicious side
    assert models.layer1.weights[0] > 0


def test_calibration_single_class_rejected():
    corpus = TrainingCorpus.from_keys(keyed(5, "b"), keyed(5, "m"))
    calibration = [
        sample_from_functions(f"b{i}", "benign",
                              [FunctionSentence.from_key(k) for k in keyed(5, "b")])
        for i in range(4)
    ]
    with pytest.raises(DegenerateFit):
        calibrate_layers(corpus, calibration, WordListClassifier(), slice_spec=None)


def test_full_overlap_sample_decided_at_layer1():
    models, ben_keys, mal_keys, _ = _calibrated_models()
    functions = [FunctionSentence.from_key(k) for k in mal_keys[:9]]
    functions += [FunctionSentence.from_key(k) for k in ben_keys[:2]]
    sample = sample_from_functions("hit", "malicious", functions)
    verdict, report = classify_sample(sample, models, slice_spec=None)
    assert verdict.decided_at == "layer1"
    assert verdict.decision == "malicious"
    assert report.found_in_malicious == 9


def test_benign_near_duplicate_decided_at_layer1():
    models, ben_keys, _, _ = _calibrated_models()
    functions = [FunctionSentence.from_key(k) for k in ben_keys[:10]]
    functions += [fs("fresh", "ret")]
    sample = sample_from_functions("dupe", "benign", functions)
    verdict, _ = classify_sample(sample, models, slice_spec=None)
    assert verdict.decided_at == "layer1"
    assert verdict.decision == "benign"


def test_zero_overlap_sample_reaches_layer3():
    models, _, _, _ = _calibrated_models()
    functions = [fs(f"fresh{i}", "evilmarker", "ret") for i in range(8)]
    sample = sample_from_functions("novel", "malicious", functions)
    verdict, report = classify_sample(sample, models, slice_spec=None)
    assert report.found_in_benign == report.found_in_malicious == 0
    assert verdict.decided_at == "layer3"
    assert verdict.decision == "malicious"

    benign_novel = [fs(f"calm{i}", "ret") for i in range(8)]
    sample = sample_from_functions("novelb", "benign", benign_novel)
    verdict, _ = classify_sample(sample, models, slice_spec=None)
    assert verdict.decided_at == "layer3"
    assert verdict.decision == "benign"


def test_alpha_classify_slices_first():
    models, ben_keys, mal_keys, _ = _calibrated_models()
    # minute 2 holds malicious overlap, the rest of the trace is benign overlap
    early = [FunctionSentence.from_key(k) for k in ben_keys[:10]]
    hot = [FunctionSentence.from_key(k) for k in mal_keys[:10]]
    early_part = sample_from_functions("mix", "malicious", early, start_ms=0, step_ms=100)
    hot_part = sample_from_functions("mix", "malicious", hot, start_ms=120_000, step_ms=100)
    sample = RawSample("mix", "malicious", early_part.instructions + hot_part.instructions)
    verdict = alpha_classify(sample, models, SliceSpec(2, fallback=True))
    assert verdict.decision == "malicious"
    assert verdict.decided_at == "layer1"
    # unsliced, the benign prefix cancels the malicious pull: the sample is
    # flagged, and with nothing novel left it is excluded rather than decided
    whole = alpha_classify(sample, models, slice_spec=None)
    assert whole.decision == "excluded"


def test_end_to_end_determinism():
    models, _, mal_keys, _ = _calibrated_models()
    functions = [FunctionSentence.from_key(k) for k in mal_keys[:6]]
    functions += [fs(f"zz{i}", "evilmarker", "ret") for i in range(5)]
    sample = sample_from_functions("det", "malicious", functions)
    first = classify_sample(sample, models, slice_spec=None)
    second = classify_sample(sample, models, slice_spec=None)
    assert first == second


def test_verdict_invariants():
    models, _, mal_keys, _ = _calibrated_models()
    functions = [FunctionSentence.from_key(k) for k in mal_keys[:9]]
    sample = sample_from_functions("inv", "malicious", functions)
    verdict, _ = classify_sample(sample, models, slice_spec=None)
    if verdict.decided_at == "layer1":
        assert verdict.layer1_distance is not None
        if verdict.decision == "malicious":
            assert verdict.layer1_distance >= models.thresholds.upper_threshold
    if verdict.decided_at == "layer3":
        assert verdict.malicious_percent is not None
