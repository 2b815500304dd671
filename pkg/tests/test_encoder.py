import numpy as np
import pytest

from alpha.encoder import (
    EncoderConfig,
    FULL_SCALE_CONFIG,
    FunctionPrediction,
    SamplePrediction,
    classify_function,
    classify_sample_functions,
    forward,
    init_params,
    load_model,
    loss_and_grads,
    train_function_classifier,
)
from alpha.errors import DegenerateTraining, EmptyFunction
from alpha.normalize import FunctionSentence
from alpha.wordpiece import PAD_ID, train_wordpiece

MICRO = EncoderConfig(layers=1, hidden_dim=4, attention_heads=2, max_len=8,
                      seed=3, epochs=1, batch_size=2, learning_rate=1e-3)


def micro_params(scale=0.5, vocab_size=11, seed=7):
    rng = np.random.default_rng(seed)
    params = init_params(MICRO, vocab_size, rng)
    for name in params:
        params[name] = rng.normal(0.0, scale, size=params[name].shape)
    return params


def finite_difference(params, name, ids, mask, labels, eps=1e-5):
    arr = params[name]
    fd = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + eps
        lp, _ = loss_and_grads(params, MICRO, ids, mask, labels)
        arr[idx] = orig - eps
        lm, _ = loss_and_grads(params, MICRO, ids, mask, labels)
        arr[idx] = orig
        fd[idx] = (lp - lm) / (2 * eps)
    return fd


def test_config_validation():
    with pytest.raises(ValueError):
        EncoderConfig(hidden_dim=10, attention_heads=3)
    with pytest.raises(ValueError):
        EncoderConfig(layers=0)
    assert FULL_SCALE_CONFIG.layers == 6
    assert FULL_SCALE_CONFIG.hidden_dim == 768
    assert FULL_SCALE_CONFIG.attention_heads == 12


def test_gradients_match_finite_differences():
    params = micro_params()
    ids = np.array([[1, 5, 6, 7, PAD_ID, PAD_ID], [1, 8, 5, 9, 10, PAD_ID]])
    mask = ids != PAD_ID
    labels = np.array([0, 1])
    _, grads = loss_and_grads(params, MICRO, ids, mask, labels)
    worst = 0.0
    for name in sorted(params):
        fd = finite_difference(params, name, ids, mask, labels)
        g = grads[name]
        denom = max(np.linalg.norm(g), np.linalg.norm(fd), 1e-12)
        rel = np.linalg.norm(g - fd) / denom
        worst = max(worst, rel)
    assert worst <= 1e-4, f"worst relative gradient error {worst}"


def test_softmax_distribution_on_random_inputs():
    params = micro_params(vocab_size=31)
    rng = np.random.default_rng(5)
    for _ in range(100):
        width = int(rng.integers(2, 8))
        ids = rng.integers(5, 31, size=(10, width))
        ids[:, 0] = 1
        mask = np.ones_like(ids, dtype=bool)
        logits, _ = forward(params, MICRO, ids, mask)
        shifted = logits - logits.max(axis=1, keepdims=True)
        probs = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
        assert np.all(np.abs(probs.sum(axis=1) - 1.0) <= 1e-6)


def planted_corpus(n=300, seed=0):
    rng = np.random.default_rng(seed)
    benign_words = ["popesi", "movespesi", "testeaxeax", "xorecxecx", "addeax0x4"]
    pairs = []
    for i in range(n):
        malicious = i % 2 == 1
        words = [benign_words[int(rng.integers(len(benign_words)))]
                 for _ in range(int(rng.integers(2, 7)))]
        if malicious:
            words[int(rng.integers(len(words)))] = "evilmarker"
        pairs.append((FunctionSentence(tuple(words + ["ret"])),
                      "malicious" if malicious else "benign"))
    return pairs


def planted_model(seed=0):
    pairs = planted_corpus(seed=seed)
    vocab = train_wordpiece([s.words for s, _ in pairs], 120, 1)
    config = EncoderConfig(layers=2, hidden_dim=64, attention_heads=2, max_len=32,
                           seed=seed, epochs=3, batch_size=16, learning_rate=1e-3)
    return train_function_classifier(pairs, 0.15, config, vocab)


def test_planted_signal_training():
    classifier, val_loss, val_acc = planted_model()
    assert val_acc >= 0.95
    hot = classify_function(classifier, FunctionSentence(("evilmarker", "ret")))
    assert hot.p_malicious > 0.9
    assert hot.predicted == "malicious"
    cold = classify_function(classifier, FunctionSentence(("popesi", "ret")))
    assert cold.p_benign > 0.9
    assert cold.predicted == "benign"
    assert hot.p_benign + hot.p_malicious == pytest.approx(1.0, abs=1e-6)


def test_single_label_training_rejected():
    pairs = [(FunctionSentence(("popesi", "ret")), "benign")] * 10
    vocab = train_wordpiece([s.words for s, _ in pairs], 40, 1)
    with pytest.raises(DegenerateTraining):
        train_function_classifier(pairs, 0.2, MICRO, vocab)


def test_empty_function_rejected():
    classifier, _, _ = _cached_planted()
    with pytest.raises(EmptyFunction):
        classify_function(classifier, FunctionSentence(()))
    with pytest.raises(EmptyFunction):
        classify_sample_functions(classifier, [])


_PLANTED_CACHE = {}


def _cached_planted():
    if "model" not in _PLANTED_CACHE:
        _PLANTED_CACHE["model"] = planted_model()
    return _PLANTED_CACHE["model"]


def test_sample_function_tally():
    class FixedClassifier:
        def __init__(self, outputs):
            self.outputs = outputs

        def classify_batch(self, sentences):
            return [FunctionPrediction(1.0 - p, p) for p in self.outputs[: len(sentences)]]

    functions = [FunctionSentence((f"w{i}", "ret")) for i in range(10)]
    tally = classify_sample_functions(FixedClassifier([0.9] * 4 + [0.1] * 6), functions)
    assert tally == SamplePrediction(function_count=10, malicious_count=4)
    assert tally.malicious_percent == pytest.approx(40.0)
    all_benign = classify_sample_functions(FixedClassifier([0.0] * 10), functions)
    assert all_benign.malicious_percent == 0.0


def test_planted_sample_percent():
    classifier, _, _ = _cached_planted()
    functions = [FunctionSentence(("evilmarker", "popesi", "ret"))] * 8 + \
        [FunctionSentence(("popesi", "movespesi", "ret"))] * 2
    tally = classify_sample_functions(classifier, functions)
    assert tally.malicious_percent >= 70.0


def test_seed_determinism():
    a = planted_model(seed=11)
    b = planted_model(seed=11)
    assert a[1] == b[1]
    assert a[2] == b[2]
    for name in a[0].params:
        assert np.array_equal(a[0].params[name], b[0].params[name])


def test_truncation_consistency():
    classifier, _, _ = _cached_planted()
    long_words = ["popesi"] * 400
    prefix = long_words[: classifier.config.max_len]
    full = classifier.classify_words(long_words)
    cut = classifier.classify_words(prefix)
    assert full.p_malicious == pytest.approx(cut.p_malicious, abs=1e-12)


def test_artifact_round_trip(tmp_path):
    classifier, _, _ = _cached_planted()
    from alpha.wordpiece import save_vocab

    save_vocab(classifier.vocab, tmp_path / "vocab.txt")
    classifier.save(tmp_path / "model.bin", vocab_file="vocab.txt")
    loaded = load_model(tmp_path / "model.bin")
    assert loaded.config == classifier.config
    probe = FunctionSentence(("evilmarker", "ret"))
    assert classify_function(loaded, probe).p_malicious == pytest.approx(
        classify_function(classifier, probe).p_malicious, abs=1e-15)


def test_artifact_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bogus.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(ValueError):
        load_model(path)
