"""Per-function softmax classifier: a small transformer encoder in numpy.

Token + position embeddings feed a stack of post-norm self-attention blocks;
the first-token state goes through a linear head and softmax over
benign/malicious. Forward and backward passes are hand-written in float64,
trained with Adam under a fixed seed, so runs are reproducible and the
analytic gradients can be checked against finite differences.

Model artifact layout (little-endian):

    bytes 0-3    magic b"AENC"
    bytes 4-7    format version, uint32
    bytes 8-15   header length N, uint64
    N bytes      UTF-8 JSON: config, class order, vocab reference + sha256,
                 and the tensor manifest [{name, shape}, ...]
    rest         float64 tensor data concatenated in manifest order
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateTraining, EmptyFunction
from .ingest import BENIGN, MALICIOUS
from .normalize import FunctionSentence
from .wordpiece import CLS_ID, PAD_ID, Vocabulary, encode, load_vocab

CLASSES = (BENIGN, MALICIOUS)

ARTIFACT_MAGIC = b"AENC"
ARTIFACT_VERSION = 1


@dataclass(frozen=True)
class EncoderConfig:
    layers: int = 2
    hidden_dim: int = 64
    attention_heads: int = 2
    max_len: int = 256
    seed: int = 0
    epochs: int = 3
    batch_size: int = 16
    learning_rate: float = 3e-4

    def __post_init__(self) -> None:
        for name in ("layers", "hidden_dim", "attention_heads", "max_len",
                     "epochs", "batch_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.hidden_dim % self.attention_heads:
            raise ValueError("hidden_dim must be divisible by attention_heads")

    @property
    def ffn_dim(self) -> int:
        return 4 * self.hidden_dim


# Full-scale preset (BERT-distilled geometry); training at this size is an
# external-compute job, not something the desk defaults attempt.
FULL_SCALE_CONFIG = EncoderConfig(layers=6, hidden_dim=768, attention_heads=12,
                                  epochs=3, batch_size=16)


@dataclass(frozen=True)
class FunctionPrediction:
    p_benign: float
    p_malicious: float

    @property
    def predicted(self) -> str:
        return MALICIOUS if self.p_malicious > self.p_benign else BENIGN


@dataclass(frozen=True)
class SamplePrediction:
    function_count: int
    malicious_count: int

    @property
    def malicious_percent(self) -> float:
        return 100.0 * self.malicious_count / self.function_count


# --- layer primitives (forward returns a cache for the backward pass) ---

_LN_EPS = 1e-12


def _layernorm(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mu) * inv
    return g * xhat + b, (xhat, inv, g)


def _layernorm_back(dy, cache):
    xhat, inv, g = cache
    n = xhat.shape[-1]
    dg = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    db = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * g
    dx = inv / n * (
        n * dxhat
        - dxhat.sum(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
    )
    return dx, dg, db


_GELU_C = np.sqrt(2.0 / np.pi)


def _gelu(x):
    u = _GELU_C * (x + 0.044715 * x ** 3)
    t = np.tanh(u)
    return 0.5 * x * (1.0 + t), (x, t)


def _gelu_back(dy, cache):
    x, t = cache
    du = _GELU_C * (1.0 + 3 * 0.044715 * x ** 2)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * du)


def _softmax(x):
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _split_heads(x, heads):
    b, l, d = x.shape
    return x.reshape(b, l, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, l, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, l, h * dh)


def init_params(config: EncoderConfig, vocab_size: int, rng: np.random.Generator) -> dict:
    d, f = config.hidden_dim, config.ffn_dim

    def normal(*shape):
        return rng.normal(0.0, 0.02, size=shape)

    params = {
        "tok_emb": normal(vocab_size, d),
        "pos_emb": normal(config.max_len, d),
        "ln_e.g": np.ones(d),
        "ln_e.b": np.zeros(d),
        "head.w": normal(d, len(CLASSES)),
        "head.b": np.zeros(len(CLASSES)),
    }
    for i in range(config.layers):
        p = f"l{i}."
        for name in ("wq", "wk", "wv", "wo"):
            params[p + name] = normal(d, d)
            params[p + name.replace("w", "b")] = np.zeros(d)
        params[p + "ln1.g"] = np.ones(d)
        params[p + "ln1.b"] = np.zeros(d)
        params[p + "w1"] = normal(d, f)
        params[p + "b1"] = np.zeros(f)
        params[p + "w2"] = normal(f, d)
        params[p + "b2"] = np.zeros(d)
        params[p + "ln2.g"] = np.ones(d)
        params[p + "ln2.b"] = np.zeros(d)
    return params


def forward(params: dict, config: EncoderConfig, ids: np.ndarray, key_mask: np.ndarray):
    """Logits for a padded batch of token ids; also returns the cache."""
    b, l = ids.shape
    heads = config.attention_heads
    scale = 1.0 / np.sqrt(config.hidden_dim // heads)
    bias = np.where(key_mask, 0.0, -1e9)[:, None, None, :]

    e = params["tok_emb"][ids] + params["pos_emb"][:l]
    x, ln_e_cache = _layernorm(e, params["ln_e.g"], params["ln_e.b"])
    caches = []
    for i in range(config.layers):
        p = f"l{i}."
        q = x @ params[p + "wq"] + params[p + "bq"]
        k = x @ params[p + "wk"] + params[p + "bk"]
        v = x @ params[p + "wv"] + params[p + "bv"]
        qh, kh, vh = (_split_heads(t, heads) for t in (q, k, v))
        scores = qh @ kh.swapaxes(-1, -2) * scale + bias
        att = _softmax(scores)
        ctx = _merge_heads(att @ vh)
        attn_out = ctx @ params[p + "wo"] + params[p + "bo"]
        h1, ln1_cache = _layernorm(x + attn_out, params[p + "ln1.g"], params[p + "ln1.b"])
        z1 = h1 @ params[p + "w1"] + params[p + "b1"]
        a1, gelu_cache = _gelu(z1)
        ffn_out = a1 @ params[p + "w2"] + params[p + "b2"]
        h2, ln2_cache = _layernorm(h1 + ffn_out, params[p + "ln2.g"], params[p + "ln2.b"])
        caches.append((x, qh, kh, vh, att, ctx, ln1_cache, h1, a1, gelu_cache, ln2_cache))
        x = h2
    pooled = x[:, 0, :]
    logits = pooled @ params["head.w"] + params["head.b"]
    return logits, (ids, key_mask, ln_e_cache, caches, pooled)


def backward(params: dict, config: EncoderConfig, dlogits: np.ndarray, cache) -> dict:
    """Gradients of the loss for every parameter, given dloss/dlogits."""
    ids, key_mask, ln_e_cache, caches, pooled = cache
    heads = config.attention_heads
    scale = 1.0 / np.sqrt(config.hidden_dim // heads)
    grads = {
        "head.w": pooled.T @ dlogits,
        "head.b": dlogits.sum(axis=0),
    }
    dx = np.zeros((ids.shape[0], ids.shape[1], config.hidden_dim))
    dx[:, 0, :] = dlogits @ params["head.w"].T

    for i in reversed(range(config.layers)):
        p = f"l{i}."
        x, qh, kh, vh, att, ctx, ln1_cache, h1, a1, gelu_cache, ln2_cache = caches[i]

        dr2, grads[p + "ln2.g"], grads[p + "ln2.b"] = _layernorm_back(dx, ln2_cache)
        dffn = dr2
        grads[p + "w2"] = np.einsum("blf,bld->fd", a1, dffn)
        grads[p + "b2"] = dffn.sum(axis=(0, 1))
        da1 = dffn @ params[p + "w2"].T
        dz1 = _gelu_back(da1, gelu_cache)
        grads[p + "w1"] = np.einsum("bld,blf->df", h1, dz1)
        grads[p + "b1"] = dz1.sum(axis=(0, 1))
        dh1 = dr2 + dz1 @ params[p + "w1"].T

        dr1, grads[p + "ln1.g"], grads[p + "ln1.b"] = _layernorm_back(dh1, ln1_cache)
        dattn_out = dr1
        grads[p + "wo"] = np.einsum("bld,ble->de", ctx, dattn_out)
        grads[p + "bo"] = dattn_out.sum(axis=(0, 1))
        dctx = dattn_out @ params[p + "wo"].T
        dctxh = _split_heads(dctx, heads)
        datt = dctxh @ vh.swapaxes(-1, -2)
        dvh = att.swapaxes(-1, -2) @ dctxh
        ds = att * (datt - (datt * att).sum(axis=-1, keepdims=True))
        dqh = ds @ kh * scale
        dkh = ds.swapaxes(-1, -2) @ qh * scale
        dq, dk, dv = (_merge_heads(t) for t in (dqh, dkh, dvh))
        for name, dt in (("q", dq), ("k", dk), ("v", dv)):
            grads[p + "w" + name] = np.einsum("bld,ble->de", x, dt)
            grads[p + "b" + name] = dt.sum(axis=(0, 1))
        dx = (
            dr1
            + dq @ params[p + "wq"].T
            + dk @ params[p + "wk"].T
            + dv @ params[p + "wv"].T
        )

    de, grads["ln_e.g"], grads["ln_e.b"] = _layernorm_back(dx, ln_e_cache)
    dtok = np.zeros_like(params["tok_emb"])
    np.add.at(dtok, ids, de)
    grads["tok_emb"] = dtok
    dpos = np.zeros_like(params["pos_emb"])
    dpos[: ids.shape[1]] = de.sum(axis=0)
    grads["pos_emb"] = dpos
    return grads


def loss_and_grads(params, config, ids, key_mask, labels):
    """Mean cross-entropy over a batch plus gradients for every parameter."""
    logits, cache = forward(params, config, ids, key_mask)
    probs = _softmax(logits)
    n = labels.shape[0]
    loss = float(-np.log(probs[np.arange(n), labels] + 1e-300).mean())
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return loss, backward(params, config, dlogits, cache)


# --- batching ---

def featurize(sentence, vocab: Vocabulary, max_len: int) -> list[int]:
    """Token ids with the leading classification slot, truncated to max_len."""
    pieces = encode(sentence, vocab, max_len=max_len - 1)
    return [CLS_ID] + list(pieces.ids)


def _pad_batch(id_lists: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    width = max(len(ids) for ids in id_lists)
    batch = np.full((len(id_lists), width), PAD_ID, dtype=np.int64)
    for row, ids in enumerate(id_lists):
        batch[row, : len(ids)] = ids
    return batch, batch != PAD_ID


class FunctionClassifier:
    """A trained encoder bound to its vocabulary; inference is read-only."""

    def __init__(self, config: EncoderConfig, vocab: Vocabulary, params: dict):
        self.config = config
        self.vocab = vocab
        self.params = params

    def classify_words(self, words) -> FunctionPrediction:
        return self.classify_batch([words])[0]

    def classify_batch(self, sentences: Sequence) -> list[FunctionPrediction]:
        out: list[FunctionPrediction] = []
        features = []
        for sentence in sentences:
            words = sentence.words if isinstance(sentence, FunctionSentence) else list(sentence)
            if not words:
                raise EmptyFunction("cannot classify an empty sentence")
            features.append(featurize(words, self.vocab, self.config.max_len))
        step = 128
        for lo in range(0, len(features), step):
            ids, mask = _pad_batch(features[lo: lo + step])
            logits, _ = forward(self.params, self.config, ids, mask)
            probs = _softmax(logits)
            out.extend(FunctionPrediction(float(p[0]), float(p[1])) for p in probs)
        return out

    def save(self, path: str | Path, vocab_file: str | None = None) -> None:
        save_model(self, path, vocab_file=vocab_file)


def classify_function(classifier, sentence) -> FunctionPrediction:
    """Softmax prediction for one function sentence."""
    words = sentence.words if isinstance(sentence, FunctionSentence) else list(sentence)
    if not words:
        raise EmptyFunction("cannot classify an empty sentence")
    return classifier.classify_words(words)


def classify_sample_functions(classifier, functions: Sequence) -> SamplePrediction:
    """Tally per-function argmax labels over a sample's functions."""
    if not functions:
        raise EmptyFunction("sample has no functions to classify")
    predictions = classifier.classify_batch(functions)
    malicious = sum(1 for p in predictions if p.predicted == MALICIOUS)
    return SamplePrediction(function_count=len(predictions), malicious_count=malicious)


# --- training ---

def _stratified_split(labels: np.ndarray, val_fraction: float, rng: np.random.Generator):
    train_idx: list[int] = []
    val_idx: list[int] = []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(idx.size)]
        k = max(1, int(round(val_fraction * idx.size))) if idx.size >= 2 else 0
        val_idx.extend(idx[:k])
        train_idx.extend(idx[k:])
    return np.sort(np.array(train_idx)), np.sort(np.array(val_idx))


def _evaluate(params, config, features, labels, batch_size):
    total_loss = 0.0
    correct = 0
    for lo in range(0, len(features), batch_size):
        chunk = features[lo: lo + batch_size]
        ids, mask = _pad_batch(chunk)
        logits, _ = forward(params, config, ids, mask)
        probs = _softmax(logits)
        y = labels[lo: lo + batch_size]
        total_loss += float(-np.log(probs[np.arange(len(chunk)), y] + 1e-300).sum())
        correct += int((probs.argmax(axis=1) == y).sum())
    return total_loss / len(features), correct / len(features)


def train_function_classifier(
    train, val_fraction: float, config: EncoderConfig, vocab: Vocabulary
) -> tuple[FunctionClassifier, float, float]:
    """Train on labeled sentences; returns (classifier, val_loss, val_accuracy).

    ``train`` is a sequence of (sentence, label) pairs with labels
    "benign"/"malicious". Deterministic for a fixed config seed.
    """
    if not 0.0 < val_fraction < 1.0:
        raise ValueError("val_fraction must be in (0, 1)")
    pairs = list(train)
    label_ids = np.array([CLASSES.index(label) for _, label in pairs], dtype=np.int64)
    if len(np.unique(label_ids)) < 2:
        raise DegenerateTraining("training corpus holds a single label")

    features = [featurize(sentence, vocab, config.max_len) for sentence, _ in pairs]
    rng = np.random.default_rng(config.seed)
    train_idx, val_idx = _stratified_split(label_ids, val_fraction, rng)
    if train_idx.size == 0 or val_idx.size == 0:
        raise DegenerateTraining("split left an empty partition")

    params = init_params(config, vocab.size, rng)
    adam_m = {k: np.zeros_like(v) for k, v in params.items()}
    adam_v = {k: np.zeros_like(v) for k, v in params.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    for _ in range(config.epochs):
        order = train_idx[rng.permutation(train_idx.size)]
        for lo in range(0, order.size, config.batch_size):
            batch_idx = order[lo: lo + config.batch_size]
            ids, mask = _pad_batch([features[i] for i in batch_idx])
            loss, grads = loss_and_grads(params, config, ids, mask, label_ids[batch_idx])
            step += 1
            for name, grad in grads.items():
                adam_m[name] = beta1 * adam_m[name] + (1 - beta1) * grad
                adam_v[name] = beta2 * adam_v[name] + (1 - beta2) * grad ** 2
                m_hat = adam_m[name] / (1 - beta1 ** step)
                v_hat = adam_v[name] / (1 - beta2 ** step)
                params[name] -= config.learning_rate * m_hat / (np.sqrt(v_hat) + eps)

    val_loss, val_acc = _evaluate(
        params, config, [features[i] for i in val_idx], label_ids[val_idx], config.batch_size
    )
    return FunctionClassifier(config, vocab, params), val_loss, val_acc


# --- artifact persistence ---

def save_model(classifier: FunctionClassifier, path: str | Path, vocab_file: str | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = sorted(classifier.params)
    vocab_sha = None
    if vocab_file is not None:
        vocab_path = path.parent / vocab_file
        if vocab_path.exists():
            vocab_sha = hashlib.sha256(vocab_path.read_bytes()).hexdigest()
    header = {
        "config": asdict(classifier.config),
        "classes": list(CLASSES),
        "vocab_file": vocab_file,
        "vocab_sha256": vocab_sha,
        "tensors": [{"name": n, "shape": list(classifier.params[n].shape)} for n in names],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(ARTIFACT_MAGIC)
        fh.write(struct.pack("<I", ARTIFACT_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for name in names:
            fh.write(np.ascontiguousarray(classifier.params[name], dtype="<f8").tobytes())


def load_model(path: str | Path, vocab: Vocabulary | None = None) -> FunctionClassifier:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != ARTIFACT_MAGIC:
        raise ValueError(f"{path} is not an encoder artifact")
    version = struct.unpack("<I", raw[4:8])[0]
    if version != ARTIFACT_VERSION:
        raise ValueError(f"unsupported artifact version {version}")
    header_len = struct.unpack("<Q", raw[8:16])[0]
    header = json.loads(raw[16: 16 + header_len].decode("utf-8"))
    config = EncoderConfig(**header["config"])
    params = {}
    offset = 16 + header_len
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape)
        params[entry["name"]] = arr.astype(float)
        offset += count * 8
    if vocab is None:
        if not header.get("vocab_file"):
            raise ValueError(f"{path} records no vocab reference; pass one explicitly")
        vocab = load_vocab(path.parent / header["vocab_file"])
    return FunctionClassifier(config, vocab, params)
