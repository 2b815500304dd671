"""Linear soft-margin SVM with standardized features and quartile thresholds.

The fit is a deterministic full-batch subgradient descent on the primal
hinge objective (Pegasos-style 1/t schedule with norm projection and
best-iterate tracking), which keeps refits reproducible bit for bit.
Positive decision distances mean malicious.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateFit, DimensionError, EmptyDistances

MALICIOUS_SIGN = +1


@dataclass
class HyperplaneModel:
    weights: np.ndarray
    bias: float
    feature_means: np.ndarray
    feature_scales: np.ndarray
    positive_class: str = "malicious"

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])


@dataclass(frozen=True)
class ConfidenceThresholds:
    """Quartile confidence band: decide outside it, flag inside it."""

    upper_threshold: float
    lower_threshold: float

    def __post_init__(self) -> None:
        if not (self.upper_threshold >= 0.0 >= self.lower_threshold):
            raise ValueError("thresholds must straddle zero")


def _objective(w: np.ndarray, b: float, Z: np.ndarray, y: np.ndarray, c: float) -> float:
    margins = y * (Z @ w + b)
    hinge = np.clip(1.0 - margins, 0.0, None).sum()
    return 0.5 * float(w @ w) + c * float(hinge)


def fit_linear_svm(
    points,
    labels,
    c: float = 1.0,
    max_iter: int = 20000,
    tol: float = 1e-6,
    patience: int = 500,
) -> HyperplaneModel:
    """Fit a linear hyperplane on standardized features with equal class weights.

    ``labels`` are -1 (benign) / +1 (malicious). Raises DegenerateFit when a
    single class is present.
    """
    X = np.asarray(points, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionError("points and labels disagree in shape")
    if X.shape[0] < 2 or len(np.unique(y)) < 2:
        raise DegenerateFit("need at least two points covering both classes")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise ValueError("labels must be -1/+1")

    means = X.mean(axis=0)
    stds = X.std(axis=0)
    scales = np.where(stds > 0, stds, 1.0)
    Z = (X - means) / scales
    n, d = Z.shape

    # bias as an unstandardized constant column; regularized along with w,
    # which keeps the objective strongly convex in every coordinate
    Zb = np.concatenate([Z, np.ones((n, 1))], axis=1)
    lam = 1.0 / (c * n)
    radius = 1.0 / np.sqrt(lam)

    w = np.zeros(d + 1)
    best_w = w.copy()
    best_obj = _objective(w[:d], w[d], Z, y, c)
    since_improvement = 0
    for t in range(1, max_iter + 1):
        margins = y * (Zb @ w)
        viol = margins < 1.0
        grad = lam * w - (y[viol] @ Zb[viol]) / n
        w = w - grad / (lam * t)
        norm = np.linalg.norm(w)
        if norm > radius:
            w = w * (radius / norm)
        obj = _objective(w[:d], w[d], Z, y, c)
        if obj < best_obj - tol:
            best_obj = obj
            best_w = w.copy()
            since_improvement = 0
        else:
            since_improvement += 1
            if since_improvement >= patience:
                break

    weights = best_w[:d]
    if not np.linalg.norm(weights) > 0:
        raise DegenerateFit("optimizer collapsed to a zero weight vector")
    return HyperplaneModel(
        weights=weights,
        bias=float(best_w[d]),
        feature_means=means,
        feature_scales=scales,
    )


def decision_distance(model: HyperplaneModel, point) -> float:
    """Signed, norm-scaled distance of one point from the hyperplane."""
    x = np.asarray(point, dtype=float)
    if x.shape != (model.dim,):
        raise DimensionError(f"expected {model.dim} features, got shape {x.shape}")
    z = (x - model.feature_means) / model.feature_scales
    return float((model.weights @ z + model.bias) / np.linalg.norm(model.weights))


def predict(model: HyperplaneModel, point) -> str:
    """Class of a point; zero distance counts as benign."""
    return "malicious" if decision_distance(model, point) > 0 else "benign"


def quartile_thresholds(distances) -> ConfidenceThresholds:
    """Confidence band from the class-side quartiles nearest zero.

    Upper bound is the first quartile of the positive distances, lower bound
    the quartile of the negative distances closest to zero; a side with no
    mass degenerates to 0. Quartiles interpolate linearly.
    """
    d = np.asarray(list(distances), dtype=float)
    if d.size == 0:
        raise EmptyDistances("no distances to derive thresholds from")
    pos = d[d > 0]
    neg = d[d < 0]
    upper = float(np.percentile(pos, 25)) if pos.size else 0.0
    lower = float(np.percentile(neg, 75)) if neg.size else 0.0
    return ConfidenceThresholds(upper_threshold=upper, lower_threshold=lower)


# --- persistence ---

FORMAT_TAG = "alpha-svm/1"


def save_hyperplane(
    model: HyperplaneModel,
    path: str | Path,
    thresholds: ConfidenceThresholds | None = None,
) -> None:
    record = {
        "format": FORMAT_TAG,
        "weights": model.weights.tolist(),
        "bias": model.bias,
        "means": model.feature_means.tolist(),
        "scales": model.feature_scales.tolist(),
        "positive_class": model.positive_class,
        "thresholds": None if thresholds is None else {
            "upper": thresholds.upper_threshold,
            "lower": thresholds.lower_threshold,
        },
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_hyperplane(path: str | Path) -> tuple[HyperplaneModel, ConfidenceThresholds | None]:
    record = json.loads(Path(path).read_text(encoding="utf-8"))
    if record.get("format") != FORMAT_TAG:
        raise ValueError(f"{path} is not a {FORMAT_TAG} record")
    model = HyperplaneModel(
        weights=np.asarray(record["weights"], dtype=float),
        bias=float(record["bias"]),
        feature_means=np.asarray(record["means"], dtype=float),
        feature_scales=np.asarray(record["scales"], dtype=float),
        positive_class=record.get("positive_class", "malicious"),
    )
    thresholds = None
    if record.get("thresholds") is not None:
        thresholds = ConfidenceThresholds(
            upper_threshold=float(record["thresholds"]["upper"]),
            lower_threshold=float(record["thresholds"]["lower"]),
        )
    return model, thresholds
