"""The abstention decision rule and the persisted model around it.

A sample is scored by its euclidean distance to every class centroid (in the
selector-reduced space when a selector is present). The prediction is the
nearest centroid; the sample is abstained when the gap between its two
nearest centroid distances falls strictly below the tolerance eta. Eta is
calibrated as a quantile of the gap distribution on a calibration split.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .cluster import CentroidSet, DbscanParams, fit_centroids, suggest_eps
from .dataio import FeatureMatrix
from .errors import (
    CorruptModel,
    DimensionMismatch,
    EmptyCalibrationSet,
    IoFailure,
    MissingFile,
    NonFiniteInput,
    SchemaVersionMismatch,
    ValidationError,
)
from .featsel import FeatureSelector, apply_selector, fit_selector

FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class AbstentionModel:
    """Centroids + optional selector + tolerance: the deployable artifact."""

    centroids: CentroidSet
    params: DbscanParams
    eta: float = 0.0
    selector: FeatureSelector | None = None
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if not np.isfinite(self.eta) or self.eta < 0:
            raise ValueError("eta must be a finite nonnegative real")
        if len(self.centroids.class_names) < 2:
            raise ValueError("the gap rule needs at least two classes")
        if self.selector is not None and self.selector.k != self.centroids.d:
            raise ValueError("selector k must equal the centroid dimensionality")

    @property
    def input_dim(self) -> int:
        """Raw feature dimensionality expected at decision time."""
        return self.selector.d_original if self.selector else self.centroids.d

    @property
    def class_names(self) -> tuple[str, ...]:
        return self.centroids.class_names

    def with_eta(self, eta: float) -> "AbstentionModel":
        return replace(self, eta=float(eta))


@dataclass(frozen=True, eq=False)
class Decision:
    predicted_class: int
    gap: float
    abstained: bool
    distances: np.ndarray


@dataclass(frozen=True)
class Calibration:
    eta: float
    achieved_rate: float
    target_rate: float


def _reduce(model: AbstentionModel, raw: np.ndarray) -> np.ndarray:
    """Validate a (n, d_raw) batch and project it into the model's space."""
    x = np.asarray(raw, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise DimensionMismatch(
            f"sample has {x.shape[-1]} features, model expects {model.input_dim}"
        )
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("sample contains NaN or Inf")
    if model.selector is not None:
        x = x[:, model.selector.mask]
    return x


def _distance_matrix(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - centroids[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2))


def distances(model: AbstentionModel, sample) -> np.ndarray:
    """Euclidean distance to each class centroid, in class_names order."""
    x = _reduce(model, sample)
    return _distance_matrix(x, model.centroids.centroids)[0]


def _decide_matrix(model: AbstentionModel, x: np.ndarray) -> list[Decision]:
    dmat = _distance_matrix(x, model.centroids.centroids)
    preds = dmat.argmin(axis=1)                      # ties: lowest class index
    two = np.partition(dmat, 1, axis=1)
    gaps = two[:, 1] - two[:, 0]
    abstained = gaps < model.eta                     # strict: eta=0 never abstains
    out = []
    for i in range(dmat.shape[0]):
        row = dmat[i]
        row.flags.writeable = False
        out.append(
            Decision(
                predicted_class=int(preds[i]),
                gap=float(gaps[i]),
                abstained=bool(abstained[i]),
                distances=row,
            )
        )
    return out


def decide(model: AbstentionModel, sample) -> Decision:
    """Classify one raw sample, abstaining when its distance gap < eta."""
    return _decide_matrix(model, _reduce(model, sample))[0]


def decide_batch(model: AbstentionModel, m: FeatureMatrix) -> list[Decision]:
    """Element-wise decide over the rows of `m`, order preserved."""
    return _decide_matrix(model, _reduce(model, m.values))


def gaps_for(model: AbstentionModel, m: FeatureMatrix) -> np.ndarray:
    """Distance gaps for every row of `m` (eta plays no role)."""
    x = _reduce(model, m.values)
    two = np.partition(_distance_matrix(x, model.centroids.centroids), 1, axis=1)
    return two[:, 1] - two[:, 0]


def calibrate_eta(model: AbstentionModel, calibration: FeatureMatrix, target_rate: float) -> Calibration:
    """Pick eta so the fraction of calibration gaps strictly below it is the
    largest achievable fraction <= target_rate.

    Sorting the gaps ascending, eta = gap[floor(target_rate * n)]; index 0
    gives eta = 0 and target_rate = 1 gives max gap + 1 so everything
    abstains. Ties at eta do not abstain (strict rule), so tied gaps yield
    the largest achievable rate under the target.
    """
    if not 0.0 <= target_rate <= 1.0:
        raise ValueError(f"target_rate must be in [0, 1], got {target_rate}")
    n = calibration.n
    if n == 0:
        raise EmptyCalibrationSet("calibration set is empty")
    gaps = np.sort(gaps_for(model, calibration))

    product = target_rate * n
    nearest = round(product)
    # Decimal targets times integer n land a hair off an integer in binary;
    # snap within 1e-9 so floor() matches the exact-arithmetic index.
    idx = nearest if abs(product - nearest) < 1e-9 else math.floor(product)
    if target_rate >= 1.0 or idx >= n:
        eta = float(gaps[-1]) + 1.0
    elif idx <= 0:
        eta = 0.0
    else:
        eta = float(gaps[idx])
    achieved = float((gaps < eta).sum()) / n
    return Calibration(eta=eta, achieved_rate=achieved, target_rate=float(target_rate))


def fit_model(
    train: FeatureMatrix,
    *,
    params: DbscanParams | None = None,
    k: int | None = None,
    eta: float = 0.0,
    score_matrix: FeatureMatrix | None = None,
) -> AbstentionModel:
    """Fit the full pipeline on a training matrix.

    When `k` is given, a chi-square selector is fitted first (on
    `score_matrix` when provided, e.g. a shifted copy of train) and
    everything downstream — clustering, centroids, distances — lives in the
    reduced space. When `params` is omitted, eps comes from the k-distance
    heuristic with min_pts = 4.
    """
    selector = None
    working = train
    if k is not None:
        basis = score_matrix if score_matrix is not None else train
        selector = fit_selector(basis, k)
        working = apply_selector(selector, train)
    if params is None:
        eps = suggest_eps(working.values, min_pts=4)
        if eps <= 0:
            raise ValidationError("k-distance heuristic suggested eps=0 (coincident points); pass eps explicitly")
        params = DbscanParams(eps=eps, min_pts=4)
    centroids = fit_centroids(working, params)
    return AbstentionModel(centroids=centroids, params=params, eta=float(eta), selector=selector)


# --- persistence ---------------------------------------------------------------

def model_to_dict(model: AbstentionModel) -> dict:
    doc = {
        "format_version": model.format_version,
        "class_names": list(model.class_names),
        "centroids": [[float(v) for v in row] for row in model.centroids.centroids],
        "eta": float(model.eta),
        "dbscan": {"eps": float(model.params.eps), "min_pts": int(model.params.min_pts)},
        "fit_meta": model.centroids.fit_meta,
    }
    if model.selector is not None:
        doc["selector"] = model.selector.to_dict()
    return doc


def save_model(model: AbstentionModel, path) -> None:
    try:
        Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def model_from_dict(doc: dict) -> AbstentionModel:
    try:
        version = doc["format_version"]
    except (TypeError, KeyError):
        raise CorruptModel("model file lacks format_version") from None
    if version != FORMAT_VERSION:
        raise SchemaVersionMismatch(f"unsupported model format_version {version!r}")
    try:
        centroids = CentroidSet(
            centroids=np.asarray(doc["centroids"], dtype=np.float64),
            class_names=tuple(str(c) for c in doc["class_names"]),
            fit_meta=doc.get("fit_meta", {}),
        )
        params = DbscanParams(eps=float(doc["dbscan"]["eps"]), min_pts=int(doc["dbscan"]["min_pts"]))
        selector = FeatureSelector.from_dict(doc["selector"]) if "selector" in doc else None
        return AbstentionModel(
            centroids=centroids,
            params=params,
            eta=float(doc["eta"]),
            selector=selector,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModel(f"model file is structurally invalid: {exc}") from exc


def load_model(path) -> AbstentionModel:
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"no such file: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptModel(f"{path}: not valid JSON: {exc}") from exc
    return model_from_dict(doc)
