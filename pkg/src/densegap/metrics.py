"""Selective-prediction evaluation: retained accuracy, per-class sensitivity
and PPV, abstention-rate sweeps, and with/without-selection comparisons.

All metrics are computed on the retained (non-abstained) set; abstained
samples leave both numerator and denominator. Undefined ratios (no retained
samples of a class, no baseline errors) are recorded as absent, never 0.
Reports store raw fractions; percent formatting is presentation-layer.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .abstain import AbstentionModel, Decision, calibrate_eta, decide_batch, fit_model
from .cluster import DbscanParams
from .dataio import FeatureMatrix
from .errors import LengthMismatch, UnknownClass


@dataclass(frozen=True)
class ClassMetrics:
    name: str
    sensitivity: float | None
    ppv: float | None
    support_retained: int

    def to_dict(self) -> dict:
        return {
            "class": self.name,
            "sensitivity": self.sensitivity,
            "ppv": self.ppv,
            "support_retained": self.support_retained,
        }


@dataclass(frozen=True, eq=False)
class SelectiveReport:
    target_rate: float | None
    achieved_rate: float
    retained_accuracy: float | None
    per_class: tuple[ClassMetrics, ...]
    abstained_indices: tuple[int, ...]
    mistaken_caught_fraction: float | None

    def to_dict(self) -> dict:
        return {
            "target_rate": self.target_rate,
            "achieved_rate": self.achieved_rate,
            "retained_accuracy": self.retained_accuracy,
            "per_class": [c.to_dict() for c in self.per_class],
            "abstained_indices": list(self.abstained_indices),
            "mistaken_caught_fraction": self.mistaken_caught_fraction,
        }


@dataclass(frozen=True, eq=False)
class SweepReport:
    rows: tuple[SelectiveReport, ...]
    dataset_meta: dict

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows], "dataset_meta": self.dataset_meta}


@dataclass(frozen=True, eq=False)
class SelectionComparison:
    without_selection: SweepReport
    with_selection: SweepReport
    ppv_deltas: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {
            "without_selection": self.without_selection.to_dict(),
            "with_selection": self.with_selection.to_dict(),
            "ppv_deltas": list(self.ppv_deltas),
        }


def align_labels(m: FeatureMatrix, class_names: tuple[str, ...]) -> np.ndarray:
    """Re-index a matrix's labels into another class-name ordering.

    First-appearance order differs between files, so evaluation always maps
    by name into the model's ordering.
    """
    mapping = {name: i for i, name in enumerate(class_names)}
    try:
        lut = np.array([mapping[name] for name in m.class_names], dtype=np.int64)
    except KeyError as exc:
        raise UnknownClass(f"class {exc.args[0]!r} is not known to the model") from None
    return lut[m.labels]


def evaluate(
    decisions: list[Decision],
    labels,
    class_names: tuple[str, ...] | None = None,
    *,
    target_rate: float | None = None,
) -> SelectiveReport:
    """Score decisions against true labels.

    Sensitivity of class c is TP / retained-samples-of-true-class-c, PPV is
    TP / retained-predictions-of-c. mistaken_caught_fraction is the share of
    would-be-wrong predictions (over all samples) that were abstained.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if len(decisions) != labels.shape[0]:
        raise LengthMismatch(f"{len(decisions)} decisions vs {labels.shape[0]} labels")
    if len(decisions) == 0:
        raise ValueError("cannot evaluate zero samples")

    k = len(decisions[0].distances)
    if class_names is None:
        class_names = tuple(str(c) for c in range(k))
    preds = np.array([d.predicted_class for d in decisions], dtype=np.int64)
    abstained = np.array([d.abstained for d in decisions], dtype=bool)
    retained = ~abstained
    correct = preds == labels

    n = labels.shape[0]
    achieved = float(abstained.sum()) / n
    retained_accuracy = float(correct[retained].mean()) if retained.any() else None

    per_class = []
    for c, name in enumerate(class_names):
        true_c = retained & (labels == c)
        pred_c = retained & (preds == c)
        tp = int((true_c & (preds == c)).sum())
        sens = tp / int(true_c.sum()) if true_c.any() else None
        ppv = tp / int(pred_c.sum()) if pred_c.any() else None
        per_class.append(
            ClassMetrics(name=name, sensitivity=sens, ppv=ppv, support_retained=int(true_c.sum()))
        )

    wrong = ~correct
    caught = float((wrong & abstained).sum()) / int(wrong.sum()) if wrong.any() else None

    return SelectiveReport(
        target_rate=target_rate,
        achieved_rate=achieved,
        retained_accuracy=retained_accuracy,
        per_class=tuple(per_class),
        abstained_indices=tuple(int(i) for i in np.nonzero(abstained)[0]),
        mistaken_caught_fraction=caught,
    )


def sweep(
    model: AbstentionModel,
    calibration: FeatureMatrix,
    test: FeatureMatrix,
    rates,
) -> SweepReport:
    """Calibrate eta per target rate, decide the test set, and evaluate.

    Rates are deduplicated and rows come out sorted ascending by target rate;
    the model's own eta is ignored (each row uses its calibrated value).
    """
    unique_rates = sorted({float(r) for r in rates})
    for r in unique_rates:
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"rate {r} outside [0, 1]")
    labels = align_labels(test, model.class_names)
    rows = []
    for r in unique_rates:
        cal = calibrate_eta(model, calibration, r)
        decisions = decide_batch(model.with_eta(cal.eta), test)
        rows.append(evaluate(decisions, labels, model.class_names, target_rate=r))
    meta = {"n": test.n, "d": test.d, "class_counts": test.class_counts()}
    return SweepReport(rows=tuple(rows), dataset_meta=meta)


def compare_selection(
    train: FeatureMatrix,
    calibration: FeatureMatrix,
    test: FeatureMatrix,
    k: int,
    rates,
    *,
    params: DbscanParams | None = None,
    score_matrix: FeatureMatrix | None = None,
) -> SelectionComparison:
    """Run the sweep twice — raw features vs chi-square top-k — with the same
    clustering parameters, and report per-class PPV deltas per rate.

    When `params` is omitted they are suggested once (on the raw training
    matrix) and shared by both branches. Chi-square scoring needs nonnegative
    values; pass a shifted copy of train as `score_matrix` when the raw
    training matrix has negatives.
    """
    base = fit_model(train, params=params)
    selected = fit_model(train, params=base.params, k=k, score_matrix=score_matrix)
    without = sweep(base, calibration, test, rates)
    with_sel = sweep(selected, calibration, test, rates)

    deltas = []
    for row_without, row_with in zip(without.rows, with_sel.rows):
        for cm_without, cm_with in zip(row_without.per_class, row_with.per_class):
            delta = None
            if cm_without.ppv is not None and cm_with.ppv is not None:
                delta = cm_with.ppv - cm_without.ppv
            deltas.append(
                {
                    "target_rate": row_without.target_rate,
                    "class": cm_without.name,
                    "ppv_without": cm_without.ppv,
                    "ppv_with": cm_with.ppv,
                    "delta": delta,
                }
            )
    return SelectionComparison(
        without_selection=without, with_selection=with_sel, ppv_deltas=tuple(deltas)
    )


def sweep_to_csv(report: SweepReport) -> str:
    """One row per (rate, class), empty cells for absent metrics."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "target_rate",
            "achieved_rate",
            "retained_accuracy",
            "class",
            "sensitivity",
            "ppv",
            "support_retained",
            "mistaken_caught_fraction",
        ]
    )

    def cell(v):
        return "" if v is None else repr(float(v)) if isinstance(v, float) else v

    for row in report.rows:
        for cm in row.per_class:
            writer.writerow(
                [
                    cell(row.target_rate),
                    cell(row.achieved_rate),
                    cell(row.retained_accuracy),
                    cm.name,
                    cell(cm.sensitivity),
                    cell(cm.ppv),
                    cm.support_retained,
                    cell(row.mistaken_caught_fraction),
                ]
            )
    return buf.getvalue()
