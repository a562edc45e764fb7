"""Chi-square feature scoring and top-k retention.

For feature f, the observed mass O[f][c] is the sum of f over class-c rows.
With T_f the total mass over all rows and n_c/n the class prior,
E[f][c] = T_f * n_c / n and

    score_f = sum_c (O[f][c] - E[f][c])**2 / E[f][c]

so a feature whose mass splits across classes in proportion to the priors
scores 0, and label-dependent features score high. A constant-zero feature
scores 0 by convention. Accumulation happens in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import FeatureMatrix
from .errors import DimensionMismatch, KOutOfRange, NegativeFeatureValue, SingleClass


@dataclass(frozen=True, eq=False)
class FeatureSelector:
    """Per-feature chi-square scores and the top-k retention mask."""

    scores: np.ndarray
    mask: np.ndarray
    k: int
    d_original: int

    def __post_init__(self):
        scores = np.ascontiguousarray(self.scores, dtype=np.float64)
        mask = np.ascontiguousarray(self.mask, dtype=bool)
        if scores.shape != (self.d_original,) or mask.shape != (self.d_original,):
            raise ValueError("scores and mask must have length d_original")
        if not (1 <= self.k <= self.d_original):
            raise ValueError("k must satisfy 1 <= k <= d_original")
        if int(mask.sum()) != self.k:
            raise ValueError("mask must retain exactly k features")
        if not np.all(np.isfinite(scores)) or scores.min() < 0:
            raise ValueError("scores must be finite and nonnegative")
        scores.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "mask", mask)

    def retained_indices(self) -> np.ndarray:
        return np.nonzero(self.mask)[0]

    def to_dict(self) -> dict:
        return {
            "d": self.d_original,
            "k": self.k,
            "scores": [float(s) for s in self.scores],
            "mask": [bool(b) for b in self.mask],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureSelector":
        return cls(
            scores=np.asarray(doc["scores"], dtype=np.float64),
            mask=np.asarray(doc["mask"], dtype=bool),
            k=int(doc["k"]),
            d_original=int(doc["d"]),
        )


def chi_square_scores(m: FeatureMatrix) -> np.ndarray:
    """Score every feature against the class label; length-d float64 array.

    Requires at least two declared classes and nonnegative values (values are
    read as nonnegative observed mass). Use shift_nonnegative first when the
    embedding has negative activations.
    """
    if len(m.class_names) < 2:
        raise SingleClass("chi-square scores need at least two classes")
    neg = np.argwhere(m.values < 0)
    if neg.size:
        r, c = int(neg[0, 0]), int(neg[0, 1])
        raise NegativeFeatureValue(r, c)

    x = m.values.astype(np.float64)
    n, d = x.shape
    k = len(m.class_names)
    observed = np.zeros((k, d), dtype=np.float64)
    counts = np.zeros(k, dtype=np.float64)
    for c in range(k):
        rows = m.labels == c
        counts[c] = rows.sum()
        if counts[c]:
            observed[c] = x[rows].sum(axis=0)
    total = observed.sum(axis=0)
    expected = (counts / n)[:, None] * total[None, :]
    # expected == 0 covers both all-zero features and absent classes; both
    # contribute nothing rather than dividing by zero.
    safe = np.where(expected > 0, expected, 1.0)
    terms = np.where(expected > 0, (observed - expected) ** 2 / safe, 0.0)
    return terms.sum(axis=0)


def fit_selector(m: FeatureMatrix, k: int) -> FeatureSelector:
    """Retain the k highest-scoring features; ties keep the lower index."""
    if not (1 <= k <= m.d):
        raise KOutOfRange(f"k={k} outside [1, {m.d}]")
    scores = chi_square_scores(m)
    order = np.argsort(-scores, kind="stable")
    mask = np.zeros(m.d, dtype=bool)
    mask[order[:k]] = True
    return FeatureSelector(scores=scores, mask=mask, k=k, d_original=m.d)


def apply_selector(sel: FeatureSelector, m: FeatureMatrix) -> FeatureMatrix:
    """Project `m` onto the retained columns (original relative order)."""
    if m.d != sel.d_original:
        raise DimensionMismatch(f"matrix has d={m.d}, selector expects {sel.d_original}")
    return FeatureMatrix(m.values[:, sel.mask], m.labels, m.class_names)


def shift_nonnegative(m: FeatureMatrix, reference: FeatureMatrix | None = None) -> FeatureMatrix:
    """Shift columns containing negatives up so their minimum is 0.

    The per-column shift is computed on `reference` (default: `m` itself) so
    that several splits of one dataset can be moved by the same vector.
    Columns that are already nonnegative in the reference are untouched.
    Shifting changes chi-square scores; this is an explicit preprocessing
    step, never applied silently.
    """
    ref = reference if reference is not None else m
    if ref.d != m.d:
        raise DimensionMismatch(f"reference has d={ref.d}, matrix has d={m.d}")
    shift = np.minimum(ref.values.min(axis=0), 0.0).astype(np.float32)
    if not shift.any():
        return m
    return FeatureMatrix(m.values - shift, m.labels, m.class_names)
