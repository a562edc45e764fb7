"""Top-2 principal-direction projection and deterministic scatter rendering.

Directions come from power iteration with deflation: at most 100 iterations
per component, a seed-fixed start vector, and a 1e-9 convergence tolerance.
Covariance of rank < 2 triggers a DegenerateCovariance warning and a
fallback to the first two raw coordinates. Rendering pins the SVG hash salt
and strips the date so identical inputs give identical bytes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .dataio import FeatureMatrix
from .errors import DegenerateCovariance, DimensionMismatch, IoFailure, TooFewPoints

_ITERATIONS = 100
_TOL = 1e-9
_START_ENTROPY = 0x5DEECE66D
_RANK_RATIO = 1e-12

_COLORS = (
    "tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple",
    "tab:brown", "tab:pink", "tab:gray", "tab:olive", "tab:cyan",
)


@dataclass(frozen=True, eq=False)
class Projection:
    coords: np.ndarray        # (n, 2)
    components: np.ndarray    # (2, d); raw axis basis on the fallback path
    variances: np.ndarray     # (2,) eigenvalue estimates
    degenerate: bool


def _power_iteration(mat: np.ndarray, start: np.ndarray, orthogonal_to: np.ndarray | None):
    v = start / np.linalg.norm(start)
    if orthogonal_to is not None:
        v = v - (v @ orthogonal_to) * orthogonal_to
        norm = np.linalg.norm(v)
        if norm <= 1e-300:
            return v, 0.0
        v /= norm
    for _ in range(_ITERATIONS):
        w = mat @ v
        if orthogonal_to is not None:
            w = w - (w @ orthogonal_to) * orthogonal_to
        norm = np.linalg.norm(w)
        if norm <= 1e-300:
            return v, 0.0
        w /= norm
        done = np.linalg.norm(w - v) < _TOL
        v = w
        if done:
            break
    return v, float(v @ mat @ v)


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    pivot = int(np.argmax(np.abs(v)))
    return -v if v[pivot] < 0 else v


def project_2d(points) -> Projection:
    """Project (n, d) points onto their top-2 principal directions.

    Requires n >= 3 and d >= 2. Coordinates are centered before projection;
    the degenerate fallback returns the raw first two columns instead.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] < 2:
        raise DimensionMismatch("projection needs a 2-D matrix with d >= 2")
    n, d = pts.shape
    if n < 3:
        raise TooFewPoints(f"projection needs n >= 3 points, got {n}")

    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    rng = np.random.default_rng(np.random.SeedSequence([_START_ENTROPY, d]))
    v1, l1 = _power_iteration(cov, rng.standard_normal(d), None)
    deflated = cov - l1 * np.outer(v1, v1)
    v2, l2 = _power_iteration(deflated, rng.standard_normal(d), v1)

    if l1 < 1e-30 or l2 < _RANK_RATIO * l1:
        warnings.warn(
            DegenerateCovariance(
                "covariance rank < 2; falling back to the first two raw coordinates"
            )
        )
        components = np.zeros((2, d))
        components[0, 0] = 1.0
        components[1, 1] = 1.0
        return Projection(
            coords=pts[:, :2].copy(),
            components=components,
            variances=np.array([l1, l2]),
            degenerate=True,
        )

    components = np.vstack([_canonical_sign(v1), _canonical_sign(v2)])
    return Projection(
        coords=centered @ components.T,
        components=components,
        variances=np.array([l1, l2]),
        degenerate=False,
    )


def render_scatter(
    m: FeatureMatrix,
    projection: Projection,
    path,
    abstained: np.ndarray | None = None,
) -> None:
    """Write a class-colored SVG scatter; abstained samples render hollow.

    Output bytes are a pure function of the inputs.
    """
    coords = projection.coords
    hollow = (
        np.zeros(m.n, dtype=bool)
        if abstained is None
        else np.asarray(abstained, dtype=bool)
    )

    fig = Figure(figsize=(8.0, 6.0))
    ax = fig.subplots()
    for c, name in enumerate(m.class_names):
        color = _COLORS[c % len(_COLORS)]
        mask = m.labels == c
        filled = mask & ~hollow
        open_ = mask & hollow
        if filled.any():
            ax.scatter(coords[filled, 0], coords[filled, 1], s=18, color=color, label=name)
        if open_.any():
            ax.scatter(
                coords[open_, 0], coords[open_, 1], s=18,
                facecolors="none", edgecolors=color,
            )
    if hollow.any():
        ax.scatter([], [], s=18, facecolors="none", edgecolors="black", label="abstained")
    ax.set_xlabel("component 1" if not projection.degenerate else "f0")
    ax.set_ylabel("component 2" if not projection.degenerate else "f1")
    ax.legend(loc="upper right", frameon=True)

    try:
        with matplotlib.rc_context({"svg.hashsalt": "densegap"}):
            fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
