"""densegap: selective prediction on feature embeddings.

Chi-square feature filtering, per-class DBSCAN core-distribution centroids,
distance-gap abstention with a calibrated tolerance, and risk/coverage
evaluation reports. See the CLI (`densegap --help`) for the end-to-end
pipeline.
"""

from .abstain import (
    AbstentionModel,
    Calibration,
    Decision,
    calibrate_eta,
    decide,
    decide_batch,
    distances,
    fit_model,
    load_model,
    save_model,
)
from .cluster import (
    NOISE,
    CentroidSet,
    ClusterResult,
    DbscanParams,
    dbscan,
    fit_centroids,
    suggest_eps,
)
from .dataio import (
    FeatureMatrix,
    SynthSpec,
    class_centers,
    load_binary,
    load_csv,
    load_matrix,
    save_binary,
    save_csv,
    save_matrix,
    synthesize,
)
from .featsel import (
    FeatureSelector,
    apply_selector,
    chi_square_scores,
    fit_selector,
    shift_nonnegative,
)
from .metrics import (
    SelectionComparison,
    SelectiveReport,
    SweepReport,
    align_labels,
    compare_selection,
    evaluate,
    sweep,
    sweep_to_csv,
)
from .projection import Projection, project_2d, render_scatter

__version__ = "0.1.0"

__all__ = [
    "AbstentionModel",
    "Calibration",
    "CentroidSet",
    "ClusterResult",
    "DbscanParams",
    "Decision",
    "FeatureMatrix",
    "FeatureSelector",
    "NOISE",
    "Projection",
    "SelectionComparison",
    "SelectiveReport",
    "SweepReport",
    "SynthSpec",
    "align_labels",
    "apply_selector",
    "calibrate_eta",
    "chi_square_scores",
    "class_centers",
    "compare_selection",
    "dbscan",
    "decide",
    "decide_batch",
    "distances",
    "evaluate",
    "fit_centroids",
    "fit_model",
    "fit_selector",
    "load_binary",
    "load_csv",
    "load_matrix",
    "load_model",
    "project_2d",
    "render_scatter",
    "save_binary",
    "save_csv",
    "save_matrix",
    "save_model",
    "shift_nonnegative",
    "suggest_eps",
    "sweep",
    "sweep_to_csv",
    "synthesize",
]
