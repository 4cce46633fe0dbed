"""Semi-supervised node classification with class-compatibility matrices."""

from .compatibility import CompatibilityMatrix, Form, center_compatibility
from .errors import SSLHError
from .estimation import DheConfig, ObservedStats, dhe, lhe, mhe, neighbor_stats, nonbacktracking_matrix
from .generator import DegreeDist, PlantedGraphSpec, generate, validate_spec
from .graph import (
    LabelMatrix,
    PropagationMatrix,
    Representation,
    SparseGraph,
    build_propagation_matrix,
    center_labels,
    load_edge_list,
    load_labels,
    uncenter_labels,
)
from .harness import ExperimentSpec, accuracy, run_experiment, split_labels
from .kernels import BACKEND
from .propagation import (
    PropagationConfig,
    closed_form,
    convergence_boundary,
    energy,
    predict_labels,
    propagate,
    run_preset,
    spectral_radius,
)

__all__ = [
    "BACKEND", "CompatibilityMatrix", "DegreeDist", "DheConfig", "ExperimentSpec", "Form", "LabelMatrix",
    "ObservedStats", "PlantedGraphSpec", "PropagationConfig", "PropagationMatrix", "Representation",
    "SSLHError", "SparseGraph", "accuracy", "build_propagation_matrix", "center_compatibility",
    "center_labels", "closed_form", "convergence_boundary", "dhe", "energy", "generate", "lhe",
    "load_edge_list", "load_labels", "mhe", "neighbor_stats", "nonbacktracking_matrix", "predict_labels",
    "propagate", "run_experiment", "run_preset", "spectral_radius", "split_labels", "uncenter_labels",
    "validate_spec",
]

__version__ = "0.1.0"
