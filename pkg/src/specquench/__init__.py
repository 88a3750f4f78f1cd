"""Variational spectral decomposition of quantum quench dynamics.

The package splits an initial many-body state into a small number of
energy-localized components, evolves each with a single phase factor, and
recovers long-time dynamics at a cost independent of the evolution time.
Exact windowed projections and full diagonalization are included as
references; hierarchical refinement breaks components down further when a
single pass is too coarse.
"""

from .basis import (
    SectorBasis,
    SectorSizeError,
    SpinOrder,
    domain_wall_bits,
    enumerate_sector,
    group_batch,
    one_hot_state,
    ungroup_batch,
)
from .hamiltonian import SparseHamiltonian, XxzParams, build_xxz, local_connections
from .exact import (
    DiagonalizationCapError,
    EigenSystem,
    ExactProjection,
    SpectralWindows,
    diagonalize,
    exact_evolve,
    exact_projection,
    make_windows,
    spectrum_bounds,
    window_count_for,
)
from .ideal import (
    component_moments,
    ideal_sigma,
    ideal_split,
    split_objective,
    weighted_sigma2,
)
from .ansatz import DenseFamily, MixingMatrix, component_norms, gram_spectrum, mix_components
from .network import AutoregressiveFamily
from .sampler import (
    SampleBatch,
    default_weights,
    draw,
    enumerated_batch,
    exact_mixture,
    mixture_probability,
    stepwise_log_probability,
)
from .trainer import (
    LambdaGrid,
    TrainResult,
    TrainSettings,
    Trainer,
    build_lambda_grid,
    exact_loss,
    load_checkpoint,
    loss_prefactor,
    mc_loss,
    save_checkpoint,
)
from .dynamics import (
    KMatrix,
    SpectralDecomposition,
    coherence_time,
    connected_correlator,
    fidelity,
    k_matrix,
    magnetization,
    magnetization_profile,
    overlap_drift_bound,
    quadratic_error_rate,
    reconstruct,
)
from .hierarchy import (
    DecompositionTree,
    ExactSplit,
    TrainedSplit,
    TreeNode,
    leaf_reconstruct,
    leaf_weighted_sigma2,
    load_tree,
    node_seed,
    run_breakdown,
    save_tree,
)
from .config import ConfigError, ExperimentConfig, load_config, parse_config, validate_config

__all__ = [
    "AutoregressiveFamily",
    "ConfigError",
    "DecompositionTree",
    "DenseFamily",
    "DiagonalizationCapError",
    "EigenSystem",
    "ExactProjection",
    "ExactSplit",
    "ExperimentConfig",
    "KMatrix",
    "LambdaGrid",
    "MixingMatrix",
    "SampleBatch",
    "SectorBasis",
    "SectorSizeError",
    "SparseHamiltonian",
    "SpectralDecomposition",
    "SpectralWindows",
    "SpinOrder",
    "TrainResult",
    "TrainSettings",
    "TrainedSplit",
    "Trainer",
    "TreeNode",
    "XxzParams",
    "build_lambda_grid",
    "build_xxz",
    "coherence_time",
    "component_moments",
    "component_norms",
    "connected_correlator",
    "default_weights",
    "diagonalize",
    "domain_wall_bits",
    "draw",
    "enumerate_sector",
    "enumerated_batch",
    "exact_evolve",
    "exact_loss",
    "exact_mixture",
    "exact_projection",
    "fidelity",
    "gram_spectrum",
    "group_batch",
    "ideal_sigma",
    "ideal_split",
    "k_matrix",
    "leaf_reconstruct",
    "leaf_weighted_sigma2",
    "load_checkpoint",
    "load_config",
    "load_tree",
    "local_connections",
    "loss_prefactor",
    "magnetization",
    "magnetization_profile",
    "make_windows",
    "mc_loss",
    "mix_components",
    "mixture_probability",
    "node_seed",
    "one_hot_state",
    "overlap_drift_bound",
    "parse_config",
    "quadratic_error_rate",
    "reconstruct",
    "run_breakdown",
    "save_checkpoint",
    "save_tree",
    "spectrum_bounds",
    "split_objective",
    "stepwise_log_probability",
    "ungroup_batch",
    "validate_config",
    "weighted_sigma2",
    "window_count_for",
]
