"""Intrinsic causal contribution of noise terms in functional causal models."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    BadDistribution,
    CapExceeded,
    CausalIccError,
    ContinuousEntropyUnsupported,
    NonNumericTarget,
    NotFinite,
)
from .example_models import load_example
from .graph import AugmentedDag, CycleError, Dag, UnknownNode, ancestors, augment, topo_sort
from .icc import (
    AttributionReport,
    IccRequest,
    InvalidAbstraction,
    TargetHasDescendants,
    compare_marginalization,
    icc_ordering,
    icc_plain,
    icc_shapley,
    icc_via_interventions,
    insert_copy_node,
    marginalize,
    run_icc,
)
from .model import (
    Bernoulli,
    Categorical,
    ContinuousUniform,
    DiscreteUniform,
    Fcm,
    Normal,
    build_fcm,
    enumerate_noise_support,
    load_model,
    loads_model,
    point_mass,
    resolve_target,
    sample_do,
    sample_observational,
    sample_structure_preserving,
    validate,
)
from .shapley import CoalitionFn, ShapleyConfig, shapley_exact, shapley_permutation, zero_player_check
from .uncertainty import (
    EstimatorConfig,
    Measure,
    conditional_psi,
    mutual_information,
    relative_entropy,
)
