"""Optimal two-color microarray designs for factorial experiments under the baseline parametrization."""

from .approx import (
    DesignMeasure,
    NonConvergence,
    admissibility_gaps,
    is_admissible,
    certificate,
    closed_form_orth,
    closed_form_pi0,
    efficiency,
    exact_efficiency,
    hetero_efficiency,
    measure_criterion,
    measure_variances,
    optimize_measure,
    round_measure,
)
from .constructions import (
    OddDegree,
    construct_d0,
    construct_dbar,
    construct_egd_2x3,
    construct_reference,
    construct_symmetric,
    d0_collection,
    dye_swap,
    family_phi,
    is_egd,
    orient_even_design,
    permuted_d0,
    rho,
)
from .factorial import (
    ContrastVector,
    Design,
    FactorLayout,
    InvalidInput,
    Slide,
    baseline_contrast,
    canonicalize,
    candidate_slides,
    effect_contrast,
    enumerate_treatments,
    from_frequencies,
    frequencies,
    orthogonal_contrast_2x2,
)
from .models import (
    GENERAL_DYE,
    PLAIN,
    REDUCED_DYE,
    Dye,
    ModelSpec,
    NotEstimable,
    ReplicationPlan,
    VarianceReport,
    blue_variance,
    information_matrix,
    is_estimable,
    variance_report,
)
from .search import (
    ConjectureReport,
    CriterionWeights,
    ReplicationResult,
    SearchResult,
    all_effects_estimable_exact,
    augment_optimal,
    check_conjecture,
    criterion_value,
    exhaustive_estimability,
    exhaustive_w_optimal,
    min_slides,
    pareto_admissible,
    replication_plans,
    replication_search,
)

__version__ = "0.1.0"
