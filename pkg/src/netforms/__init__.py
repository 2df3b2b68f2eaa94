"""Energy forms, metrics, and Dirac operators on finite resistance networks."""

from .network import (
    NetworkError,
    ResistanceNetwork,
    build_network,
    energy,
    energy_measure,
    effective_resistance,
    generator,
    resistance_matrix,
    trace_to_subset,
    check_contraction_inequality,
    check_product_inequality,
    CONTRACTIONS,
)
from .spaces import (
    CoordinateSequence,
    GasketApprox,
    MetricTree,
    build_coordinate_sequence,
    build_gasket,
    build_m0,
    build_path,
    build_star,
    gasket_harmonic_pair,
    harmonic_extension,
    kusuoka_measure,
    rescale_dominated,
)
from .metrics import (
    IntrinsicSolution,
    MetricMatrix,
    compare_metric_chain,
    coordinate_metric,
    dendrite_additivity_check,
    intrinsic_metric,
    intrinsic_metric_matrix,
    intrinsic_metric_tree,
    path_length_metric,
    resistance_metric,
    sqrt_resistance_metric,
)
from .dirac import (
    DiracOperator,
    FiberStructure,
    codifferential,
    derivation,
    dirac_operator,
    dirac_spectrum,
    generator_eigensystem,
    hodge_decompose,
    module_action_left,
    module_action_right,
    one_form_inner,
    one_form_laplacian_spectrum,
    pair_space_representation,
    spectral_structure_report,
)
from .connes import (
    CommutatorReport,
    ConnesSolution,
    commutator,
    commutator_closed_form,
    commutator_norm,
    connes_distance,
    metric_coincidence_check,
    verify_spectral_triple,
)
from .reports import CheckReport

__version__ = "0.1.0"
