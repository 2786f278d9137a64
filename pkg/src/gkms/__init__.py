"""KMS states and weights on finite groupoid algebras and graph path spaces."""
from .algebra import AlgebraElement, convolve, involute, matrix_realization, reduced_norm, regular_representation
from .dynamics import InnerAction, extract_cocycle, fixes_units_subalgebra, is_diagonal_action, preserves_units_subalgebra
from .groupoid import (
    Cocycle,
    Groupoid,
    UnitMeasure,
    coboundary,
    conformal_measures,
    cyclic_group,
    disjoint_union,
    group_groupoid,
    pair_groupoid,
    structural_report,
    symmetric_group,
    validate_cocycle,
    validate_groupoid,
)
from .kms import (
    KmsFunctional,
    diagonalize_kms,
    equivalence_battery,
    kms_set,
    neshveyev_decompose,
    neshveyev_reconstruct,
    verify_kms,
)

__version__ = "0.1.0"
